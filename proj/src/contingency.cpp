#include "fslink/contingency.hpp"

#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "fslink/csv.hpp"

namespace fslink {

void ContingencyTable::validate() const {
    if (counts.size() != pattern_count(q))
        throw std::invalid_argument("contingency table must hold 2^q cells");
    std::uint64_t total = 0;
    for (PatternId g = 0; g < counts.size(); ++g) {
        if (!support.contains(g) && counts[g] != 0)
            throw std::invalid_argument("count in structural-zero cell " +
                                        pattern_to_string(g, q));
        total += counts[g];
    }
    if (total != n) throw std::invalid_argument("contingency table total inconsistent");
}

ContingencyTable tabulate(const CandidatePairSet& pairs, int threads) {
    if (!pairs.patterns_attached)
        throw std::logic_error("tabulate requires attached comparison vectors");
    ContingencyTable table;
    table.q = pairs.q;
    table.support = pairs.support;
    table.counts.assign(pattern_count(pairs.q), 0);

    std::size_t n_pairs = pairs.pairs.size();
    if (threads < 2 || n_pairs < 4096) {
        for (const auto& p : pairs.pairs) {
            if (!p.iota) continue;
            if (!table.support.contains(p.pattern))
                throw std::invalid_argument("retained pair with pattern " +
                                            pattern_to_string(p.pattern, pairs.q) +
                                            " outside the support");
            ++table.counts[p.pattern];
        }
    } else {
        // per-thread tables, merged in a fixed order
        std::vector<std::vector<std::uint64_t>> parts(
            static_cast<std::size_t>(threads),
            std::vector<std::uint64_t>(pattern_count(pairs.q), 0));
        std::vector<int> bad(static_cast<std::size_t>(threads), -1);
        std::size_t chunk = (n_pairs + static_cast<std::size_t>(threads) - 1) /
                            static_cast<std::size_t>(threads);
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            std::size_t lo = static_cast<std::size_t>(t) * chunk;
            if (lo >= n_pairs) break;
            std::size_t hi = std::min(n_pairs, lo + chunk);
            pool.emplace_back([&, t, lo, hi] {
                auto& local = parts[static_cast<std::size_t>(t)];
                for (std::size_t i = lo; i < hi; ++i) {
                    const auto& p = pairs.pairs[i];
                    if (!p.iota) continue;
                    if (!pairs.support.contains(p.pattern)) {
                        bad[static_cast<std::size_t>(t)] = static_cast<int>(p.pattern);
                        return;
                    }
                    ++local[p.pattern];
                }
            });
        }
        for (auto& th : pool) th.join();
        for (int b : bad)
            if (b >= 0)
                throw std::invalid_argument("retained pair with pattern " +
                                            pattern_to_string(static_cast<PatternId>(b), pairs.q) +
                                            " outside the support");
        for (const auto& local : parts)
            for (PatternId g = 0; g < local.size(); ++g) table.counts[g] += local[g];
    }
    table.n = std::accumulate(table.counts.begin(), table.counts.end(), std::uint64_t{0});
    return table;
}

ContingencyTable merge(const ContingencyTable& t1, const ContingencyTable& t2) {
    if (t1.q != t2.q) throw std::invalid_argument("merge: comparison counts differ");
    if (!(t1.support == t2.support)) throw std::invalid_argument("merge: supports differ");
    ContingencyTable out = t1;
    for (PatternId g = 0; g < out.counts.size(); ++g) out.counts[g] += t2.counts[g];
    out.n = t1.n + t2.n;
    return out;
}

void write_table_csv(const std::string& path, const ContingencyTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "pattern,count,in_support\n";
    for (PatternId g = 0; g < table.counts.size(); ++g)
        out << pattern_to_string(g, table.q) << ',' << table.counts[g] << ','
            << (table.support.contains(g) ? 1 : 0) << '\n';
}

ContingencyTable read_table_csv(const std::string& path) {
    auto rows = csv::read_file(path, ',');
    if (rows.size() < 2) throw std::runtime_error("contingency file is empty: " + path);
    int q = static_cast<int>(rows[1][0].size());
    if (q < 1 || q > kMaxComparisons)
        throw std::runtime_error("contingency file has invalid pattern width");
    ContingencyTable table;
    table.q = q;
    table.counts.assign(pattern_count(q), 0);
    std::vector<bool> mask(pattern_count(q), false);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != 3)
            throw std::runtime_error("contingency row " + std::to_string(r + 1) +
                                     ": expected 3 fields, got " + std::to_string(row.size()));
        PatternId g = pattern_from_string(row[0]);
        table.counts[g] = std::stoull(row[1]);
        mask[g] = row[2] != "0";
    }
    table.support = SupportSet(q, std::move(mask));
    table.n = std::accumulate(table.counts.begin(), table.counts.end(), std::uint64_t{0});
    table.validate();
    return table;
}

}  // namespace fslink
