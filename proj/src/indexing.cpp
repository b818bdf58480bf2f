#include "fslink/indexing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "fslink/csv.hpp"

namespace fslink {

namespace {

// code-point-aware prefix/suffix
std::string first_chars(const std::string& s, int k) {
    int count = 0;
    std::size_t i = 0;
    while (i < s.size() && count < k) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t step = 1;
        if (c >= 0xF0) step = 4;
        else if (c >= 0xE0) step = 3;
        else if (c >= 0xC0) step = 2;
        i = std::min(s.size(), i + step);
        ++count;
    }
    return s.substr(0, i);
}

std::string last_chars(const std::string& s, int k) {
    // walk code point starts from the front, keep the last k
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < s.size();) {
        starts.push_back(i);
        unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t step = 1;
        if (c >= 0xF0) step = 4;
        else if (c >= 0xE0) step = 3;
        else if (c >= 0xC0) step = 2;
        i = std::min(s.size(), i + step);
    }
    if (static_cast<std::size_t>(k) >= starts.size()) return s;
    return s.substr(starts[starts.size() - static_cast<std::size_t>(k)]);
}

std::uint64_t pack_pair(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace

void BlockingKey::validate(const RecordSchema& schema) const {
    if (extractors.empty()) throw std::invalid_argument("blocking key needs an extractor");
    for (const auto& e : extractors) {
        if (e.field_index >= schema.size())
            throw std::invalid_argument("blocking key field index out of range");
        if (e.transform != KeyExtractor::Transform::Identity && e.k < 1)
            throw std::invalid_argument("blocking key char count must be >= 1");
    }
}

std::optional<std::string> BlockingKey::key_of(const Record& rec) const {
    std::string key;
    for (const auto& e : extractors) {
        const FieldValue& v = rec.at(e.field_index);
        if (!v) return std::nullopt;
        std::string part;
        switch (e.transform) {
            case KeyExtractor::Transform::Identity: part = *v; break;
            case KeyExtractor::Transform::FirstChars: part = first_chars(*v, e.k); break;
            case KeyExtractor::Transform::LastChars: part = last_chars(*v, e.k); break;
        }
        key += part;
        key.push_back('\x1f');  // unit separator keeps parts unambiguous
    }
    return key;
}

SupportSet SupportSet::full(int q) {
    return SupportSet(q, std::vector<bool>(pattern_count(q), true));
}

SupportSet::SupportSet(int q, std::vector<bool> mask) : q_(q), mask_(std::move(mask)) {
    if (q < 0 || q > kMaxComparisons)
        throw std::invalid_argument("comparison count outside [0," +
                                    std::to_string(kMaxComparisons) + "]");
    if (mask_.size() != pattern_count(q))
        throw std::invalid_argument("support mask size must be 2^q");
}

std::size_t SupportSet::count() const {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), true));
}

bool SupportSet::is_full() const {
    return std::find(mask_.begin(), mask_.end(), false) == mask_.end();
}

std::vector<PatternId> SupportSet::members() const {
    std::vector<PatternId> out;
    for (PatternId g = 0; g < mask_.size(); ++g)
        if (mask_[g]) out.push_back(g);
    return out;
}

SupportSet derive_support(const FilterPredicate& pred, int q) {
    if (q < 1 || q > kMaxComparisons)
        throw std::invalid_argument("comparison count must lie in [1," +
                                    std::to_string(kMaxComparisons) + "]");
    std::uint32_t n = pattern_count(q);
    std::vector<bool> mask(n, false);
    switch (pred.kind) {
        case FilterPredicate::Kind::MinAgreements: {
            if (pred.min_agreements < 0 || pred.min_agreements > q)
                throw std::invalid_argument("min_agreements must lie in [0,q]");
            for (PatternId g = 0; g < n; ++g)
                mask[g] = pattern_ones(g) >= pred.min_agreements;
            break;
        }
        case FilterPredicate::Kind::LogRatioCutoff: {
            if (pred.m_probs.size() != n || pred.u_probs.size() != n)
                throw std::invalid_argument("log-ratio filter needs provisional m/u "
                                            "probabilities over all 2^q patterns");
            for (PatternId g = 0; g < n; ++g) {
                double m = pred.m_probs[g], u = pred.u_probs[g];
                if (m < 0 || u < 0)
                    throw std::invalid_argument("provisional probabilities must be >= 0");
                // log(m) - log(u) >= cutoff, with 0-mass conventions
                if (m == 0.0) continue;               // -inf ratio: dropped
                bool keep = u == 0.0                  // +inf ratio: kept
                            || std::log(m) - std::log(u) >= pred.cutoff;
                mask[g] = keep;
            }
            break;
        }
        case FilterPredicate::Kind::ExplicitPatterns: {
            for (PatternId g : pred.patterns) {
                if (g >= n) throw std::invalid_argument("explicit pattern out of range");
                mask[g] = true;
            }
            break;
        }
    }
    SupportSet support(q, std::move(mask));
    if (support.count() == 0) throw std::invalid_argument("filter support is empty");
    return support;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> block_pairs(const RecordStore& store,
                                                                 const BlockingKey& key) {
    key.validate(store.schema);
    std::unordered_map<std::string, std::vector<std::uint32_t>> groups;
    for (std::uint32_t id = 0; id < store.records.size(); ++id) {
        if (auto k = key.key_of(store.records[id])) groups[*k].push_back(id);
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    for (const auto& [_, ids] : groups) {
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = i + 1; j < ids.size(); ++j)
                out.emplace_back(ids[i], ids[j]);  // ids ascend within a group
    }
    return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> block_pairs(const RecordStore& a,
                                                                 const RecordStore& b,
                                                                 const BlockingKey& key) {
    key.validate(a.schema);
    key.validate(b.schema);
    std::unordered_map<std::string, std::vector<std::uint32_t>> groups_a;
    for (std::uint32_t id = 0; id < a.records.size(); ++id) {
        if (auto k = key.key_of(a.records[id])) groups_a[*k].push_back(id);
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    for (std::uint32_t id = 0; id < b.records.size(); ++id) {
        if (auto k = key.key_of(b.records[id])) {
            auto it = groups_a.find(*k);
            if (it == groups_a.end()) continue;
            for (std::uint32_t ia : it->second) out.emplace_back(ia, id);
        }
    }
    return out;
}

namespace {

CandidatePairSet union_impl(const std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>>& per_pass,
                            bool two_file) {
    std::unordered_set<std::uint64_t> seen;
    std::vector<CandidatePair> pairs;
    for (const auto& pass : per_pass) {
        for (const auto& [a, b] : pass) {
            if (seen.insert(pack_pair(a, b)).second) pairs.push_back({a, b, 0, true});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const CandidatePair& x, const CandidatePair& y) {
        return x.a != y.a ? x.a < y.a : x.b < y.b;
    });
    CandidatePairSet set;
    set.two_file = two_file;
    set.pairs = std::move(pairs);
    set.n_blocked = set.pairs.size();
    return set;
}

}  // namespace

CandidatePairSet union_passes(const RecordStore& store, const IndexingPlan& plan) {
    if (plan.passes.empty()) throw std::invalid_argument("indexing plan needs >= 1 pass");
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> per_pass;
    per_pass.reserve(plan.passes.size());
    for (const auto& key : plan.passes) per_pass.push_back(block_pairs(store, key));
    return union_impl(per_pass, false);
}

CandidatePairSet union_passes(const RecordStore& a, const RecordStore& b,
                              const IndexingPlan& plan) {
    if (plan.passes.empty()) throw std::invalid_argument("indexing plan needs >= 1 pass");
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> per_pass;
    per_pass.reserve(plan.passes.size());
    for (const auto& key : plan.passes) per_pass.push_back(block_pairs(a, b, key));
    return union_impl(per_pass, true);
}

namespace {

template <typename PatternFn>
void attach_impl(CandidatePairSet& set, int q, int threads, PatternFn&& fn) {
    std::size_t n = set.pairs.size();
    if (threads < 1) threads = 1;
    auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) set.pairs[i].pattern = fn(set.pairs[i]);
    };
    if (threads == 1 || n < 1024) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (n + static_cast<std::size_t>(threads) - 1) / static_cast<std::size_t>(threads);
        for (int t = 0; t < threads; ++t) {
            std::size_t lo = static_cast<std::size_t>(t) * chunk;
            if (lo >= n) break;
            pool.emplace_back(worker, lo, std::min(n, lo + chunk));
        }
        for (auto& th : pool) th.join();
    }
    set.q = q;
    set.support = SupportSet::full(q);
    set.patterns_attached = true;
    set.filtered = false;
    set.n_filtered = set.n_blocked;
    for (auto& p : set.pairs) p.iota = true;
}

}  // namespace

void attach_patterns(CandidatePairSet& set, const RecordStore& store,
                     const std::vector<ComparatorSpec>& specs, int threads) {
    if (set.two_file) throw std::invalid_argument("pair set was built from two stores");
    validate_specs(specs, store.schema);
    attach_impl(set, static_cast<int>(specs.size()), threads, [&](const CandidatePair& p) {
        return compare_pair(store.records[p.a], store.records[p.b], specs);
    });
}

void attach_patterns(CandidatePairSet& set, const RecordStore& a, const RecordStore& b,
                     const std::vector<ComparatorSpec>& specs, int threads) {
    if (!set.two_file) throw std::invalid_argument("pair set was built from one store");
    validate_specs(specs, a.schema);
    validate_specs(specs, b.schema);
    attach_impl(set, static_cast<int>(specs.size()), threads, [&](const CandidatePair& p) {
        return compare_pair(a.records[p.a], b.records[p.b], specs);
    });
}

void apply_filter(CandidatePairSet& set, const FilterPredicate& pred) {
    if (!set.patterns_attached)
        throw std::logic_error("apply_filter requires attached comparison vectors");
    SupportSet support = derive_support(pred, set.q);
    std::size_t kept = 0;
    for (auto& p : set.pairs) {
        p.iota = support.contains(p.pattern);
        kept += p.iota ? 1u : 0u;
    }
    set.support = std::move(support);
    set.n_filtered = kept;
    set.filtered = true;
}

void write_pairs_csv(const std::string& path, const CandidatePairSet& set) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "id_a,id_b,pattern_id,beta,iota\n";
    for (const auto& p : set.pairs)
        out << p.a << ',' << p.b << ',' << p.pattern << ",1," << (p.iota ? 1 : 0) << '\n';
}

CandidatePairSet read_pairs_csv(const std::string& path, int q_hint) {
    auto rows = csv::read_file(path, ',');
    CandidatePairSet set;
    bool any_zero_iota = false;
    PatternId max_pattern = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != 5)
            throw std::runtime_error("pairs row " + std::to_string(r + 1) +
                                     ": expected 5 fields, got " + std::to_string(row.size()));
        CandidatePair p;
        p.a = static_cast<std::uint32_t>(std::stoul(row[0]));
        p.b = static_cast<std::uint32_t>(std::stoul(row[1]));
        p.pattern = static_cast<PatternId>(std::stoul(row[2]));
        p.iota = row[4] != "0";
        any_zero_iota = any_zero_iota || !p.iota;
        max_pattern = std::max(max_pattern, p.pattern);
        set.pairs.push_back(p);
    }
    int q = q_hint;
    if (q <= 0) {
        q = 1;
        while (pattern_count(q) <= max_pattern) ++q;
    } else if (max_pattern >= pattern_count(q)) {
        throw std::runtime_error("pairs file holds a pattern outside 2^q");
    }
    set.q = q;
    set.support = SupportSet::full(q);
    set.n_blocked = set.pairs.size();
    set.n_filtered = 0;
    for (const auto& p : set.pairs) set.n_filtered += p.iota ? 1u : 0u;
    set.patterns_attached = true;
    set.filtered = any_zero_iota;
    return set;
}

}  // namespace fslink
