#include "fslink/comparators.hpp"

#include <algorithm>
#include <stdexcept>

namespace fslink {

std::string pattern_to_string(PatternId g, int q) {
    std::string out(static_cast<std::size_t>(q), '0');
    for (int j = 0; j < q; ++j)
        if (pattern_bit(g, j)) out[static_cast<std::size_t>(j)] = '1';
    return out;
}

PatternId pattern_from_string(const std::string& bits) {
    if (bits.size() > kMaxComparisons)
        throw std::invalid_argument("pattern string longer than " +
                                    std::to_string(kMaxComparisons) + " bits");
    PatternId g = 0;
    for (std::size_t j = 0; j < bits.size(); ++j) {
        if (bits[j] == '1') g |= 1u << j;
        else if (bits[j] != '0') throw std::invalid_argument("pattern string must be 0/1");
    }
    return g;
}

void validate_specs(const std::vector<ComparatorSpec>& specs, const RecordSchema& schema) {
    if (specs.empty()) throw std::invalid_argument("at least one comparator required");
    if (specs.size() > kMaxComparisons)
        throw std::invalid_argument("at most " + std::to_string(kMaxComparisons) +
                                    " comparators supported");
    for (const auto& s : specs) {
        if (s.field_index >= schema.size())
            throw std::invalid_argument("comparator field index out of range");
        if (s.kind == ComparatorSpec::Kind::JaroWinklerThreshold &&
            (s.threshold <= 0.0 || s.threshold > 1.0))
            throw std::invalid_argument("jaro-winkler threshold must lie in (0,1]");
    }
}

namespace {

// UTF-8 decode; invalid bytes fall back to their Latin-1 value so that
// malformed input still compares deterministically.
std::vector<char32_t> decode_utf8(const std::string& s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        std::size_t extra = 0;
        char32_t acc = c;
        if (c >= 0xF0) { extra = 3; acc = c & 0x07u; }
        else if (c >= 0xE0) { extra = 2; acc = c & 0x0Fu; }
        else if (c >= 0xC0) { extra = 1; acc = c & 0x1Fu; }
        bool ok = extra > 0 && i + extra < s.size();
        for (std::size_t k = 1; k <= extra && ok; ++k) {
            unsigned char cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0u) != 0x80u) ok = false;
            else acc = (acc << 6) | (cc & 0x3Fu);
        }
        if (ok) {
            out.push_back(acc);
            i += extra + 1;
        } else {
            out.push_back(c);
            ++i;
        }
    }
    return out;
}

}  // namespace

double jaro(const std::string& s1, const std::string& s2) {
    auto a = decode_utf8(s1);
    auto b = decode_utf8(s2);
    if (a.empty() && b.empty()) return 0.0;
    if (a.empty() || b.empty()) return 0.0;
    if (a == b) return 1.0;

    auto la = static_cast<long>(a.size());
    auto lb = static_cast<long>(b.size());
    long window = std::max(la, lb) / 2 - 1;
    if (window < 0) window = 0;

    std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
    long m = 0;
    for (long i = 0; i < la; ++i) {
        long lo = std::max(0L, i - window);
        long hi = std::min(lb - 1, i + window);
        for (long j = lo; j <= hi; ++j) {
            if (!used_b[static_cast<std::size_t>(j)] &&
                a[static_cast<std::size_t>(i)] == b[static_cast<std::size_t>(j)]) {
                used_a[static_cast<std::size_t>(i)] = 1;
                used_b[static_cast<std::size_t>(j)] = 1;
                ++m;
                break;
            }
        }
    }
    if (m == 0) return 0.0;

    // transpositions: matched characters out of order, counted in halves
    long half_transpositions = 0;
    long j = 0;
    for (long i = 0; i < la; ++i) {
        if (!used_a[static_cast<std::size_t>(i)]) continue;
        while (!used_b[static_cast<std::size_t>(j)]) ++j;
        if (a[static_cast<std::size_t>(i)] != b[static_cast<std::size_t>(j)])
            ++half_transpositions;
        ++j;
    }
    double t = static_cast<double>(half_transpositions) / 2.0;
    double md = static_cast<double>(m);
    return (md / static_cast<double>(la) + md / static_cast<double>(lb) + (md - t) / md) / 3.0;
}

double jaro_winkler(const std::string& s1, const std::string& s2) {
    double j = jaro(s1, s2);
    if (j <= 0.0) return j;
    auto a = decode_utf8(s1);
    auto b = decode_utf8(s2);
    std::size_t max_prefix = std::min<std::size_t>({4, a.size(), b.size()});
    std::size_t prefix = 0;
    while (prefix < max_prefix && a[prefix] == b[prefix]) ++prefix;
    return j + static_cast<double>(prefix) * 0.1 * (1.0 - j);
}

PatternId compare_pair(const Record& a, const Record& b,
                       const std::vector<ComparatorSpec>& specs) {
    PatternId g = 0;
    for (std::size_t j = 0; j < specs.size(); ++j) {
        const auto& spec = specs[j];
        const FieldValue& va = a.at(spec.field_index);
        const FieldValue& vb = b.at(spec.field_index);
        if (!va || !vb) continue;  // absent value: disagreement
        bool agree = false;
        if (spec.kind == ComparatorSpec::Kind::Exact) {
            agree = *va == *vb;
        } else {
            agree = jaro_winkler(*va, *vb) >= spec.threshold;
        }
        if (agree) g |= 1u << j;
    }
    return g;
}

}  // namespace fslink
