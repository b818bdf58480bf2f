#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fslink/corpus.hpp"

namespace fslink {

/// A comparison pattern g in {0,1}^q packed into an integer: bit j holds
/// comparison j+1. q is capped at 20 so pattern space stays enumerable.
using PatternId = std::uint32_t;

inline constexpr int kMaxComparisons = 20;

inline bool pattern_bit(PatternId g, int j) { return (g >> j) & 1u; }
inline int pattern_ones(PatternId g) { return __builtin_popcount(g); }
inline std::uint32_t pattern_count(int q) { return 1u << q; }

std::string pattern_to_string(PatternId g, int q);       // "g(1)g(2)...g(q)"
PatternId pattern_from_string(const std::string& bits);  // inverse

struct ComparatorSpec {
    enum class Kind { Exact, JaroWinklerThreshold };
    std::size_t field_index = 0;
    Kind kind = Kind::Exact;
    double threshold = 0.9;  // used by the JW kind only; agreement when score >= threshold
};

void validate_specs(const std::vector<ComparatorSpec>& specs, const RecordSchema& schema);

/// Plain Jaro similarity (match window floor(max/2)-1, transpositions).
double jaro(const std::string& s1, const std::string& s2);

/// Jaro-Winkler: Jaro plus prefix boost p=0.1 over at most 4 leading
/// characters. Inputs are UTF-8; comparison is per code point and
/// case-sensitive. Two empty strings score 0, equal non-empty strings 1.
double jaro_winkler(const std::string& s1, const std::string& s2);

/// Comparison vector for one record pair. Bit j is 1 iff comparator j
/// agrees; any absent value forces disagreement.
PatternId compare_pair(const Record& a, const Record& b,
                       const std::vector<ComparatorSpec>& specs);

}  // namespace fslink
