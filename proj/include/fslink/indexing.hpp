#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fslink/comparators.hpp"
#include "fslink/corpus.hpp"

namespace fslink {

struct KeyExtractor {
    enum class Transform { Identity, FirstChars, LastChars };
    std::size_t field_index = 0;
    Transform transform = Transform::Identity;
    int k = 1;  // for First/LastChars; counted in code points
};

/// A blocking key is a conjunction of extracted field values; records with
/// any absent key field form no pairs.
struct BlockingKey {
    std::vector<KeyExtractor> extractors;

    void validate(const RecordSchema& schema) const;
    // nullopt when any needed field is absent
    std::optional<std::string> key_of(const Record& rec) const;
};

struct FilterPredicate {
    enum class Kind { MinAgreements, LogRatioCutoff, ExplicitPatterns };
    Kind kind = Kind::MinAgreements;
    int min_agreements = 0;
    // LogRatioCutoff: pairs with log(m_probs[g]) - log(u_probs[g]) < cutoff
    // are dropped; both vectors are provisional distributions over all of
    // pattern space.
    std::vector<double> m_probs, u_probs;
    double cutoff = 0.0;
    std::vector<PatternId> patterns;  // ExplicitPatterns
};

/// Union-of-passes indexing plan; the optional filter runs after comparison
/// vectors are attached.
struct IndexingPlan {
    std::vector<BlockingKey> passes;
    std::optional<FilterPredicate> filter;
};

/// Mask over pattern space marking the patterns that can survive filtering.
class SupportSet {
  public:
    SupportSet() = default;
    static SupportSet full(int q);
    SupportSet(int q, std::vector<bool> mask);

    int q() const { return q_; }
    bool contains(PatternId g) const { return mask_[g]; }
    std::size_t count() const;
    bool is_full() const;
    const std::vector<bool>& mask() const { return mask_; }
    bool operator==(const SupportSet& other) const = default;

    // patterns in the set, ascending
    std::vector<PatternId> members() const;

  private:
    int q_ = 0;
    std::vector<bool> mask_;
};

/// Enumerates pattern space and keeps the patterns satisfying the
/// predicate. Throws when q exceeds the enumeration cap or the result is
/// empty.
SupportSet derive_support(const FilterPredicate& pred, int q);

struct CandidatePair {
    std::uint32_t a = 0, b = 0;
    PatternId pattern = 0;
    bool iota = true;  // survived filtering (meaningful once a filter ran)
};

/// Pairs that survived blocking (so beta = 1 for every entry), with
/// comparison vectors and filter flags attached as the pipeline advances.
struct CandidatePairSet {
    bool two_file = false;  // (a in A, b in B) instead of a < b within one store
    int q = 0;
    std::vector<CandidatePair> pairs;
    SupportSet support;  // full pattern space until a filter is applied
    std::size_t n_blocked = 0;
    std::size_t n_filtered = 0;
    bool patterns_attached = false;
    bool filtered = false;

    std::size_t excluded_by_filter() const { return n_blocked - n_filtered; }
};

/// Pairs agreeing on the key within one store (deduplication; a < b, never
/// (a,a)).
std::vector<std::pair<std::uint32_t, std::uint32_t>> block_pairs(const RecordStore& store,
                                                                 const BlockingKey& key);

/// Pairs agreeing on the key across two stores.
std::vector<std::pair<std::uint32_t, std::uint32_t>> block_pairs(const RecordStore& a,
                                                                 const RecordStore& b,
                                                                 const BlockingKey& key);

/// Set-union of the plan's blocking passes; each pair appears once,
/// canonically ordered. The plan's filter is not applied here.
CandidatePairSet union_passes(const RecordStore& store, const IndexingPlan& plan);
CandidatePairSet union_passes(const RecordStore& a, const RecordStore& b,
                              const IndexingPlan& plan);

/// Computes and attaches comparison vectors; parallel over pairs when
/// threads > 1, with schedule-independent output.
void attach_patterns(CandidatePairSet& set, const RecordStore& store,
                     const std::vector<ComparatorSpec>& specs, int threads = 1);
void attach_patterns(CandidatePairSet& set, const RecordStore& a, const RecordStore& b,
                     const std::vector<ComparatorSpec>& specs, int threads = 1);

/// Marks each pair's iota flag from the predicate-derived support and
/// records the retained count.
void apply_filter(CandidatePairSet& set, const FilterPredicate& pred);

void write_pairs_csv(const std::string& path, const CandidatePairSet& set);
/// q = 0 infers the comparison count from the largest pattern present.
CandidatePairSet read_pairs_csv(const std::string& path, int q = 0);

}  // namespace fslink
