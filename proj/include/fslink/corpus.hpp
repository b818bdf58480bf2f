#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fslink {

enum class FieldKind { String, Categorical, Integer };

struct FieldSpec {
    std::string name;
    FieldKind kind = FieldKind::String;
};

/// Ordered field layout shared by every record in a store.
struct RecordSchema {
    std::vector<FieldSpec> fields;

    std::size_t size() const { return fields.size(); }
    // index of a named field; throws if unknown
    std::size_t index_of(const std::string& name) const;
    // throws std::invalid_argument on duplicate or empty names
    void validate() const;
};

using FieldValue = std::optional<std::string>;  // nullopt = absent
using Record = std::vector<FieldValue>;

struct RecordStore {
    RecordSchema schema;
    std::vector<Record> records;

    std::size_t size() const { return records.size(); }
    const Record& record(std::uint32_t id) const { return records.at(id); }
};

/// Unordered truly-coreferent pairs, stored canonically (small id first).
class GroundTruth {
  public:
    GroundTruth() = default;
    explicit GroundTruth(std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs);

    void add(std::uint32_t a, std::uint32_t b);
    void finalize();  // sort + dedupe; called automatically by contains()
    bool contains(std::uint32_t a, std::uint32_t b) const;
    std::size_t size() const { return pairs_.size(); }
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs() const { return pairs_; }

  private:
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs_;
    mutable bool sorted_ = true;
};

struct CsvOptions {
    char delimiter = ',';
    bool header = true;
    // field content treated as an absent value (R exports write "NA")
    std::string na_marker = "NA";
};

/// Loads a delimited file against a fixed schema. Row arity must match the
/// schema exactly; the error message names the offending 1-based row.
RecordStore load_csv(const std::string& path, const RecordSchema& schema,
                     const CsvOptions& options = {});

void write_csv(const std::string& path, const RecordStore& store,
               const CsvOptions& options = {});

/// Ground truth as a two-column id-pair CSV.
GroundTruth load_truth_csv(const std::string& path, bool header = true);
void write_truth_csv(const std::string& path, const GroundTruth& truth);

/// Ground truth from a one-column entity-id file (row order = record id);
/// records sharing an entity id become match pairs.
GroundTruth truth_from_identity_csv(const std::string& path, bool header = true);

struct CorruptionConfig {
    double duplicate_fraction = 0.1;
    // per-field probability that the duplicate's value gets one corruption
    std::vector<double> field_probs;

    void validate(std::size_t n_fields) const;
};

/// Schema used by the built-in generator: two name strings plus a
/// year/month/day of birth.
RecordSchema person_schema();

/// Synthesizes n_base person records plus corrupted duplicates with known
/// ground truth. Identical (n_base, config, seed) yields bit-identical
/// output. Duplicates are appended after the base block, so
/// id >= n_base identifies a duplicate.
std::pair<RecordStore, GroundTruth> generate_corpus(std::size_t n_base,
                                                    const CorruptionConfig& config,
                                                    std::uint64_t seed);

}  // namespace fslink
