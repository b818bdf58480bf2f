#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fslink/contingency.hpp"
#include "fslink/corpus.hpp"
#include "fslink/decision.hpp"
#include "fslink/estimation.hpp"
#include "fslink/evaluation.hpp"
#include "fslink/indexing.hpp"

namespace fslink {

/// Invalid configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A pipeline stage failed; the CLI maps this to exit code 3.
struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage(stage) {}
    std::string stage;
};

struct GeneratorSpec {
    std::size_t n_base = 1000;
    CorruptionConfig corruption;
};

struct InputSpec {
    std::optional<std::string> csv_path;    // single file (deduplication)
    std::optional<std::string> csv_path_b;  // second file (two-file linkage)
    std::optional<GeneratorSpec> generator;
    CsvOptions csv_options;
    std::optional<std::string> truth_csv;     // id-pair file
    std::optional<std::string> identity_csv;  // entity-id column
};

struct DecisionSpec {
    double mu = 0.001;
    double lambda = 0.001;
    // rescale mu by n_blocked / n_filtered so the expected number of false
    // matches is held fixed relative to the unfiltered pipeline
    bool scale_mu_for_filter = false;
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "out";
    InputSpec input;
    RecordSchema schema;
    std::vector<ComparatorSpec> comparators;
    std::vector<std::string> comparator_names;
    IndexingPlan plan;
    std::string model = "qci";  // "ci" | "qci"
    EmConfig em;
    DecisionSpec decision;
    std::vector<std::pair<int, int>> chi2_pairs;  // comparator index pairs

    // throws ConfigError; enforces that the ci model runs without a filter
    void validate() const;
};

PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config_json(const std::string& text);

/// Stage entry points. Each consumes the previous stage's files from the
/// config's output directory and writes its own, so chained invocations
/// reproduce run_pipeline byte for byte.
void stage_generate(const PipelineConfig& config);
void stage_index(const PipelineConfig& config);
void stage_fit(const PipelineConfig& config);
void stage_decide(const PipelineConfig& config);
void stage_evaluate(const PipelineConfig& config);

/// Full run: ingest/generate, index+compare+filter, fit, decide, evaluate
/// (when ground truth is available), writing a summary and manifest.
void run_pipeline(const PipelineConfig& config);

/// Standalone fit for a bare contingency-table CSV.
void fit_table_file(const std::string& table_csv, const std::string& model,
                    const EmConfig& em, const std::string& out_dir);

}  // namespace fslink
