// Command-line front end for the record linkage pipeline. Subcommands mirror
// the pipeline stages so artifacts can be produced stepwise or in one run.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fslink/pipeline.hpp"
#include "fslink/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct CommonOpts {
    std::string config_path;
    std::string out_override;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> threads_override;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
    cmd->add_option("--config", opts.config_path, "Pipeline config file (JSON)")
        ->required(config_required);
    cmd->add_option("--out", opts.out_override, "Override the config's output directory");
    auto* seed = cmd->add_option("--seed", "Override the config's seed");
    seed->each([&opts](const std::string& v) { opts.seed_override = std::stoull(v); });
    auto* threads = cmd->add_option("--threads", "Cap worker parallelism");
    threads->each([&opts](const std::string& v) { opts.threads_override = std::stoi(v); });
}

fslink::PipelineConfig load(const CommonOpts& opts) {
    fslink::PipelineConfig config = fslink::load_config(opts.config_path);
    if (!opts.out_override.empty()) config.out_dir = opts.out_override;
    if (opts.seed_override) {
        config.seed = *opts.seed_override;
        config.em.seed = fslink::derive_seed(config.seed, 0x656dULL);
    }
    if (opts.threads_override) config.threads = *opts.threads_override;
    config.validate();
    return config;
}

std::vector<double> parse_thresholds(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "fslink: probabilistic record linkage and deduplication with "
        "error-rate-calibrated decision rules"};
    app.require_subcommand(1);

    CommonOpts run_opts, gen_opts, index_opts, fit_opts, decide_opts, eval_opts;
    std::string jw_thresholds;
    std::string fit_table, fit_model = "qci", fit_out = "out";
    int fit_max_iter = 1000;
    double fit_tol = 1e-6;

    auto* run = app.add_subcommand(
        "run", "Full pipeline: ingest/generate, index, fit, decide, evaluate");
    add_common(run, run_opts);
    run->add_option("--jw-thresholds", jw_thresholds,
                    "Comma-separated Jaro-Winkler thresholds; runs the pipeline once per "
                    "value into <out>/thr_<t>/");

    auto* gen = app.add_subcommand("generate", "Write a synthetic corpus and its ground truth");
    add_common(gen, gen_opts);

    auto* index = app.add_subcommand(
        "index", "Blocking passes, comparison vectors and filtering; writes pairs.csv and "
                 "contingency.csv");
    add_common(index, index_opts);

    auto* fit = app.add_subcommand("fit", "Fit the mixture model from contingency.csv");
    add_common(fit, fit_opts, false);
    fit->add_option("--table", fit_table,
                    "Fit a bare contingency-table CSV instead of a pipeline output");
    fit->add_option("--model", fit_model, "Model for --table mode: ci or qci")
        ->check(CLI::IsMember({"ci", "qci"}));
    fit->add_option("--table-out", fit_out, "Output directory for --table mode");
    fit->add_option("--max-iter", fit_max_iter, "EM iteration cap for --table mode");
    fit->add_option("--tol", fit_tol, "EM convergence tolerance for --table mode");

    auto* decide = app.add_subcommand(
        "decide", "Build the decision rule and classify pairs from fitted parameters");
    add_common(decide, decide_opts);

    auto* eval = app.add_subcommand(
        "evaluate", "Nominal vs true error rates, calibration and discrepancy outputs");
    add_common(eval, eval_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            fslink::PipelineConfig config = load(run_opts);
            if (jw_thresholds.empty()) {
                fslink::run_pipeline(config);
            } else {
                for (double t : parse_thresholds(jw_thresholds)) {
                    fslink::PipelineConfig sub = config;
                    for (auto& spec : sub.comparators)
                        if (spec.kind == fslink::ComparatorSpec::Kind::JaroWinklerThreshold)
                            spec.threshold = t;
                    std::ostringstream dir;
                    dir << config.out_dir << "/thr_" << t;
                    sub.out_dir = dir.str();
                    std::cerr << "running threshold " << t << " -> " << sub.out_dir << "\n";
                    fslink::run_pipeline(sub);
                }
            }
        } else if (gen->parsed()) {
            fslink::stage_generate(load(gen_opts));
        } else if (index->parsed()) {
            fslink::PipelineConfig config = load(index_opts);
            fslink::stage_generate(config);  // no-op for csv input
            fslink::stage_index(config);
        } else if (fit->parsed()) {
            if (!fit_table.empty()) {
                fslink::EmConfig em;
                em.max_iter = fit_max_iter;
                em.tol = fit_tol;
                fslink::fit_table_file(fit_table, fit_model, em, fit_out);
            } else if (!fit_opts.config_path.empty()) {
                fslink::stage_fit(load(fit_opts));
            } else {
                std::cerr << "fit needs either --config or --table\n";
                return kExitConfig;
            }
        } else if (decide->parsed()) {
            fslink::stage_decide(load(decide_opts));
        } else if (eval->parsed()) {
            fslink::stage_evaluate(load(eval_opts));
        }
    } catch (const fslink::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fslink::StageError& e) {
        std::cerr << "stage failed: " << e.what() << "\n";
        return kExitStage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return kExitOk;
}
