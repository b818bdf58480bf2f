#include "fslink/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "fslink/csv.hpp"
#include "fslink/rng.hpp"

namespace fslink {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string stage_path(const PipelineConfig& config, const char* name) {
    return (fs::path(config.out_dir) / name).string();
}

void ensure_out_dir(const PipelineConfig& config) {
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) throw StageError("setup", "cannot create output directory " + config.out_dir);
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << j.dump(2) << '\n';
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    json j;
    in >> j;
    return j;
}

// progressive stage bookkeeping so interrupted runs leave a usable trail
void mark_stage(const PipelineConfig& config, const std::string& stage,
                const std::string& status, const std::string& error = "") {
    json manifest;
    std::string path = stage_path(config, "MANIFEST.json");
    if (fs::exists(path)) {
        try {
            manifest = read_json_file(path);
        } catch (...) {
            manifest = json::object();
        }
    }
    manifest["stages"][stage] = status;
    if (!error.empty()) manifest["error"] = {{"stage", stage}, {"message", error}};
    write_json_file(path, manifest);
}

FieldKind kind_from_string(const std::string& s) {
    if (s == "string") return FieldKind::String;
    if (s == "categorical") return FieldKind::Categorical;
    if (s == "integer") return FieldKind::Integer;
    throw ConfigError("unknown field kind '" + s + "'");
}

KeyExtractor::Transform transform_from_string(const std::string& s) {
    if (s == "identity") return KeyExtractor::Transform::Identity;
    if (s == "first_chars") return KeyExtractor::Transform::FirstChars;
    if (s == "last_chars") return KeyExtractor::Transform::LastChars;
    throw ConfigError("unknown key transform '" + s + "'");
}

}  // namespace

void PipelineConfig::validate() const {
    if (model != "ci" && model != "qci") throw ConfigError("model must be 'ci' or 'qci'");
    if (model == "ci" && plan.filter.has_value())
        throw ConfigError(
            "model 'ci' assumes full pattern support and cannot run with a filter; "
            "use model 'qci' for filtered pipelines");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    bool has_csv = input.csv_path.has_value();
    bool has_gen = input.generator.has_value();
    if (has_csv == has_gen)
        throw ConfigError("input needs exactly one of a csv path or a generator spec");
    if (input.csv_path_b && !has_csv) throw ConfigError("second input file without a first");
    if (comparators.empty()) throw ConfigError("at least one comparator required");
    if (comparators.size() > kMaxComparisons)
        throw ConfigError("at most " + std::to_string(kMaxComparisons) + " comparators");
    if (plan.passes.empty()) throw ConfigError("at least one blocking pass required");
    if (decision.mu < 0 || decision.mu > 1 || decision.lambda < 0 || decision.lambda > 1)
        throw ConfigError("decision targets must lie in [0,1]");
    if (em.max_iter < 1 || em.tol <= 0) throw ConfigError("em: max_iter >= 1 and tol > 0");
    try {
        schema.validate();
        validate_specs(comparators, schema);
        for (const auto& key : plan.passes) key.validate(schema);
        if (plan.filter) derive_support(*plan.filter, static_cast<int>(comparators.size()));
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    for (auto [i, j] : chi2_pairs)
        if (i < 0 || j < 0 || i >= static_cast<int>(comparators.size()) ||
            j >= static_cast<int>(comparators.size()))
            throw ConfigError("chi2 diagnostic names an unknown comparator");
}

PipelineConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    PipelineConfig config;
    try {
        config.seed = j.value("seed", std::uint64_t{1});
        config.threads = j.value("threads", 1);
        config.out_dir = j.value("out", std::string("out"));

        const auto& input = j.at("input");
        if (input.contains("csv")) config.input.csv_path = input.at("csv").get<std::string>();
        if (input.contains("csv_b")) config.input.csv_path_b = input.at("csv_b").get<std::string>();
        if (input.contains("generate")) {
            const auto& gen = input.at("generate");
            GeneratorSpec spec;
            spec.n_base = gen.at("n_base").get<std::size_t>();
            spec.corruption.duplicate_fraction = gen.value("duplicate_fraction", 0.1);
            if (gen.contains("field_probs"))
                spec.corruption.field_probs = gen.at("field_probs").get<std::vector<double>>();
            config.input.generator = spec;
        }
        std::string delim = input.value("delimiter", std::string(","));
        if (delim.size() != 1) throw ConfigError("delimiter must be one character");
        config.input.csv_options.delimiter = delim[0];
        config.input.csv_options.header = input.value("header", true);
        config.input.csv_options.na_marker = input.value("na", std::string("NA"));
        if (input.contains("truth_csv"))
            config.input.truth_csv = input.at("truth_csv").get<std::string>();
        if (input.contains("identity_csv"))
            config.input.identity_csv = input.at("identity_csv").get<std::string>();

        if (j.contains("schema")) {
            for (const auto& f : j.at("schema")) {
                config.schema.fields.push_back(
                    {f.at("name").get<std::string>(),
                     kind_from_string(f.value("kind", std::string("string")))});
            }
        } else if (config.input.generator) {
            config.schema = person_schema();
        } else {
            throw ConfigError("schema required for csv input");
        }

        for (const auto& c : j.at("comparators")) {
            ComparatorSpec spec;
            std::string field = c.at("field").get<std::string>();
            spec.field_index = config.schema.index_of(field);
            std::string kind = c.value("kind", std::string("exact"));
            if (kind == "exact") {
                spec.kind = ComparatorSpec::Kind::Exact;
            } else if (kind == "jaro_winkler") {
                spec.kind = ComparatorSpec::Kind::JaroWinklerThreshold;
                spec.threshold = c.value("threshold", 0.9);
            } else {
                throw ConfigError("unknown comparator kind '" + kind + "'");
            }
            config.comparators.push_back(spec);
            config.comparator_names.push_back(c.value("name", field));
        }

        for (const auto& pass : j.at("blocking")) {
            BlockingKey key;
            for (const auto& e : pass) {
                KeyExtractor ex;
                ex.field_index = config.schema.index_of(e.at("field").get<std::string>());
                ex.transform = transform_from_string(e.value("transform", std::string("identity")));
                ex.k = e.value("k", 1);
                key.extractors.push_back(ex);
            }
            config.plan.passes.push_back(std::move(key));
        }

        if (j.contains("filter") && !j.at("filter").is_null()) {
            const auto& f = j.at("filter");
            FilterPredicate pred;
            std::string kind = f.at("kind").get<std::string>();
            if (kind == "min_agreements") {
                pred.kind = FilterPredicate::Kind::MinAgreements;
                pred.min_agreements = f.at("k").get<int>();
            } else if (kind == "log_ratio_cutoff") {
                pred.kind = FilterPredicate::Kind::LogRatioCutoff;
                pred.cutoff = f.at("cutoff").get<double>();
                pred.m_probs = f.at("m_probs").get<std::vector<double>>();
                pred.u_probs = f.at("u_probs").get<std::vector<double>>();
            } else if (kind == "patterns") {
                pred.kind = FilterPredicate::Kind::ExplicitPatterns;
                for (const auto& p : f.at("patterns"))
                    pred.patterns.push_back(pattern_from_string(p.get<std::string>()));
            } else {
                throw ConfigError("unknown filter kind '" + kind + "'");
            }
            config.plan.filter = std::move(pred);
        }

        config.model = j.value("model", std::string("qci"));
        if (j.contains("em")) {
            const auto& em = j.at("em");
            config.em.max_iter = em.value("max_iter", 1000);
            config.em.tol = em.value("tol", 1e-6);
            config.em.restarts = em.value("restarts", 1);
        }
        config.em.seed = derive_seed(config.seed, 0x656dULL);

        if (j.contains("decision")) {
            const auto& d = j.at("decision");
            config.decision.mu = d.value("mu", 0.001);
            config.decision.lambda = d.value("lambda", 0.001);
            config.decision.scale_mu_for_filter = d.value("scale_mu_for_filter", false);
        }

        if (j.contains("diagnostics") && j.at("diagnostics").contains("chi2")) {
            for (const auto& pair : j.at("diagnostics").at("chi2")) {
                std::string a = pair.at(0).get<std::string>();
                std::string b = pair.at(1).get<std::string>();
                int ia = -1, ib = -1;
                for (std::size_t i = 0; i < config.comparator_names.size(); ++i) {
                    if (config.comparator_names[i] == a) ia = static_cast<int>(i);
                    if (config.comparator_names[i] == b) ib = static_cast<int>(i);
                }
                if (ia < 0 || ib < 0)
                    throw ConfigError("chi2 diagnostic names an unknown comparator");
                config.chi2_pairs.emplace_back(ia, ib);
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    config.validate();
    return config;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_json(text);
}

namespace {

RecordStore load_primary_store(const PipelineConfig& config) {
    if (config.input.generator)
        return load_csv(stage_path(config, "records.csv"), config.schema, config.input.csv_options);
    return load_csv(*config.input.csv_path, config.schema, config.input.csv_options);
}

std::optional<GroundTruth> load_truth(const PipelineConfig& config) {
    if (config.input.generator) {
        std::string path = stage_path(config, "truth.csv");
        if (fs::exists(path)) return load_truth_csv(path);
        return std::nullopt;
    }
    if (config.input.truth_csv) return load_truth_csv(*config.input.truth_csv);
    if (config.input.identity_csv)
        return truth_from_identity_csv(*config.input.identity_csv,
                                       config.input.csv_options.header);
    return std::nullopt;
}

}  // namespace

void stage_generate(const PipelineConfig& config) {
    ensure_out_dir(config);
    try {
        if (!config.input.generator) {
            mark_stage(config, "generate", "skipped");
            return;
        }
        const auto& spec = *config.input.generator;
        auto [store, truth] = generate_corpus(spec.n_base, spec.corruption,
                                              derive_seed(config.seed, 0x67656eULL));
        write_csv(stage_path(config, "records.csv"), store, config.input.csv_options);
        write_truth_csv(stage_path(config, "truth.csv"), truth);
        mark_stage(config, "generate", "complete");
    } catch (const std::exception& e) {
        mark_stage(config, "generate", "failed", e.what());
        throw StageError("generate", e.what());
    }
}

void stage_index(const PipelineConfig& config) {
    ensure_out_dir(config);
    try {
        RecordStore store = load_primary_store(config);
        CandidatePairSet pairs;
        std::uint64_t all_pairs = 0;
        if (config.input.csv_path_b) {
            RecordStore store_b =
                load_csv(*config.input.csv_path_b, config.schema, config.input.csv_options);
            pairs = union_passes(store, store_b, config.plan);
            attach_patterns(pairs, store, store_b, config.comparators, config.threads);
            all_pairs = static_cast<std::uint64_t>(store.size()) * store_b.size();
        } else {
            pairs = union_passes(store, config.plan);
            attach_patterns(pairs, store, config.comparators, config.threads);
            all_pairs = static_cast<std::uint64_t>(store.size()) * (store.size() - 1) / 2;
        }
        if (config.plan.filter) apply_filter(pairs, *config.plan.filter);

        ContingencyTable table = tabulate(pairs, config.threads);
        write_pairs_csv(stage_path(config, "pairs.csv"), pairs);
        write_table_csv(stage_path(config, "contingency.csv"), table);

        json summary;
        summary["n_records"] = store.size();
        summary["n_all_pairs"] = all_pairs;
        summary["n_blocked"] = pairs.n_blocked;
        summary["n_filtered"] = pairs.n_filtered;
        summary["k_excluded"] = pairs.excluded_by_filter();
        summary["q"] = pairs.q;
        summary["support_size"] = pairs.support.count();
        write_json_file(stage_path(config, "index_summary.json"), summary);
        mark_stage(config, "index", "complete");
    } catch (const std::exception& e) {
        mark_stage(config, "index", "failed", e.what());
        throw StageError("index", e.what());
    }
}

void stage_fit(const PipelineConfig& config) {
    ensure_out_dir(config);
    try {
        ContingencyTable table = read_table_csv(stage_path(config, "contingency.csv"));
        MixtureParams params;
        EmTrace trace;
        if (config.model == "ci") {
            CIFit fit = fit_ci_em(table, config.em);
            params = std::move(fit.params);
            trace = std::move(fit.trace);
        } else {
            QCIFit fit = fit_qci_em(table, config.em);
            params = std::move(fit.params);
            trace = std::move(fit.trace);
        }
        write_params_json(stage_path(config, "params.json"), params);
        write_params_csv(stage_path(config, "params.csv"), params);
        write_trace_csv(stage_path(config, "trace.csv"), trace);

        json summary;
        summary["model"] = config.model;
        summary["p_match"] = params.p_match;
        summary["iterations"] = trace.iterations;
        summary["converged"] = trace.converged;
        summary["loglik"] = trace.loglik.back();
        write_json_file(stage_path(config, "fit_summary.json"), summary);
        mark_stage(config, "fit", "complete");
    } catch (const std::exception& e) {
        mark_stage(config, "fit", "failed", e.what());
        throw StageError("fit", e.what());
    }
}

void stage_decide(const PipelineConfig& config) {
    ensure_out_dir(config);
    try {
        MixtureParams params = read_params_json(stage_path(config, "params.json"));
        json index_summary = read_json_file(stage_path(config, "index_summary.json"));
        CandidatePairSet pairs =
            read_pairs_csv(stage_path(config, "pairs.csv"), params.q);

        double mu = config.decision.mu;
        if (config.decision.scale_mu_for_filter) {
            auto n_blocked = index_summary.at("n_blocked").get<std::uint64_t>();
            auto k = index_summary.at("k_excluded").get<std::uint64_t>();
            mu = scale_mu(mu, n_blocked, k);
        }

        WeightTable weights = compute_weights(params);
        DecisionRule rule = build_rule(weights, params, mu, config.decision.lambda);
        Classification cls =
            classify(pairs, rule, derive_seed(config.seed, 0x636c73ULL), config.threads);

        write_rule_json(stage_path(config, "rule.json"), rule);
        write_classification_csv(stage_path(config, "classifications.csv"), cls, params.q);

        auto tally = cls.tally();
        json summary;
        summary["target_mu"] = config.decision.mu;
        summary["effective_mu"] = mu;
        summary["target_lambda"] = config.decision.lambda;
        summary["n_index"] = rule.n_index;
        summary["nprime_index"] = rule.nprime_index;
        summary["r_mu"] = rule.r_mu;
        summary["r_lambda"] = rule.r_lambda;
        summary["n_link"] = tally[0];
        summary["n_review"] = tally[1];
        summary["n_nonlink"] = tally[2];
        write_json_file(stage_path(config, "decide_summary.json"), summary);
        mark_stage(config, "decide", "complete");
    } catch (const std::exception& e) {
        mark_stage(config, "decide", "failed", e.what());
        throw StageError("decide", e.what());
    }
}

void stage_evaluate(const PipelineConfig& config) {
    ensure_out_dir(config);
    try {
        MixtureParams params = read_params_json(stage_path(config, "params.json"));
        CandidatePairSet pairs = read_pairs_csv(stage_path(config, "pairs.csv"), params.q);
        DecisionRule rule = read_rule_json(stage_path(config, "rule.json"));
        std::optional<GroundTruth> truth = load_truth(config);

        json summary;
        summary["nominal_mu"] = rule.achieved_mu();
        summary["nominal_lambda"] = rule.achieved_lambda();

        if (truth) {
            TrueErrorRates rates = true_error_rates(pairs, *truth, rule);
            if (rates.mu) summary["true_mu"] = *rates.mu;
            if (rates.lambda) summary["true_lambda"] = *rates.lambda;
            summary["n_match_pairs"] = rates.n_match_pairs;
            summary["n_nonmatch_pairs"] = rates.n_nonmatch_pairs;

            std::string condition = config.model + (config.plan.filter ? "_filtered" : "_blocked");
            CalibrationCurve curve = calibration_sweep(pairs, *truth, params, condition);
            write_calibration_csv(stage_path(config, "calibration.csv"), {curve});
            DiscrepancySeries series = discrepancy_series(pairs, *truth, params,
                                                          config.comparator_names, condition);
            write_discrepancy_csv(stage_path(config, "discrepancy.csv"), {series});

            json chi2 = json::array();
            for (auto [i, j] : config.chi2_pairs) {
                Chi2Result r = chi2_independence(pairs, *truth, i, j);
                chi2.push_back({{"comparators",
                                 {config.comparator_names[static_cast<std::size_t>(i)],
                                  config.comparator_names[static_cast<std::size_t>(j)]}},
                                {"statistic", r.statistic},
                                {"dof", r.dof},
                                {"degenerate", r.degenerate}});
            }
            if (!chi2.empty()) summary["chi2"] = chi2;
        } else {
            summary["note"] = "no ground truth supplied; nominal rates only";
        }
        write_json_file(stage_path(config, "eval_summary.json"), summary);
        mark_stage(config, "evaluate", "complete");
    } catch (const std::exception& e) {
        mark_stage(config, "evaluate", "failed", e.what());
        throw StageError("evaluate", e.what());
    }
}

void run_pipeline(const PipelineConfig& config) {
    config.validate();
    ensure_out_dir(config);
    stage_generate(config);
    stage_index(config);
    stage_fit(config);
    stage_decide(config);
    stage_evaluate(config);

    // roll the per-stage summaries into one document
    json summary;
    summary["seed"] = config.seed;
    summary["index"] = read_json_file(stage_path(config, "index_summary.json"));
    summary["fit"] = read_json_file(stage_path(config, "fit_summary.json"));
    summary["decide"] = read_json_file(stage_path(config, "decide_summary.json"));
    summary["evaluate"] = read_json_file(stage_path(config, "eval_summary.json"));
    write_json_file(stage_path(config, "summary.json"), summary);
    mark_stage(config, "summary", "complete");
}

void fit_table_file(const std::string& table_csv, const std::string& model, const EmConfig& em,
                    const std::string& out_dir) {
    if (model != "ci" && model != "qci") throw ConfigError("model must be 'ci' or 'qci'");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    ContingencyTable table = read_table_csv(table_csv);
    MixtureParams params;
    EmTrace trace;
    try {
        if (model == "ci") {
            CIFit fit = fit_ci_em(table, em);
            params = std::move(fit.params);
            trace = std::move(fit.trace);
        } else {
            QCIFit fit = fit_qci_em(table, em);
            params = std::move(fit.params);
            trace = std::move(fit.trace);
        }
    } catch (const std::exception& e) {
        throw StageError("fit", e.what());
    }
    write_params_json((fs::path(out_dir) / "params.json").string(), params);
    write_params_csv((fs::path(out_dir) / "params.csv").string(), params);
    write_trace_csv((fs::path(out_dir) / "trace.csv").string(), trace);
    json summary;
    summary["model"] = model;
    summary["p_match"] = params.p_match;
    summary["iterations"] = trace.iterations;
    summary["converged"] = trace.converged;
    summary["loglik"] = trace.loglik.back();
    write_json_file((fs::path(out_dir) / "fit_summary.json").string(), summary);
}

}  // namespace fslink
