#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fslink/estimation.hpp"

namespace fslink {

/// Support patterns ordered by decreasing match weight pi_m/pi_u (kept in
/// log space; +inf when pi_u = 0). Ties break toward the numerically larger
/// pattern so the order is total and deterministic.
struct WeightTable {
    int q = 0;
    std::vector<PatternId> order;       // rank -> pattern
    std::vector<double> log_weight;     // aligned with order, non-increasing
    std::vector<std::int32_t> rank_of;  // pattern -> rank, -1 off support

    std::size_t size() const { return order.size(); }
};

WeightTable compute_weights(const MixtureParams& params);

/// Three-way rule with exact error-rate control. Ranks below n_index join
/// the link region A1; the boundary pattern at n_index joins with
/// probability r_mu (and symmetrically for non-links from the bottom).
/// Indices are 1-based; n_index = 0 means A1 is empty and
/// nprime_index = size+1 means A3 is empty.
struct DecisionRule {
    double target_mu = 0.0, target_lambda = 0.0;
    std::size_t n_index = 0, nprime_index = 0;
    double r_mu = 0.0, r_lambda = 0.0;
    double t_mu_log = 0.0, t_lambda_log = 0.0;  // threshold log-weights
    WeightTable weights;
    std::vector<double> pi_m_by_rank, pi_u_by_rank;

    // model error rates implied by the rule (equal the targets)
    double achieved_mu() const;
    double achieved_lambda() const;
    // expected A1 probability for the pattern at a given rank (1-based)
    double link_probability(std::size_t rank) const;
};

/// Builds the rule for the requested error rates; throws when the link and
/// non-link regions would be forced to overlap, naming the feasible region.
DecisionRule build_rule(const WeightTable& weights, const MixtureParams& params, double mu,
                        double lambda);

enum class Label : std::uint8_t { Link, Review, NonLink };

struct Classification {
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> id_a, id_b;
    std::vector<PatternId> pattern;
    std::vector<double> log_weight;
    std::vector<Label> label;

    std::array<std::size_t, 3> tally() const;
};

/// Classifies retained pairs. Boundary draws use a counter-based generator
/// keyed on (seed, id_a, id_b), so results do not depend on thread
/// schedule.
Classification classify(const CandidatePairSet& pairs, const DecisionRule& rule,
                        std::uint64_t seed, int threads = 1);

/// Error-rate rescaling for filtered pipelines: the rate that keeps the
/// expected number of false matches equal when k_filtered of n_beta pairs
/// were discarded.
double scale_mu(double mu_beta, std::uint64_t n_beta, std::uint64_t k_filtered);

/// Fully specified joint distribution of (pattern, survives-filter flag)
/// given each class, for checking the weight decomposition on small q.
struct ClassConditionalJoint {
    int q = 0;
    // [pattern][flag] -> probability given the class; each class sums to 1
    std::vector<std::array<double, 2>> m, u;

    void validate() const;
};

struct WeightRelationRow {
    PatternId pattern = 0;
    bool excluded = false;  // zero denominator
    double w_beta = 0.0;
    double w_beta_iota = 0.0;      // left side, from conditional distributions
    double factor_selection = 0.0;  // P(iota=1 | g, M) / P(iota=1 | g, U)
    double factor_class = 0.0;      // P(iota=1 | U) / P(iota=1 | M)
    double rhs = 0.0;               // w_beta * selection * class factors
};

struct WeightRelationResult {
    std::vector<WeightRelationRow> rows;
    bool rank_order_preserved = false;  // over included patterns
};

WeightRelationResult weight_relation_check(const ClassConditionalJoint& joint);

void write_rule_json(const std::string& path, const DecisionRule& rule);
DecisionRule read_rule_json(const std::string& path);
void write_classification_csv(const std::string& path, const Classification& cls, int q);

const char* label_name(Label label);

}  // namespace fslink
