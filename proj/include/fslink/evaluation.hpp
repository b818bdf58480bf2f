#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fslink/decision.hpp"

namespace fslink {

struct TrueErrorRates {
    std::optional<double> mu;      // unset when no retained non-match pairs exist
    std::optional<double> lambda;  // unset when no retained match pairs exist
    std::size_t n_match_pairs = 0, n_nonmatch_pairs = 0;
};

/// Empirical error rates conditional on the retained pair set, taking the
/// analytic expectation over boundary randomization.
TrueErrorRates true_error_rates(const CandidatePairSet& pairs, const GroundTruth& truth,
                                const DecisionRule& rule);

struct CalibrationPoint {
    double nominal = 0.0;  // model false-match rate at a threshold change
    double actual = 0.0;   // empirical rate on the retained pairs
};

struct CalibrationCurve {
    std::string condition;
    std::vector<CalibrationPoint> points;  // nominal strictly increasing
};

/// Sweeps the nominal rate over every threshold-change point (the
/// cumulative pi_u partial sums along the weight order) and records the
/// rate actually realized on the ground truth.
CalibrationCurve calibration_sweep(const CandidatePairSet& pairs, const GroundTruth& truth,
                                   const MixtureParams& params, const std::string& condition);

struct DiscrepancyStep {
    PatternId pattern = 0;
    std::string label;      // agreeing comparator names, '+'-joined
    double nominal = 0.0;
    double actual = 0.0;
    bool defined = false;   // actual > 0
    double discrepancy = 0.0;  // |nominal - actual| / actual when defined
};

struct DiscrepancySeries {
    std::string condition;
    int q = 0;
    std::vector<DiscrepancyStep> steps;  // one per pattern added to the link region
};

DiscrepancySeries discrepancy_series(const CandidatePairSet& pairs, const GroundTruth& truth,
                                     const MixtureParams& params,
                                     const std::vector<std::string>& comparator_names,
                                     const std::string& condition);

struct SeriesComparison {
    bool comparable = false;     // shared patterns keep the same rank order
    bool pointwise_leq = false;  // first series <= second wherever both defined
    std::size_t n_shared = 0;
};

/// Compares two discrepancy series over the patterns they share (walked in
/// the first series' weight order).
SeriesComparison compare_discrepancies(const DiscrepancySeries& a, const DiscrepancySeries& b);

struct Chi2Result {
    double statistic = 0.0;
    int dof = 1;
    bool degenerate = false;  // a margin was empty
};

/// Pearson chi-squared test of independence between two agreement bits
/// among truly matching retained pairs.
Chi2Result chi2_independence(const CandidatePairSet& pairs, const GroundTruth& truth,
                             int comparator_i, int comparator_j);

void write_calibration_csv(const std::string& path, const std::vector<CalibrationCurve>& curves);
void write_discrepancy_csv(const std::string& path, const std::vector<DiscrepancySeries>& series);

}  // namespace fslink
