#include "fslink/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "fslink/csv.hpp"

namespace fslink {

namespace {

// counts of retained pairs per (rank, is-match), rank 1-based along the
// weight order
struct RankCounts {
    std::vector<double> match, nonmatch;
    double n_match = 0.0, n_nonmatch = 0.0;
};

RankCounts tally_by_rank(const CandidatePairSet& pairs, const GroundTruth& truth,
                         const WeightTable& weights) {
    RankCounts rc;
    rc.match.assign(weights.size() + 1, 0.0);
    rc.nonmatch.assign(weights.size() + 1, 0.0);
    for (const auto& p : pairs.pairs) {
        if (!p.iota) continue;
        auto rank = weights.rank_of[p.pattern];
        if (rank < 0)
            throw std::invalid_argument("retained pair pattern " +
                                        pattern_to_string(p.pattern, pairs.q) +
                                        " lies outside the model support");
        bool is_match = truth.contains(p.a, p.b);
        auto& slot = is_match ? rc.match : rc.nonmatch;
        slot[static_cast<std::size_t>(rank)] += 1.0;
        (is_match ? rc.n_match : rc.n_nonmatch) += 1.0;
    }
    return rc;
}

}  // namespace

TrueErrorRates true_error_rates(const CandidatePairSet& pairs, const GroundTruth& truth,
                                const DecisionRule& rule) {
    RankCounts rc = tally_by_rank(pairs, truth, rule.weights);
    TrueErrorRates rates;
    rates.n_match_pairs = static_cast<std::size_t>(rc.n_match);
    rates.n_nonmatch_pairs = static_cast<std::size_t>(rc.n_nonmatch);

    if (rc.n_nonmatch > 0.0) {
        double expected_links = 0.0;
        for (std::size_t r = 1; r <= rule.weights.size(); ++r)
            expected_links += rc.nonmatch[r] * rule.link_probability(r);
        rates.mu = expected_links / rc.n_nonmatch;
    }
    if (rc.n_match > 0.0) {
        double expected_nonlinks = 0.0;
        for (std::size_t r = 1; r <= rule.weights.size(); ++r) {
            double p_nonlink = 0.0;
            if (r > rule.nprime_index) p_nonlink = 1.0;
            else if (r == rule.nprime_index) p_nonlink = rule.r_lambda;
            expected_nonlinks += rc.match[r] * p_nonlink;
        }
        rates.lambda = expected_nonlinks / rc.n_match;
    }
    return rates;
}

CalibrationCurve calibration_sweep(const CandidatePairSet& pairs, const GroundTruth& truth,
                                   const MixtureParams& params, const std::string& condition) {
    WeightTable weights = compute_weights(params);
    RankCounts rc = tally_by_rank(pairs, truth, weights);
    if (rc.n_nonmatch == 0.0)
        throw std::invalid_argument("calibration needs at least one retained non-match pair");

    CalibrationCurve curve;
    curve.condition = condition;
    curve.points.push_back({0.0, 0.0});
    double nominal = 0.0, links = 0.0;
    for (std::size_t r = 1; r <= weights.size(); ++r) {
        nominal += params.pi_u[weights.order[r - 1]];
        links += rc.nonmatch[r];
        double actual = links / rc.n_nonmatch;
        // keep nominal strictly increasing: a zero-mass cell extends the
        // previous threshold instead of adding a point
        if (nominal > curve.points.back().nominal)
            curve.points.push_back({nominal, actual});
        else
            curve.points.back().actual = actual;
    }
    return curve;
}

DiscrepancySeries discrepancy_series(const CandidatePairSet& pairs, const GroundTruth& truth,
                                     const MixtureParams& params,
                                     const std::vector<std::string>& comparator_names,
                                     const std::string& condition) {
    if (static_cast<int>(comparator_names.size()) != params.q)
        throw std::invalid_argument("need one comparator name per comparison");
    WeightTable weights = compute_weights(params);
    RankCounts rc = tally_by_rank(pairs, truth, weights);
    if (rc.n_nonmatch == 0.0)
        throw std::invalid_argument("discrepancy series needs retained non-match pairs");

    DiscrepancySeries series;
    series.condition = condition;
    series.q = params.q;
    double nominal = 0.0, links = 0.0;
    for (std::size_t r = 1; r <= weights.size(); ++r) {
        PatternId g = weights.order[r - 1];
        DiscrepancyStep step;
        step.pattern = g;
        for (int j = 0; j < params.q; ++j) {
            if (!pattern_bit(g, j)) continue;
            if (!step.label.empty()) step.label += '+';
            step.label += comparator_names[static_cast<std::size_t>(j)];
        }
        if (step.label.empty()) step.label = "none";
        nominal += params.pi_u[g];
        links += rc.nonmatch[r];
        step.nominal = nominal;
        step.actual = links / rc.n_nonmatch;
        step.defined = step.actual > 0.0;
        if (step.defined) step.discrepancy = std::abs(nominal - step.actual) / step.actual;
        series.steps.push_back(std::move(step));
    }
    return series;
}

SeriesComparison compare_discrepancies(const DiscrepancySeries& a, const DiscrepancySeries& b) {
    std::unordered_map<PatternId, std::size_t> pos_b;
    for (std::size_t i = 0; i < b.steps.size(); ++i) pos_b[b.steps[i].pattern] = i;

    SeriesComparison cmp;
    cmp.comparable = true;
    cmp.pointwise_leq = true;
    std::size_t last_b = 0;
    bool first = true;
    for (const auto& step : a.steps) {
        auto it = pos_b.find(step.pattern);
        if (it == pos_b.end()) continue;
        ++cmp.n_shared;
        if (!first && it->second < last_b) cmp.comparable = false;  // order flipped
        last_b = it->second;
        first = false;
        const auto& other = b.steps[it->second];
        if (step.defined && other.defined && step.discrepancy > other.discrepancy)
            cmp.pointwise_leq = false;
    }
    return cmp;
}

Chi2Result chi2_independence(const CandidatePairSet& pairs, const GroundTruth& truth,
                             int comparator_i, int comparator_j) {
    if (comparator_i < 0 || comparator_j < 0 || comparator_i >= pairs.q ||
        comparator_j >= pairs.q)
        throw std::invalid_argument("comparator index out of range");
    double table[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    double n = 0.0;
    for (const auto& p : pairs.pairs) {
        if (!p.iota) continue;
        if (!truth.contains(p.a, p.b)) continue;
        int bi = pattern_bit(p.pattern, comparator_i) ? 1 : 0;
        int bj = pattern_bit(p.pattern, comparator_j) ? 1 : 0;
        table[bi][bj] += 1.0;
        n += 1.0;
    }
    if (n == 0.0) throw std::invalid_argument("no truly matching pairs in the set");

    Chi2Result result;
    double row0 = table[0][0] + table[0][1], row1 = table[1][0] + table[1][1];
    double col0 = table[0][0] + table[1][0], col1 = table[0][1] + table[1][1];
    if (row0 == 0.0 || row1 == 0.0 || col0 == 0.0 || col1 == 0.0) {
        result.degenerate = true;
        result.statistic = 0.0;
        return result;
    }
    double det = table[0][0] * table[1][1] - table[0][1] * table[1][0];
    result.statistic = n * det * det / (row0 * row1 * col0 * col1);
    return result;
}

void write_calibration_csv(const std::string& path, const std::vector<CalibrationCurve>& curves) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "condition,nominal,actual\n";
    for (const auto& curve : curves)
        for (const auto& pt : curve.points)
            out << curve.condition << ',' << csv::format_double(pt.nominal) << ','
                << csv::format_double(pt.actual) << '\n';
}

void write_discrepancy_csv(const std::string& path, const std::vector<DiscrepancySeries>& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "condition,pattern,label,nominal,actual,defined,discrepancy\n";
    for (const auto& s : series) {
        for (const auto& step : s.steps) {
            out << s.condition << ',' << pattern_to_string(step.pattern, s.q) << ',' << step.label
                << ',' << csv::format_double(step.nominal) << ','
                << csv::format_double(step.actual) << ',' << (step.defined ? 1 : 0) << ','
                << csv::format_double(step.defined ? step.discrepancy : 0.0) << '\n';
        }
    }
}

}  // namespace fslink
