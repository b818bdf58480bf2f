#include "fslink/decision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "fslink/rng.hpp"

namespace fslink {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

WeightTable compute_weights(const MixtureParams& params) {
    params.validate();
    WeightTable table;
    table.q = params.q;
    table.rank_of.assign(pattern_count(params.q), -1);

    struct Cell {
        PatternId g;
        double lw, pi_m;
    };
    std::vector<Cell> cells;
    for (PatternId g = 0; g < params.pi_m.size(); ++g) {
        if (!params.support.contains(g)) continue;
        double m = params.pi_m[g], u = params.pi_u[g];
        if (m == 0.0 && u == 0.0)
            throw std::invalid_argument("support pattern " + pattern_to_string(g, params.q) +
                                        " has zero mass in both components");
        double lw;
        if (u == 0.0) lw = kInf;
        else if (m == 0.0) lw = -kInf;
        else lw = std::log(m) - std::log(u);
        cells.push_back({g, lw, m});
    }
    std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) {
        if (x.lw != y.lw) return x.lw > y.lw;
        if (x.lw == kInf && x.pi_m != y.pi_m) return x.pi_m > y.pi_m;
        return x.g > y.g;
    });
    table.order.reserve(cells.size());
    table.log_weight.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        table.order.push_back(cells[i].g);
        table.log_weight.push_back(cells[i].lw);
        table.rank_of[cells[i].g] = static_cast<std::int32_t>(i + 1);
    }
    return table;
}

double DecisionRule::link_probability(std::size_t rank) const {
    if (n_index == 0) return 0.0;
    if (rank < n_index) return 1.0;
    if (rank == n_index) return r_mu;
    return 0.0;
}

double DecisionRule::achieved_mu() const {
    // accumulate in construction order so the target is recovered exactly
    double total = 0.0;
    for (std::size_t i = 1; i + 1 <= n_index; ++i) total += pi_u_by_rank[i - 1];
    if (n_index >= 1) total += r_mu * pi_u_by_rank[n_index - 1];
    return total;
}

double DecisionRule::achieved_lambda() const {
    double total = 0.0;
    for (std::size_t i = weights.size(); i > nprime_index; --i) total += pi_m_by_rank[i - 1];
    if (nprime_index <= weights.size())
        total += r_lambda * pi_m_by_rank[nprime_index - 1];
    return total;
}

DecisionRule build_rule(const WeightTable& weights, const MixtureParams& params, double mu,
                        double lambda) {
    if (mu < 0.0 || mu > 1.0 || lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("error-rate targets must lie in [0,1]");
    const std::size_t n_patterns = weights.size();
    if (n_patterns == 0) throw std::invalid_argument("empty weight table");

    DecisionRule rule;
    rule.target_mu = mu;
    rule.target_lambda = lambda;
    rule.weights = weights;
    rule.pi_m_by_rank.reserve(n_patterns);
    rule.pi_u_by_rank.reserve(n_patterns);
    for (PatternId g : weights.order) {
        rule.pi_m_by_rank.push_back(params.pi_m[g]);
        rule.pi_u_by_rank.push_back(params.pi_u[g]);
    }

    // top cut: smallest n with cumulative pi_u >= mu
    if (mu == 0.0) {
        rule.n_index = 0;
        rule.r_mu = 0.0;
        rule.t_mu_log = kInf;
    } else {
        double before = 0.0;  // cumulative mass strictly above the cut
        std::size_t n = 0;
        for (std::size_t i = 1; i <= n_patterns; ++i) {
            double next = before + rule.pi_u_by_rank[i - 1];
            if (next >= mu || i == n_patterns) {
                n = i;
                break;
            }
            before = next;
        }
        rule.n_index = n;
        double cell = rule.pi_u_by_rank[n - 1];
        rule.r_mu = cell > 0.0 ? std::min(1.0, (mu - before) / cell) : 1.0;
        rule.t_mu_log = weights.log_weight[n - 1];
    }

    // bottom cut: largest n' with tail pi_m >= lambda
    if (lambda == 0.0) {
        rule.nprime_index = n_patterns + 1;
        rule.r_lambda = 0.0;
        rule.t_lambda_log = -kInf;
    } else {
        double after = 0.0;  // cumulative mass strictly below the cut
        std::size_t np = 1;
        for (std::size_t i = n_patterns; i >= 1; --i) {
            double next = after + rule.pi_m_by_rank[i - 1];
            if (next >= lambda || i == 1) {
                np = i;
                break;
            }
            after = next;
        }
        rule.nprime_index = np;
        double cell = rule.pi_m_by_rank[np - 1];
        rule.r_lambda = cell > 0.0 ? std::min(1.0, (lambda - after) / cell) : 1.0;
        rule.t_lambda_log = weights.log_weight[np - 1];
    }

    if (rule.n_index + 1 > rule.nprime_index) {
        // report the largest lambda compatible with this mu
        double max_lambda = 0.0;
        for (std::size_t i = rule.n_index + 1; i <= n_patterns; ++i)
            max_lambda += rule.pi_m_by_rank[i - 1];
        throw std::invalid_argument(
            "infeasible error-rate pair: with mu=" + std::to_string(mu) +
            " the non-link region admits lambda <= " + std::to_string(max_lambda));
    }
    return rule;
}

std::array<std::size_t, 3> Classification::tally() const {
    std::array<std::size_t, 3> t{0, 0, 0};
    for (Label l : label) ++t[static_cast<std::size_t>(l)];
    return t;
}

Classification classify(const CandidatePairSet& pairs, const DecisionRule& rule,
                        std::uint64_t seed, int threads) {
    if (!pairs.patterns_attached)
        throw std::logic_error("classify requires attached comparison vectors");
    Classification out;
    out.seed = seed;
    std::vector<const CandidatePair*> retained;
    retained.reserve(pairs.pairs.size());
    for (const auto& p : pairs.pairs) {
        if (!p.iota) continue;
        if (rule.weights.rank_of[p.pattern] < 0)
            throw std::invalid_argument("pair pattern " + pattern_to_string(p.pattern, pairs.q) +
                                        " lies outside the rule's support");
        retained.push_back(&p);
    }
    std::size_t n = retained.size();
    out.id_a.resize(n);
    out.id_b.resize(n);
    out.pattern.resize(n);
    out.log_weight.resize(n);
    out.label.resize(n);

    auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const CandidatePair& p = *retained[i];
            auto rank = static_cast<std::size_t>(rule.weights.rank_of[p.pattern]);
            Label label;
            if (rank < rule.n_index || (rank == rule.n_index && rule.r_mu >= 1.0)) {
                label = Label::Link;
            } else if (rank == rule.n_index && rule.r_mu > 0.0 &&
                       pair_uniform(out.seed, p.a, p.b) < rule.r_mu) {
                label = Label::Link;
            } else if (rank > rule.nprime_index ||
                       (rank == rule.nprime_index && rule.r_lambda >= 1.0)) {
                label = Label::NonLink;
            } else if (rank == rule.nprime_index && rule.r_lambda > 0.0 &&
                       pair_uniform(~out.seed, p.a, p.b) < rule.r_lambda) {
                label = Label::NonLink;
            } else {
                label = Label::Review;
            }
            out.id_a[i] = p.a;
            out.id_b[i] = p.b;
            out.pattern[i] = p.pattern;
            out.log_weight[i] = rule.weights.log_weight[rank - 1];
            out.label[i] = label;
        }
    };
    if (threads < 2 || n < 4096) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (n + static_cast<std::size_t>(threads) - 1) /
                            static_cast<std::size_t>(threads);
        for (int t = 0; t < threads; ++t) {
            std::size_t lo = static_cast<std::size_t>(t) * chunk;
            if (lo >= n) break;
            pool.emplace_back(worker, lo, std::min(n, lo + chunk));
        }
        for (auto& th : pool) th.join();
    }
    return out;
}

double scale_mu(double mu_beta, std::uint64_t n_beta, std::uint64_t k_filtered) {
    if (mu_beta < 0.0 || mu_beta > 1.0)
        throw std::invalid_argument("mu must lie in [0,1]");
    if (k_filtered >= n_beta)
        throw std::invalid_argument("k_filtered must be smaller than n_beta");
    return mu_beta * static_cast<double>(n_beta) / static_cast<double>(n_beta - k_filtered);
}

void ClassConditionalJoint::validate() const {
    if (q < 1 || q > 4) throw std::invalid_argument("joint check supports q in [1,4]");
    if (m.size() != pattern_count(q) || u.size() != pattern_count(q))
        throw std::invalid_argument("joint must hold 2^q cells");
    double sm = 0.0, su = 0.0;
    for (PatternId g = 0; g < m.size(); ++g) {
        for (int f = 0; f < 2; ++f) {
            if (m[g][f] < 0.0 || u[g][f] < 0.0)
                throw std::invalid_argument("joint probabilities must be >= 0");
            sm += m[g][f];
            su += u[g][f];
        }
    }
    if (std::abs(sm - 1.0) > 1e-9 || std::abs(su - 1.0) > 1e-9)
        throw std::invalid_argument("each class joint must sum to 1");
}

WeightRelationResult weight_relation_check(const ClassConditionalJoint& joint) {
    joint.validate();
    const std::uint32_t n_cells = pattern_count(joint.q);

    double iota_m = 0.0, iota_u = 0.0;  // P(iota=1 | class)
    for (PatternId g = 0; g < n_cells; ++g) {
        iota_m += joint.m[g][1];
        iota_u += joint.u[g][1];
    }

    WeightRelationResult result;
    for (PatternId g = 0; g < n_cells; ++g) {
        WeightRelationRow row;
        row.pattern = g;
        double pm = joint.m[g][0] + joint.m[g][1];
        double pu = joint.u[g][0] + joint.u[g][1];
        double pm_iota = iota_m > 0.0 ? joint.m[g][1] / iota_m : 0.0;
        double pu_iota = iota_u > 0.0 ? joint.u[g][1] / iota_u : 0.0;
        if (pu == 0.0 || pu_iota == 0.0 || iota_m == 0.0 || iota_u == 0.0) {
            row.excluded = true;
            result.rows.push_back(row);
            continue;
        }
        row.w_beta = pm / pu;
        row.w_beta_iota = pm_iota / pu_iota;
        // selection factor is P(iota|g,M)/P(iota|g,U); undefined when the
        // pattern has no mass under M (w_beta = 0 and both sides vanish)
        double sel_m = pm > 0.0 ? joint.m[g][1] / pm : 0.0;
        double sel_u = joint.u[g][1] / pu;
        if (sel_u == 0.0) {
            row.excluded = true;
            result.rows.push_back(row);
            continue;
        }
        row.factor_selection = pm > 0.0 ? sel_m / sel_u : 0.0;
        row.factor_class = iota_u / iota_m;
        row.rhs = row.w_beta * row.factor_selection * row.factor_class;
        result.rows.push_back(row);
    }

    // no strict inversion between the two weight orders over included rows
    result.rank_order_preserved = true;
    for (std::size_t i = 0; i < result.rows.size() && result.rank_order_preserved; ++i) {
        if (result.rows[i].excluded) continue;
        for (std::size_t j = 0; j < result.rows.size(); ++j) {
            if (result.rows[j].excluded) continue;
            if (result.rows[i].w_beta > result.rows[j].w_beta &&
                result.rows[i].w_beta_iota < result.rows[j].w_beta_iota) {
                result.rank_order_preserved = false;
                break;
            }
        }
    }
    return result;
}

namespace {

nlohmann::json weight_entry(double lw) {
    if (std::isinf(lw)) return lw > 0 ? "inf" : "-inf";
    return lw;
}

double weight_from_json(const nlohmann::json& j) {
    if (j.is_string()) return j.get<std::string>() == "inf" ? kInf : -kInf;
    return j.get<double>();
}

}  // namespace

void write_rule_json(const std::string& path, const DecisionRule& rule) {
    nlohmann::json j;
    j["target_mu"] = rule.target_mu;
    j["target_lambda"] = rule.target_lambda;
    j["n_index"] = rule.n_index;
    j["nprime_index"] = rule.nprime_index;
    j["r_mu"] = rule.r_mu;
    j["r_lambda"] = rule.r_lambda;
    j["t_mu_log"] = weight_entry(rule.t_mu_log);
    j["t_lambda_log"] = weight_entry(rule.t_lambda_log);
    j["q"] = rule.weights.q;
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t i = 0; i < rule.weights.size(); ++i) {
        cells.push_back({{"pattern", pattern_to_string(rule.weights.order[i], rule.weights.q)},
                         {"log_weight", weight_entry(rule.weights.log_weight[i])},
                         {"pi_m", rule.pi_m_by_rank[i]},
                         {"pi_u", rule.pi_u_by_rank[i]}});
    }
    j["ordering"] = cells;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << j.dump(2) << '\n';
}

DecisionRule read_rule_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    nlohmann::json j;
    in >> j;
    DecisionRule rule;
    rule.target_mu = j.at("target_mu").get<double>();
    rule.target_lambda = j.at("target_lambda").get<double>();
    rule.n_index = j.at("n_index").get<std::size_t>();
    rule.nprime_index = j.at("nprime_index").get<std::size_t>();
    rule.r_mu = j.at("r_mu").get<double>();
    rule.r_lambda = j.at("r_lambda").get<double>();
    rule.t_mu_log = weight_from_json(j.at("t_mu_log"));
    rule.t_lambda_log = weight_from_json(j.at("t_lambda_log"));
    int q = j.at("q").get<int>();
    rule.weights.q = q;
    rule.weights.rank_of.assign(pattern_count(q), -1);
    for (const auto& cell : j.at("ordering")) {
        PatternId g = pattern_from_string(cell.at("pattern").get<std::string>());
        rule.weights.order.push_back(g);
        rule.weights.log_weight.push_back(weight_from_json(cell.at("log_weight")));
        rule.weights.rank_of[g] = static_cast<std::int32_t>(rule.weights.order.size());
        rule.pi_m_by_rank.push_back(cell.at("pi_m").get<double>());
        rule.pi_u_by_rank.push_back(cell.at("pi_u").get<double>());
    }
    return rule;
}

const char* label_name(Label label) {
    switch (label) {
        case Label::Link: return "A1";
        case Label::Review: return "A2";
        default: return "A3";
    }
}

void write_classification_csv(const std::string& path, const Classification& cls, int q) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "id_a,id_b,pattern,log_weight,label\n";
    for (std::size_t i = 0; i < cls.label.size(); ++i) {
        out << cls.id_a[i] << ',' << cls.id_b[i] << ',' << pattern_to_string(cls.pattern[i], q)
            << ',' << cls.log_weight[i] << ',' << label_name(cls.label[i]) << '\n';
    }
}

}  // namespace fslink
