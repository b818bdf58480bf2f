#include "fslink/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "fslink/csv.hpp"
#include "fslink/rng.hpp"

namespace fslink {

namespace {

constexpr double kMarginClamp = 1e-9;   // keeps fitted support cells positive
constexpr double kRhoClamp = 1e-6;      // CI agreement-probability bounds
constexpr double kMixClamp = 1e-12;     // mixing-proportion bounds
constexpr double kIpfTol = 1e-10;
constexpr int kIpfMaxIter = 500;

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// IPF on the main-effects log-linear model over the support. Margins that
// are structurally forced (a slice with no support cells) are skipped. The
// start distribution must be positive exactly on the support.
std::vector<double> ipf_quasi_independence(const std::vector<double>& weighted,
                                           const SupportSet& support,
                                           std::vector<double> pi) {
    const int q = support.q();
    const std::uint32_t n_cells = pattern_count(q);

    double total = 0.0;
    for (PatternId g = 0; g < n_cells; ++g) {
        if (weighted[g] < 0.0)
            throw std::invalid_argument("weighted counts must be nonnegative");
        if (!support.contains(g) && weighted[g] != 0.0)
            throw std::invalid_argument("weighted count in structural-zero cell");
        total += weighted[g];
    }
    if (!(total > 0.0)) throw std::invalid_argument("weighted counts sum to zero");

    std::vector<char> adjustable(static_cast<std::size_t>(q), 0);
    std::vector<double> target1(static_cast<std::size_t>(q), 0.0);
    for (int j = 0; j < q; ++j) {
        bool has1 = false, has0 = false;
        double w1 = 0.0;
        for (PatternId g = 0; g < n_cells; ++g) {
            if (!support.contains(g)) continue;
            if (pattern_bit(g, j)) {
                has1 = true;
                w1 += weighted[g];
            } else {
                has0 = true;
            }
        }
        if (has1 && has0) {
            adjustable[static_cast<std::size_t>(j)] = 1;
            target1[static_cast<std::size_t>(j)] =
                clamp(w1 / total, kMarginClamp, 1.0 - kMarginClamp);
        }
    }

    for (int iter = 0; iter < kIpfMaxIter; ++iter) {
        double max_err = 0.0;
        for (int j = 0; j < q; ++j) {
            if (!adjustable[static_cast<std::size_t>(j)]) continue;
            double f1 = 0.0, f0 = 0.0;
            for (PatternId g = 0; g < n_cells; ++g) {
                if (!support.contains(g)) continue;
                (pattern_bit(g, j) ? f1 : f0) += pi[g];
            }
            double t1 = target1[static_cast<std::size_t>(j)];
            double c1 = t1 / f1, c0 = (1.0 - t1) / f0;
            for (PatternId g = 0; g < n_cells; ++g) {
                if (!support.contains(g)) continue;
                pi[g] *= pattern_bit(g, j) ? c1 : c0;
            }
            max_err = std::max(max_err, std::abs(f1 - t1));
        }
        if (max_err < kIpfTol) break;
    }

    double norm = 0.0;
    for (PatternId g = 0; g < n_cells; ++g)
        if (support.contains(g)) norm += pi[g];
    for (PatternId g = 0; g < n_cells; ++g)
        if (support.contains(g)) pi[g] /= norm;
    return pi;
}

std::vector<double> uniform_on_support(const SupportSet& support) {
    std::vector<double> pi(pattern_count(support.q()), 0.0);
    double w = 1.0 / static_cast<double>(support.count());
    for (PatternId g = 0; g < pi.size(); ++g)
        if (support.contains(g)) pi[g] = w;
    return pi;
}

struct InitState {
    double p;
    std::vector<double> pi_m, pi_u;
};

// Default start: p = 0.1, pi_u from smoothed observed frequencies
// (counts + 2), pi_m a truncated product model with agreement probability
// 0.95 per comparison.
InitState default_init(const ContingencyTable& table) {
    const std::uint32_t n_cells = pattern_count(table.q);
    InitState init;
    init.p = 0.1;
    init.pi_u.assign(n_cells, 0.0);
    init.pi_m.assign(n_cells, 0.0);
    double su = 0.0, sm = 0.0;
    for (PatternId g = 0; g < n_cells; ++g) {
        if (!table.support.contains(g)) continue;
        init.pi_u[g] = static_cast<double>(table.counts[g]) + 2.0;
        su += init.pi_u[g];
        int ones = pattern_ones(g);
        init.pi_m[g] = std::pow(0.95, ones) * std::pow(0.05, table.q - ones);
        sm += init.pi_m[g];
    }
    for (PatternId g = 0; g < n_cells; ++g) {
        init.pi_u[g] /= su;
        init.pi_m[g] /= sm;
    }
    return init;
}

InitState random_init(const ContingencyTable& table, Rng& rng) {
    const std::uint32_t n_cells = pattern_count(table.q);
    InitState init;
    init.p = 0.02 + 0.46 * rng.uniform();
    std::vector<double> rho_m(static_cast<std::size_t>(table.q)),
        rho_u(static_cast<std::size_t>(table.q));
    for (int j = 0; j < table.q; ++j) {
        rho_m[static_cast<std::size_t>(j)] = 0.55 + 0.44 * rng.uniform();
        rho_u[static_cast<std::size_t>(j)] = 0.01 + 0.44 * rng.uniform();
    }
    init.pi_m.assign(n_cells, 0.0);
    init.pi_u.assign(n_cells, 0.0);
    double sm = 0.0, su = 0.0;
    for (PatternId g = 0; g < n_cells; ++g) {
        if (!table.support.contains(g)) continue;
        double pm = 1.0, pu = 1.0;
        for (int j = 0; j < table.q; ++j) {
            bool bit = pattern_bit(g, j);
            pm *= bit ? rho_m[static_cast<std::size_t>(j)] : 1.0 - rho_m[static_cast<std::size_t>(j)];
            pu *= bit ? rho_u[static_cast<std::size_t>(j)] : 1.0 - rho_u[static_cast<std::size_t>(j)];
        }
        init.pi_m[g] = pm;
        init.pi_u[g] = pu;
        sm += pm;
        su += pu;
    }
    for (PatternId g = 0; g < n_cells; ++g) {
        init.pi_m[g] /= sm;
        init.pi_u[g] /= su;
    }
    return init;
}

double mixture_loglik(const ContingencyTable& table, double p, const std::vector<double>& pi_m,
                      const std::vector<double>& pi_u) {
    double ll = 0.0;
    for (PatternId g = 0; g < table.counts.size(); ++g) {
        if (table.counts[g] == 0) continue;
        double mix = p * pi_m[g] + (1.0 - p) * pi_u[g];
        if (mix <= 0.0) return -std::numeric_limits<double>::infinity();
        ll += static_cast<double>(table.counts[g]) * std::log(mix);
    }
    return ll;
}

// max over the support of |delta log(pi_m/pi_u)|
double weight_delta(const SupportSet& support, const std::vector<double>& pm_new,
                    const std::vector<double>& pu_new, const std::vector<double>& pm_old,
                    const std::vector<double>& pu_old) {
    double d = 0.0;
    for (PatternId g = 0; g < pm_new.size(); ++g) {
        if (!support.contains(g)) continue;
        double lr_new = std::log(pm_new[g]) - std::log(pu_new[g]);
        double lr_old = std::log(pm_old[g]) - std::log(pu_old[g]);
        d = std::max(d, std::abs(lr_new - lr_old));
    }
    return d;
}

// Matches agree more than non-matches; enforce that labeling.
template <typename SwapExtra>
void canonicalize_labels(double& p, std::vector<double>& pi_m, std::vector<double>& pi_u,
                         const SupportSet& support, SwapExtra&& swap_extra) {
    double mean_m = 0.0, mean_u = 0.0;
    for (PatternId g = 0; g < pi_m.size(); ++g) {
        if (!support.contains(g)) continue;
        mean_m += pi_m[g] * pattern_ones(g);
        mean_u += pi_u[g] * pattern_ones(g);
    }
    if (mean_m < mean_u) {
        std::swap(pi_m, pi_u);
        p = 1.0 - p;
        swap_extra();
    }
}

struct QciRun {
    double p = 0.0;
    std::vector<double> pi_m, pi_u;
    EmTrace trace;
};

QciRun run_qci(const ContingencyTable& table, const EmConfig& config, InitState init) {
    const double n = static_cast<double>(table.n);
    const std::uint32_t n_cells = pattern_count(table.q);

    double p = init.p;
    std::vector<double> pi_m = std::move(init.pi_m), pi_u = std::move(init.pi_u);
    std::vector<double> nm(n_cells, 0.0), nu(n_cells, 0.0), s(n_cells, 0.0);

    // The trace holds the log-likelihood after each iteration. The starting
    // point is deliberately left out: its smoothed-frequency non-match
    // component lies outside the quasi-independence family, so the first
    // M-step projects into the family and only iterates from there on are
    // comparable (and monotone).
    EmTrace trace;
    trace.converged = false;

    // IPF preserves the interaction structure of its start, so warm starts
    // are only valid once the iterate is itself product-form on the
    // support. The match-side init is; the smoothed-frequency non-match
    // init is not, so its first M-step starts from uniform.
    bool pi_u_is_product_form = false;

    for (int iter = 1; iter <= config.max_iter; ++iter) {
        for (PatternId g = 0; g < n_cells; ++g) {
            if (!table.support.contains(g)) {
                s[g] = nm[g] = nu[g] = 0.0;
                continue;
            }
            double num = p * pi_m[g];
            double den = num + (1.0 - p) * pi_u[g];
            s[g] = num / den;
            double ng = static_cast<double>(table.counts[g]);
            nm[g] = ng * s[g];
            nu[g] = ng - nm[g];
        }
        double sum_m = 0.0;
        for (PatternId g = 0; g < n_cells; ++g) sum_m += nm[g];
        p = clamp(sum_m / n, kMixClamp, 1.0 - kMixClamp);

        std::vector<double> pm_new = ipf_quasi_independence(nm, table.support, pi_m);
        std::vector<double> pu_new = ipf_quasi_independence(
            nu, table.support,
            pi_u_is_product_form ? pi_u : uniform_on_support(table.support));
        pi_u_is_product_form = true;

        double delta = weight_delta(table.support, pm_new, pu_new, pi_m, pi_u);
        pi_m = std::move(pm_new);
        pi_u = std::move(pu_new);
        trace.loglik.push_back(mixture_loglik(table, p, pi_m, pi_u));
        trace.iterations = iter;
        if (delta < config.tol) {
            trace.converged = true;
            break;
        }
    }
    trace.posterior_match = std::move(s);
    return {p, std::move(pi_m), std::move(pi_u), std::move(trace)};
}

struct CiRun {
    double p = 0.0;
    std::vector<double> pi_m, pi_u, rho_m, rho_u;
    EmTrace trace;
};

CiRun run_ci(const ContingencyTable& table, const EmConfig& config, InitState init) {
    const int q = table.q;
    const double n = static_cast<double>(table.n);
    const std::uint32_t n_cells = pattern_count(q);

    double p = init.p;
    std::vector<double> pi_m = std::move(init.pi_m), pi_u = std::move(init.pi_u);
    std::vector<double> rho_m(static_cast<std::size_t>(q), 0.0),
        rho_u(static_cast<std::size_t>(q), 0.0);
    std::vector<double> nm(n_cells, 0.0), nu(n_cells, 0.0), s(n_cells, 0.0);

    // as in the restricted fitter, the trace starts at the first in-family
    // iterate rather than at the raw starting point
    EmTrace trace;
    trace.converged = false;

    for (int iter = 1; iter <= config.max_iter; ++iter) {
        for (PatternId g = 0; g < n_cells; ++g) {
            double num = p * pi_m[g];
            double den = num + (1.0 - p) * pi_u[g];
            s[g] = num / den;
            double ng = static_cast<double>(table.counts[g]);
            nm[g] = ng * s[g];
            nu[g] = ng - nm[g];
        }
        double sum_m = 0.0, sum_u = 0.0;
        for (PatternId g = 0; g < n_cells; ++g) {
            sum_m += nm[g];
            sum_u += nu[g];
        }
        p = clamp(sum_m / n, kMixClamp, 1.0 - kMixClamp);
        for (int j = 0; j < q; ++j) {
            double am = 0.0, au = 0.0;
            for (PatternId g = 0; g < n_cells; ++g) {
                if (!pattern_bit(g, j)) continue;
                am += nm[g];
                au += nu[g];
            }
            rho_m[static_cast<std::size_t>(j)] = clamp(am / sum_m, kRhoClamp, 1.0 - kRhoClamp);
            rho_u[static_cast<std::size_t>(j)] = clamp(au / sum_u, kRhoClamp, 1.0 - kRhoClamp);
        }
        std::vector<double> pm_new(n_cells), pu_new(n_cells);
        for (PatternId g = 0; g < n_cells; ++g) {
            double pm = 1.0, pu = 1.0;
            for (int j = 0; j < q; ++j) {
                bool bit = pattern_bit(g, j);
                pm *= bit ? rho_m[static_cast<std::size_t>(j)]
                          : 1.0 - rho_m[static_cast<std::size_t>(j)];
                pu *= bit ? rho_u[static_cast<std::size_t>(j)]
                          : 1.0 - rho_u[static_cast<std::size_t>(j)];
            }
            pm_new[g] = pm;
            pu_new[g] = pu;
        }
        double delta = weight_delta(table.support, pm_new, pu_new, pi_m, pi_u);
        pi_m = std::move(pm_new);
        pi_u = std::move(pu_new);
        trace.loglik.push_back(mixture_loglik(table, p, pi_m, pi_u));
        trace.iterations = iter;
        if (delta < config.tol) {
            trace.converged = true;
            break;
        }
    }
    trace.posterior_match = std::move(s);
    return {p, std::move(pi_m), std::move(pi_u), std::move(rho_m), std::move(rho_u),
            std::move(trace)};
}

}  // namespace

void MixtureParams::validate() const {
    if (pi_m.size() != pattern_count(q) || pi_u.size() != pattern_count(q))
        throw std::invalid_argument("mixture distributions must hold 2^q cells");
    if (p_match < 0.0 || p_match > 1.0)
        throw std::invalid_argument("p_match outside [0,1]");
    double sm = 0.0, su = 0.0;
    for (PatternId g = 0; g < pi_m.size(); ++g) {
        if (!support.contains(g) && (pi_m[g] != 0.0 || pi_u[g] != 0.0))
            throw std::invalid_argument("mixture mass off the support");
        if (pi_m[g] < 0.0 || pi_u[g] < 0.0)
            throw std::invalid_argument("negative mixture mass");
        sm += pi_m[g];
        su += pi_u[g];
    }
    if (std::abs(sm - 1.0) > 1e-12 || std::abs(su - 1.0) > 1e-12)
        throw std::invalid_argument("mixture distributions must sum to 1 on the support");
}

std::vector<double> mstep_quasi_independence(const std::vector<double>& weighted_counts,
                                             const SupportSet& support) {
    if (weighted_counts.size() != pattern_count(support.q()))
        throw std::invalid_argument("weighted counts must hold 2^q cells");
    if (support.count() == 0) throw std::invalid_argument("empty support");
    return ipf_quasi_independence(weighted_counts, support, uniform_on_support(support));
}

double loglik(const ContingencyTable& table, const MixtureParams& params) {
    if (table.q != params.q || !(table.support == params.support))
        throw std::invalid_argument("table and params supports differ");
    return mixture_loglik(table, params.p_match, params.pi_m, params.pi_u);
}

CIFit fit_ci_em(const ContingencyTable& table, const EmConfig& config) {
    table.validate();
    if (!table.support.is_full())
        throw std::invalid_argument(
            "conditional-independence fit needs full support; use fit_qci_em for "
            "tables with structural zeros");
    if (table.n == 0) throw std::invalid_argument("cannot fit an empty table");
    if (config.max_iter < 1 || config.tol <= 0.0)
        throw std::invalid_argument("max_iter must be >= 1 and tol > 0");

    CiRun best = run_ci(table, config, default_init(table));
    Rng rng(derive_seed(config.seed, 0x63695F656DULL));
    for (int r = 1; r < config.restarts; ++r) {
        CiRun alt = run_ci(table, config, random_init(table, rng));
        if (alt.trace.loglik.back() > best.trace.loglik.back()) best = std::move(alt);
    }

    canonicalize_labels(best.p, best.pi_m, best.pi_u, table.support,
                        [&] { std::swap(best.rho_m, best.rho_u); });
    CIFit fit;
    fit.params = MixtureParams{table.q, best.p, std::move(best.pi_m), std::move(best.pi_u),
                               table.support};
    fit.ci = CIParams{std::move(best.rho_m), std::move(best.rho_u)};
    fit.trace = std::move(best.trace);
    return fit;
}

QCIFit fit_qci_em(const ContingencyTable& table, const EmConfig& config) {
    table.validate();
    if (table.support.count() == 0) throw std::invalid_argument("empty support");
    if (table.n == 0) throw std::invalid_argument("cannot fit an empty table");
    if (config.max_iter < 1 || config.tol <= 0.0)
        throw std::invalid_argument("max_iter must be >= 1 and tol > 0");

    QciRun best = run_qci(table, config, default_init(table));
    Rng rng(derive_seed(config.seed, 0x7163695F656DULL));
    for (int r = 1; r < config.restarts; ++r) {
        QciRun alt = run_qci(table, config, random_init(table, rng));
        if (alt.trace.loglik.back() > best.trace.loglik.back()) best = std::move(alt);
    }

    canonicalize_labels(best.p, best.pi_m, best.pi_u, table.support, [] {});
    QCIFit fit;
    fit.params = MixtureParams{table.q, best.p, std::move(best.pi_m), std::move(best.pi_u),
                               table.support};
    fit.trace = std::move(best.trace);
    return fit;
}

void write_params_json(const std::string& path, const MixtureParams& params) {
    nlohmann::json j;
    j["q"] = params.q;
    j["p_match"] = params.p_match;
    nlohmann::json cells = nlohmann::json::array();
    for (PatternId g = 0; g < params.pi_m.size(); ++g) {
        if (!params.support.contains(g)) continue;
        cells.push_back({{"pattern", pattern_to_string(g, params.q)},
                         {"pi_m", params.pi_m[g]},
                         {"pi_u", params.pi_u[g]}});
    }
    j["cells"] = cells;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << j.dump(2) << '\n';
}

MixtureParams read_params_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    nlohmann::json j;
    in >> j;
    MixtureParams params;
    params.q = j.at("q").get<int>();
    params.p_match = j.at("p_match").get<double>();
    std::vector<bool> mask(pattern_count(params.q), false);
    params.pi_m.assign(pattern_count(params.q), 0.0);
    params.pi_u.assign(pattern_count(params.q), 0.0);
    for (const auto& cell : j.at("cells")) {
        PatternId g = pattern_from_string(cell.at("pattern").get<std::string>());
        mask[g] = true;
        params.pi_m[g] = cell.at("pi_m").get<double>();
        params.pi_u[g] = cell.at("pi_u").get<double>();
    }
    params.support = SupportSet(params.q, std::move(mask));
    return params;
}

void write_params_csv(const std::string& path, const MixtureParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "pattern,pi_m,pi_u,log_weight\n";
    for (PatternId g = 0; g < params.pi_m.size(); ++g) {
        if (!params.support.contains(g)) continue;
        double lw = std::log(params.pi_m[g]) - std::log(params.pi_u[g]);
        out << pattern_to_string(g, params.q) << ',' << csv::format_double(params.pi_m[g]) << ','
            << csv::format_double(params.pi_u[g]) << ',' << csv::format_double(lw) << '\n';
    }
}

void write_trace_csv(const std::string& path, const EmTrace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "iteration,loglik\n";
    for (std::size_t i = 0; i < trace.loglik.size(); ++i)
        out << i << ',' << csv::format_double(trace.loglik[i]) << '\n';
}

}  // namespace fslink
