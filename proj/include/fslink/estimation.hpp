#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fslink/contingency.hpp"

namespace fslink {

/// Two-component mixture over comparison patterns. pi_m / pi_u are dense
/// over pattern space, each summing to 1 on the support and exactly 0 off
/// it.
struct MixtureParams {
    int q = 0;
    double p_match = 0.0;
    std::vector<double> pi_m, pi_u;
    SupportSet support;

    void validate() const;
};

/// Per-comparison agreement probabilities under conditional independence.
struct CIParams {
    std::vector<double> rho_m, rho_u;
};

struct EmConfig {
    int max_iter = 1000;
    double tol = 1e-6;  // on max |delta log(pi_m/pi_u)| over the support
    int restarts = 1;   // additional random starts beyond the default init
    std::uint64_t seed = 0;
};

struct EmTrace {
    std::vector<double> loglik;  // observed-data log-likelihood per iteration
    int iterations = 0;
    bool converged = false;
    std::vector<double> posterior_match;  // final E-step s_g, dense over patterns
};

struct CIFit {
    MixtureParams params;
    CIParams ci;
    EmTrace trace;
};

struct QCIFit {
    MixtureParams params;
    EmTrace trace;
};

/// Classical conditional-independence EM. The table must have full support;
/// restricted supports belong to fit_qci_em.
CIFit fit_ci_em(const ContingencyTable& table, const EmConfig& config = {});

/// Conditional quasi-independence EM: the M-step solves a main-effects
/// log-linear model restricted to the support, so off-support cells stay
/// structural zeros. Non-convergence returns converged=false rather than
/// throwing.
QCIFit fit_qci_em(const ContingencyTable& table, const EmConfig& config = {});

/// Maximum-likelihood quasi-independence distribution for nonnegative
/// weighted counts: argmax sum_g w_g log pi_g with pi proportional to a
/// product of per-comparison factors on the support and 0 elsewhere.
/// Fitted agreement margins match the observed weighted margins (clamped
/// away from 0/1 at structurally possible boundaries).
std::vector<double> mstep_quasi_independence(const std::vector<double>& weighted_counts,
                                             const SupportSet& support);

/// Observed-data multinomial log-likelihood; -inf when an observed cell has
/// zero mixture mass.
double loglik(const ContingencyTable& table, const MixtureParams& params);

void write_params_json(const std::string& path, const MixtureParams& params);
MixtureParams read_params_json(const std::string& path);
void write_params_csv(const std::string& path, const MixtureParams& params);
void write_trace_csv(const std::string& path, const EmTrace& trace);

}  // namespace fslink
