#pragma once

#include <string>
#include <vector>

#include "gplm/exact/exact_test.hpp"

namespace gplm::funnel {

// indirectly standardized ratio T = O / E
double standardized_ratio(double observed, double expected);

struct PrecisionResult {
    double variance = 0.0;   // V_i(tau)
    double precision = 0.0;  // E_i^2 / V_i(tau), E at tau = 1
    double expected = 0.0;   // E_i
};

PrecisionResult precision(const exact::ProviderNullModel& model, double tau);

struct ControlLimits {
    double lower = 0.0;
    double upper = 0.0;
};

// Interpolated exact-test limits on the T scale for target tau: discrete
// families interpolate the sub-CDF between adjacent support points; the
// Gaussian family uses exact quantiles. E in the denominator is the tau=1
// expectation.
ControlLimits interpolated_control_limits(const exact::ProviderNullModel& model,
                                          double tau, double alpha1, double alpha2);

// Z-score of the observed sum under the null: Phi^{-1}(G(O))
double provider_z_score(const exact::ProviderNullModel& model, double observed_sum);

struct OverdispersionFit {
    double kappa0 = 1.0;      // null-component proportion
    double sigma2_phi = 0.0;  // provider-effect excess variance
    bool converged = true;
    std::vector<double> chi2;  // 1 + sigma2_phi * V_i per provider
};

// Estimates (kappa0, sigma2_phi) from provider z-scores whose null variances
// follow chi_i^2 = 1 + sigma2_phi * V_i. The null-component likelihood is
// maximized over scores inside the central [q, 1-q] quantile window; scores
// outside contribute only the probability of escaping the window, which
// profiles out the non-null component. Deterministic 2-D grid refinement.
OverdispersionFit fit_empirical_null(const std::vector<double>& z_scores,
                                     const std::vector<double>& null_variance_slopes,
                                     double central_quantile = 0.25);

// Overdispersion-widened normal-approximation limits about the target
ControlLimits adjusted_control_limits(const exact::ProviderNullModel& model, double tau,
                                      double alpha, const OverdispersionFit& fit);

}  // namespace gplm::funnel
