#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gplm/model/network.hpp"
#include "gplm/model/panel.hpp"

namespace gplm::exact {

// Conditional null model for one provider's outcome sum: the fitted network
// values g(Z_ij) are frozen, the provider effect is a free argument so the
// same object serves the test (at gamma0) and the interval inversion.
// An optional target multiplier tau scales every per-subject mean.
struct ProviderNullModel {
    std::size_t provider_index = 0;
    std::string provider_id;
    model::OutcomeFamily family;
    std::vector<double> g_values;
    double gamma0 = 0.0;
    double tau = 1.0;

    std::size_t size() const { return g_values.size(); }
    // sum of tau-scaled means at the given effect
    double mean_total(double gamma) const;
    // per-subject Bernoulli probabilities; throws if tau*hdot >= 1
    std::vector<double> bernoulli_probs(double gamma) const;
};

// Builds the null model from fitted parameters: g evaluated in inference mode.
ProviderNullModel make_null_model(const model::NetworkParams& params,
                                  const model::ProviderPanel& panel,
                                  std::size_t provider_index,
                                  const model::OutcomeFamily& family, double gamma0,
                                  double tau = 1.0,
                                  const model::DropoutSpec* inference_dropout = nullptr);

// F_i(o | Z_i; gamma0, ...), the family-specific conditional CDF of O_i
double conditional_cdf(const ProviderNullModel& model, double o);
// Pr(O_i = o); zero for the Gaussian family
double point_mass(const ProviderNullModel& model, double o);
// sub-CDF G = F - 0.5 * Pr(O = o)
double sub_cdf(const ProviderNullModel& model, double o);
// sub-CDF evaluated at an arbitrary provider effect (used by the CI search)
double sub_cdf_at(const ProviderNullModel& model, double o, double gamma);

// two-sided mid-p value, capped at 1
double exact_mid_p(const ProviderNullModel& model_at_null, double observed_sum);

struct ConfidenceInterval {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

// Endpoints solve G(O; gamma) = 1 - alpha1 (lower) and = alpha2 (upper) by
// bracketed bisection in gamma (G is strictly decreasing in gamma). Boundary
// observations that make a target unattainable yield an infinite endpoint.
ConfidenceInterval exact_confidence_interval(const ProviderNullModel& model,
                                             double observed_sum, double alpha1,
                                             double alpha2);

struct TestStat {
    double statistic = 0.0;
    double p_value = 1.0;
};

// Bernoulli-family comparator tests against the standard normal
TestStat score_statistic(const ProviderNullModel& model_at_null,
                         std::span<const double> outcomes);
TestStat wald_statistic(double gamma_hat, const ProviderNullModel& model_at_own_estimate,
                        double gamma_null);

enum class Flag { better, expected, worse };
std::string to_string(Flag f);

Flag flag_provider(double p_value, double srr, double alpha);

struct TestResult {
    std::string provider_id;
    double observed = 0.0;   // O_i
    double expected = 0.0;   // E_i
    double srr = 0.0;
    double mid_p = 1.0;
    ConfidenceInterval ci;
    Flag flag = Flag::expected;
    std::string test_kind = "exact";
};

}  // namespace gplm::exact
