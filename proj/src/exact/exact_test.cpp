#include "gplm/exact/exact_test.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gplm/exact/poisson_binomial.hpp"
#include "gplm/util/stats.hpp"

namespace gplm::exact {

double ProviderNullModel::mean_total(double gamma) const {
    double total = 0.0;
    for (double g : g_values) total += family.hdot(gamma + g);
    return tau * total;
}

std::vector<double> ProviderNullModel::bernoulli_probs(double gamma) const {
    // With tau <= 1 the mean stays inside (0,1) mathematically, so values
    // rounded onto the boundary are clamped back; tau > 1 can genuinely push
    // the mean to 1 or beyond, which is a modeling error.
    constexpr double eps = 1e-14;
    std::vector<double> probs(g_values.size());
    for (std::size_t j = 0; j < g_values.size(); ++j) {
        double p = tau * family.hdot(gamma + g_values[j]);
        if (tau > 1.0 && p >= 1.0)
            throw std::domain_error(
                "target-scaled Bernoulli mean reaches 1 for provider '" + provider_id +
                "' subject " + std::to_string(j) + " (tau too large)");
        p = std::min(p, 1.0 - eps);
        p = std::max(p, eps * eps);
        probs[j] = p;
    }
    return probs;
}

ProviderNullModel make_null_model(const model::NetworkParams& params,
                                  const model::ProviderPanel& panel,
                                  std::size_t provider_index,
                                  const model::OutcomeFamily& family, double gamma0,
                                  double tau,
                                  const model::DropoutSpec* inference_dropout) {
    if (provider_index >= panel.provider_count())
        throw std::out_of_range("make_null_model: provider index out of range");
    if (!(tau > 0.0)) throw std::domain_error("make_null_model: tau must be > 0");
    ProviderNullModel nm;
    nm.provider_index = provider_index;
    nm.provider_id = panel.providers[provider_index].provider_id;
    nm.family = family;
    nm.gamma0 = gamma0;
    nm.tau = tau;
    const auto& blk = panel.providers[provider_index];
    nm.g_values.resize(blk.size());
    model::Workspace ws;
    for (std::size_t j = 0; j < blk.size(); ++j)
        nm.g_values[j] =
            model::forward(params, blk.row(j, panel.p0), nullptr, inference_dropout, ws);
    return nm;
}

namespace {

double poisson_pmf(double lambda, long o) {
    if (o < 0) return 0.0;
    if (lambda <= 0.0) return o == 0 ? 1.0 : 0.0;
    return std::exp(-lambda + double(o) * std::log(lambda) - std::lgamma(double(o) + 1.0));
}

double poisson_cdf(double lambda, long o) {
    if (o < 0) return 0.0;
    if (lambda <= 0.0) return 1.0;
    return util::gamma_q(double(o) + 1.0, lambda);
}

void check_gaussian_variance(const ProviderNullModel& m) {
    if (!(m.family.sigma2_hat > 0.0))
        throw std::domain_error("gaussian inference requires a positive sigma2 estimate");
}

}  // namespace

double sub_cdf_at(const ProviderNullModel& m, double o, double gamma) {
    switch (m.family.kind) {
        case model::Family::gaussian: {
            check_gaussian_variance(m);
            const double sd = std::sqrt(double(m.size()) * m.family.sigma2_hat);
            return util::norm_cdf((o - m.mean_total(gamma)) / sd);
        }
        case model::Family::bernoulli: {
            const long k = std::lround(o);
            if (k < 0 || k > long(m.size()))
                throw std::domain_error("sub_cdf: observed sum outside Bernoulli support");
            const auto pmf = poisson_binomial_pmf(m.bernoulli_probs(gamma));
            double cdf = 0.0;
            for (long j = 0; j <= k; ++j) cdf += pmf[j];
            return cdf - 0.5 * pmf[k];
        }
        case model::Family::poisson: {
            const long k = std::lround(o);
            if (k < 0) throw std::domain_error("sub_cdf: observed sum outside Poisson support");
            const double lambda = m.mean_total(gamma);
            return poisson_cdf(lambda, k) - 0.5 * poisson_pmf(lambda, k);
        }
    }
    return 0.0;
}

double conditional_cdf(const ProviderNullModel& m, double o) {
    switch (m.family.kind) {
        case model::Family::gaussian: {
            check_gaussian_variance(m);
            const double sd = std::sqrt(double(m.size()) * m.family.sigma2_hat);
            return util::norm_cdf((o - m.mean_total(m.gamma0)) / sd);
        }
        case model::Family::bernoulli: {
            const long k = std::lround(o);
            if (k < 0 || k > long(m.size()))
                throw std::domain_error("conditional_cdf: o outside Bernoulli support");
            return poisson_binomial_cdf(m.bernoulli_probs(m.gamma0), k);
        }
        case model::Family::poisson: {
            const long k = std::lround(o);
            if (k < 0) throw std::domain_error("conditional_cdf: o outside Poisson support");
            return poisson_cdf(m.mean_total(m.gamma0), k);
        }
    }
    return 0.0;
}

double point_mass(const ProviderNullModel& m, double o) {
    switch (m.family.kind) {
        case model::Family::gaussian:
            return 0.0;
        case model::Family::bernoulli: {
            const long k = std::lround(o);
            if (k < 0 || k > long(m.size())) return 0.0;
            return poisson_binomial_pmf(m.bernoulli_probs(m.gamma0))[k];
        }
        case model::Family::poisson: {
            const long k = std::lround(o);
            return poisson_pmf(m.mean_total(m.gamma0), k);
        }
    }
    return 0.0;
}

double sub_cdf(const ProviderNullModel& m, double o) { return sub_cdf_at(m, o, m.gamma0); }

double exact_mid_p(const ProviderNullModel& model_at_null, double observed_sum) {
    const double g = sub_cdf(model_at_null, observed_sum);
    return std::min(1.0, 2.0 * std::min(g, 1.0 - g));
}

namespace {

// Largest effect offset explored before declaring an endpoint unattainable;
// beyond this the sub-CDF has numerically plateaued for all three families.
constexpr double kMaxBracketOffset = 128.0;

// Solve G(O; gamma) = target for the strictly decreasing G. Returns infinity
// of the requested sign when the target is out of reach.
double invert_sub_cdf(const ProviderNullModel& m, double o, double target,
                      bool lower_endpoint) {
    const double center = m.gamma0;
    auto g_at = [&](double gamma) { return sub_cdf_at(m, o, gamma); };

    // find lo with G(lo) >= target
    double lo = center - 1.0, offset = 1.0;
    while (g_at(lo) < target) {
        offset *= 2.0;
        if (offset > kMaxBracketOffset)
            return -std::numeric_limits<double>::infinity();
        lo = center - offset;
    }
    // find hi with G(hi) <= target
    double hi = center + 1.0;
    offset = 1.0;
    while (g_at(hi) > target) {
        offset *= 2.0;
        if (offset > kMaxBracketOffset)
            return std::numeric_limits<double>::infinity();
        hi = center + offset;
    }
    (void)lower_endpoint;
    while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        if (g_at(mid) >= target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

ConfidenceInterval exact_confidence_interval(const ProviderNullModel& model,
                                             double observed_sum, double alpha1,
                                             double alpha2) {
    if (!(alpha1 >= 0.0 && alpha1 < 1.0) || !(alpha2 >= 0.0 && alpha2 < 1.0) ||
        !(alpha1 + alpha2 > 0.0 && alpha1 + alpha2 < 1.0))
        throw std::domain_error("exact_confidence_interval: invalid alpha split");
    ConfidenceInterval ci;
    if (alpha1 > 0.0)
        ci.lower = invert_sub_cdf(model, observed_sum, 1.0 - alpha1, true);
    if (alpha2 > 0.0)
        ci.upper = invert_sub_cdf(model, observed_sum, alpha2, false);
    return ci;
}

TestStat score_statistic(const ProviderNullModel& model_at_null,
                         std::span<const double> outcomes) {
    if (model_at_null.family.kind != model::Family::bernoulli)
        throw std::domain_error("score test is defined for the Bernoulli family only");
    if (outcomes.size() != model_at_null.size())
        throw std::invalid_argument("score_statistic: outcome count mismatch");
    double num = 0.0, denom = 0.0;
    for (std::size_t j = 0; j < outcomes.size(); ++j) {
        const double p = util::expit(model_at_null.gamma0 + model_at_null.g_values[j]);
        num += outcomes[j] - p;
        denom += p * (1.0 - p);
    }
    if (!(denom > 0.0))
        throw std::domain_error("score test degenerate: fitted variance is zero");
    const double stat = num / std::sqrt(denom);
    return {stat, std::min(1.0, 2.0 * util::norm_cdf(-std::fabs(stat)))};
}

TestStat wald_statistic(double gamma_hat, const ProviderNullModel& model_at_own_estimate,
                        double gamma_null) {
    if (model_at_own_estimate.family.kind != model::Family::bernoulli)
        throw std::domain_error("Wald test is defined for the Bernoulli family only");
    double info = 0.0;
    for (double g : model_at_own_estimate.g_values) {
        const double p = util::expit(gamma_hat + g);
        info += p * (1.0 - p);
    }
    if (!(info > 0.0))
        throw std::domain_error("Wald test degenerate: fitted variance is zero");
    const double stat = (gamma_hat - gamma_null) * std::sqrt(info);
    return {stat, std::min(1.0, 2.0 * util::norm_cdf(-std::fabs(stat)))};
}

std::string to_string(Flag f) {
    switch (f) {
        case Flag::better: return "better";
        case Flag::expected: return "expected";
        case Flag::worse: return "worse";
    }
    return "?";
}

Flag flag_provider(double p_value, double srr, double alpha) {
    if (p_value < alpha && srr > 1.0) return Flag::worse;
    if (p_value < alpha && srr < 1.0) return Flag::better;
    return Flag::expected;
}

}  // namespace gplm::exact
