#include "gplm/funnel/funnel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gplm/exact/poisson_binomial.hpp"
#include "gplm/util/stats.hpp"

namespace gplm::funnel {

double standardized_ratio(double observed, double expected) {
    if (!(expected > 0.0))
        throw std::domain_error("standardized_ratio: expected count must be positive");
    return observed / expected;
}

PrecisionResult precision(const exact::ProviderNullModel& model, double tau) {
    if (!(tau > 0.0)) throw std::domain_error("precision: tau must be > 0");
    PrecisionResult out;
    const double gamma = model.gamma0;
    switch (model.family.kind) {
        case model::Family::gaussian:
            if (!(model.family.sigma2_hat > 0.0))
                throw std::domain_error("precision: gaussian sigma2 estimate missing");
            out.variance = double(model.size()) * model.family.sigma2_hat;
            break;
        case model::Family::bernoulli: {
            double v = 0.0;
            for (double g : model.g_values) {
                const double mu = model.family.hdot(gamma + g);
                if (tau * mu >= 1.0)
                    throw std::domain_error(
                        "precision: target-scaled Bernoulli mean reaches 1 for provider '" +
                        model.provider_id + "'");
                v += tau * mu * (1.0 - tau * mu);
            }
            out.variance = v;
            break;
        }
        case model::Family::poisson: {
            double total = 0.0;
            for (double g : model.g_values) total += model.family.hdot(gamma + g);
            out.variance = tau * total;
            break;
        }
    }
    // E is the tau = 1 expectation regardless of the target in play
    double e = 0.0;
    for (double g : model.g_values) e += model.family.hdot(gamma + g);
    out.expected = e;
    if (!(out.variance > 0.0))
        throw std::domain_error("precision: degenerate variance for provider '" +
                                model.provider_id + "'");
    out.precision = e * e / out.variance;
    return out;
}

namespace {

// smallest support point with G(o) >= a, by bisection over the increasing G
long lower_support_point(const exact::ProviderNullModel& scaled, double a) {
    long lo = 0;
    if (exact::sub_cdf(scaled, 0.0) >= a) return 0;
    long hi = 1;
    const long cap = scaled.family.kind == model::Family::bernoulli
                         ? long(scaled.size())
                         : std::numeric_limits<long>::max() / 4;
    while (exact::sub_cdf(scaled, double(hi)) < a) {
        lo = hi;
        if (hi >= cap)
            throw std::runtime_error("control limits: support scan exceeded family cap");
        hi = std::min(cap, hi * 2);
    }
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        if (exact::sub_cdf(scaled, double(mid)) >= a)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

// interpolated observed-scale quantile O(a, tau) = Otilde - lambda
double interpolated_quantile(const exact::ProviderNullModel& scaled, double a) {
    const long o_tilde = lower_support_point(scaled, a);
    const double g_here = exact::sub_cdf(scaled, double(o_tilde));
    const double g_prev =
        o_tilde == 0 ? 0.0 : exact::sub_cdf(scaled, double(o_tilde - 1));
    double lambda = 0.0;
    if (g_here > g_prev) lambda = (g_here - a) / (g_here - g_prev);
    lambda = std::clamp(lambda, 0.0, 1.0);
    return std::max(0.0, double(o_tilde) - lambda);
}

}  // namespace

ControlLimits interpolated_control_limits(const exact::ProviderNullModel& model,
                                          double tau, double alpha1, double alpha2) {
    if (!(alpha1 > 0.0 && alpha1 < 1.0) || !(alpha2 > 0.0 && alpha2 < 1.0))
        throw std::domain_error("control limits: tail probabilities must lie in (0,1)");
    const double expected = precision(model, 1.0).expected;

    exact::ProviderNullModel scaled = model;
    scaled.tau = tau;

    ControlLimits out;
    if (model.family.kind == model::Family::gaussian) {
        const double mean = scaled.mean_total(scaled.gamma0);
        const double sd = std::sqrt(double(model.size()) * model.family.sigma2_hat);
        out.lower = (mean + util::norm_quantile(alpha1) * sd) / expected;
        out.upper = (mean + util::norm_quantile(1.0 - alpha2) * sd) / expected;
        return out;
    }
    out.lower = interpolated_quantile(scaled, alpha1) / expected;
    out.upper = interpolated_quantile(scaled, 1.0 - alpha2) / expected;
    return out;
}

double provider_z_score(const exact::ProviderNullModel& model, double observed_sum) {
    double g = exact::sub_cdf(model, observed_sum);
    g = std::clamp(g, 1e-15, 1.0 - 1e-15);
    return util::norm_quantile(g);
}

namespace {

double window_log_likelihood(const std::vector<double>& x, const std::vector<double>& v,
                             double lo, double hi, double kappa0, double sigma2) {
    constexpr double half_log_2pi = 0.9189385332046727;
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double chi2 = 1.0 + sigma2 * v[i];
        const double chi = std::sqrt(chi2);
        if (x[i] >= lo && x[i] <= hi) {
            ll += std::log(kappa0) - half_log_2pi - 0.5 * std::log(chi2) -
                  x[i] * x[i] / (2.0 * chi2);
        } else {
            const double p_window =
                util::norm_cdf(hi / chi) - util::norm_cdf(lo / chi);
            ll += std::log(std::max(1e-12, 1.0 - kappa0 * p_window));
        }
    }
    return ll;
}

}  // namespace

OverdispersionFit fit_empirical_null(const std::vector<double>& z_scores,
                                     const std::vector<double>& null_variance_slopes,
                                     double central_quantile) {
    const std::size_t m = z_scores.size();
    if (m < 50)
        throw std::invalid_argument("fit_empirical_null: needs at least 50 providers");
    if (null_variance_slopes.size() != m)
        throw std::invalid_argument("fit_empirical_null: slope count mismatch");
    if (!(central_quantile > 0.0 && central_quantile < 0.5))
        throw std::invalid_argument("fit_empirical_null: window quantile must be in (0,0.5)");

    OverdispersionFit fit;
    const double lo = util::quantile_of(z_scores, central_quantile);
    const double hi = util::quantile_of(z_scores, 1.0 - central_quantile);
    const double sigma2_max =
        10.0 / std::max(1e-12, util::median_of(null_variance_slopes));

    if (!(hi > lo)) {
        fit.converged = false;
    } else {
        double best_ll = -std::numeric_limits<double>::infinity();
        double best_k = 0.999, best_s = 0.0;
        double k_lo = 0.5, k_hi = 0.999;
        double s_lo = 0.0, s_hi = sigma2_max;
        constexpr int grid = 21;
        for (int refine = 0; refine < 3; ++refine) {
            double round_best = -std::numeric_limits<double>::infinity();
            double round_k = best_k, round_s = best_s;
            for (int a = 0; a < grid; ++a) {
                const double k = k_lo + (k_hi - k_lo) * double(a) / double(grid - 1);
                for (int b = 0; b < grid; ++b) {
                    const double s = s_lo + (s_hi - s_lo) * double(b) / double(grid - 1);
                    const double ll = window_log_likelihood(z_scores, null_variance_slopes,
                                                            lo, hi, k, s);
                    if (ll > round_best) {
                        round_best = ll;
                        round_k = k;
                        round_s = s;
                    }
                }
            }
            best_ll = round_best;
            best_k = round_k;
            best_s = round_s;
            const double k_step = (k_hi - k_lo) / double(grid - 1);
            const double s_step = (s_hi - s_lo) / double(grid - 1);
            k_lo = std::max(0.5, best_k - k_step);
            k_hi = std::min(0.999, best_k + k_step);
            s_lo = std::max(0.0, best_s - s_step);
            s_hi = std::min(sigma2_max, best_s + s_step);
        }
        if (!std::isfinite(best_ll)) {
            fit.converged = false;
        } else {
            fit.kappa0 = best_k;
            fit.sigma2_phi = std::max(0.0, best_s);
        }
    }
    if (!fit.converged) {
        fit.kappa0 = 1.0;
        fit.sigma2_phi = 0.0;
    }
    fit.chi2.resize(m);
    for (std::size_t i = 0; i < m; ++i)
        fit.chi2[i] = 1.0 + fit.sigma2_phi * null_variance_slopes[i];
    return fit;
}

ControlLimits adjusted_control_limits(const exact::ProviderNullModel& model, double tau,
                                      double alpha, const OverdispersionFit& fit) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("adjusted limits: alpha must lie in (0,1)");
    const auto prec = precision(model, tau);
    const double chi = std::sqrt(1.0 + fit.sigma2_phi * prec.variance);
    const double z = util::norm_quantile(1.0 - alpha / 2.0);
    const double half = chi * z * std::sqrt(prec.variance) / prec.expected;
    return {tau - half, tau + half};
}

}  // namespace gplm::funnel
