#include <doctest.h>

#include <cmath>
#include <vector>

#include "gplm/funnel/funnel.hpp"
#include "gplm/util/rng.hpp"
#include "gplm/util/stats.hpp"

using namespace gplm;

namespace {

exact::ProviderNullModel direct_model(model::Family kind, std::vector<double> g_values,
                                      double gamma0, double sigma2 = 1.0) {
    exact::ProviderNullModel m;
    m.provider_id = "F";
    m.family = {kind, sigma2};
    m.g_values = std::move(g_values);
    m.gamma0 = gamma0;
    return m;
}

std::vector<double> logit_g(const std::vector<double>& probs) {
    std::vector<double> g(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j)
        g[j] = std::log(probs[j] / (1.0 - probs[j]));
    return g;
}

}  // namespace

TEST_CASE("standardized ratio basics and scale identity") {
    CHECK(funnel::standardized_ratio(5.0, 5.0) == doctest::Approx(1.0));
    CHECK(funnel::standardized_ratio(0.0, 5.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(funnel::standardized_ratio(1.0, 0.0), std::domain_error);
    util::Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const double o = rng.uniform(0.0, 50.0), e = rng.uniform(0.1, 50.0);
        const double c = rng.uniform(0.1, 10.0);
        CHECK(funnel::standardized_ratio(c * o, c * e) ==
              doctest::Approx(funnel::standardized_ratio(o, e)).epsilon(1e-12));
    }
}

TEST_CASE("precision closed forms") {
    // bernoulli, all means 0.5, n = 100: V = 25, E = 50, rho = 100
    auto b = direct_model(model::Family::bernoulli, logit_g(std::vector<double>(100, 0.5)),
                          0.0);
    auto pb = funnel::precision(b, 1.0);
    CHECK(pb.variance == doctest::Approx(25.0).epsilon(1e-10));
    CHECK(pb.expected == doctest::Approx(50.0).epsilon(1e-10));
    CHECK(pb.precision == doctest::Approx(100.0).epsilon(1e-10));

    // poisson with total mean 30 at tau = 1: V = 30, rho = 30
    auto p = direct_model(model::Family::poisson,
                          std::vector<double>(30, 0.0), 0.0);
    auto pp = funnel::precision(p, 1.0);
    CHECK(pp.variance == doctest::Approx(30.0).epsilon(1e-10));
    CHECK(pp.precision == doctest::Approx(30.0).epsilon(1e-10));

    // tau = 1.2 bernoulli against direct re-summation
    util::Rng rng(44);
    std::vector<double> probs(40);
    for (auto& q : probs) q = rng.uniform(0.05, 0.5);
    auto b2 = direct_model(model::Family::bernoulli, logit_g(probs), 0.0);
    const double tau = 1.2;
    double v = 0.0, e = 0.0;
    for (double q : probs) {
        v += tau * q * (1.0 - tau * q);
        e += q;
    }
    auto pr = funnel::precision(b2, tau);
    CHECK(pr.variance == doctest::Approx(v).epsilon(1e-10));
    CHECK(pr.precision == doctest::Approx(e * e / v).epsilon(1e-10));
}

TEST_CASE("interpolated limits: two-coin hand evaluation") {
    // G(0) = 0.125, G(1) = 0.5: at alpha = 0.25 the interpolation weight is
    // (0.5 - 0.25) / (0.5 - 0.125) = 2/3 and O(0.25) = 1/3
    auto m = direct_model(model::Family::bernoulli, logit_g({0.5, 0.5}), 0.0);
    const auto lims = funnel::interpolated_control_limits(m, 1.0, 0.25, 0.25);
    CHECK(lims.lower == doctest::Approx((1.0 / 3.0) / 1.0).epsilon(1e-12));
    // upper tail: 1 - 0.25 = 0.75 falls between G(1) = 0.5 and G(2) = 0.875:
    // lambda = (0.875 - 0.75)/(0.875 - 0.5) = 1/3, O = 2 - 1/3 = 5/3
    CHECK(lims.upper == doctest::Approx((5.0 / 3.0) / 1.0).epsilon(1e-12));
}

TEST_CASE("gaussian limits are exact quantiles") {
    auto m = direct_model(model::Family::gaussian, std::vector<double>(4, 2.5), 0.0, 1.0);
    const auto lims = funnel::interpolated_control_limits(m, 1.0, 0.025, 0.025);
    const double z = util::norm_quantile(0.975);
    CHECK(lims.lower == doctest::Approx((10.0 - z * 2.0) / 10.0).epsilon(1e-10));
    CHECK(lims.upper == doctest::Approx((10.0 + z * 2.0) / 10.0).epsilon(1e-10));
    // symmetric about tau = 1 in the T scale
    CHECK(lims.lower + lims.upper == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("limits at alpha = 0.002 contain the alpha = 0.05 limits") {
    util::Rng rng(909);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> probs(60);
        for (auto& q : probs) q = rng.uniform(0.1, 0.5);
        auto m = direct_model(model::Family::bernoulli, logit_g(probs), 0.0);
        const auto tight = funnel::interpolated_control_limits(m, 1.0, 0.001, 0.001);
        const auto loose = funnel::interpolated_control_limits(m, 1.0, 0.025, 0.025);
        CHECK(tight.lower <= loose.lower);
        CHECK(tight.upper >= loose.upper);
    }
}

TEST_CASE("interpolated limits cover the null at close to the nominal rate") {
    util::Rng rng(2024);
    const std::size_t providers = 1000;
    std::size_t outside = 0;
    for (std::size_t i = 0; i < providers; ++i) {
        const std::size_t n = 60 + rng.below(80);
        std::vector<double> probs(n);
        for (auto& q : probs) q = util::expit(rng.normal(-1.0, 0.3));
        auto m = direct_model(model::Family::bernoulli, logit_g(probs), 0.0);
        double o = 0.0, e = 0.0;
        for (double q : probs) {
            o += rng.uniform() < q ? 1.0 : 0.0;
            e += q;
        }
        const auto lims = funnel::interpolated_control_limits(m, 1.0, 0.025, 0.025);
        const double t = o / e;
        if (t < lims.lower || t > lims.upper) ++outside;
    }
    const double rate = double(outside) / double(providers);
    CHECK(rate >= 0.03);
    CHECK(rate <= 0.07);
}

TEST_CASE("funnel geometry: half-width shrinks with precision") {
    // same mean level, increasing size -> increasing precision, tighter limits
    double prev_width = 1e9, prev_rho = 0.0;
    for (std::size_t n : {30, 60, 120, 240}) {
        auto m = direct_model(model::Family::bernoulli,
                              logit_g(std::vector<double>(n, 0.3)), 0.0);
        const auto pr = funnel::precision(m, 1.0);
        const auto lims = funnel::interpolated_control_limits(m, 1.0, 0.025, 0.025);
        CHECK(pr.precision > prev_rho);
        const double width = lims.upper - lims.lower;
        CHECK(width < prev_width);
        prev_width = width;
        prev_rho = pr.precision;
    }
}

TEST_CASE("precision grows when a low-risk subject joins (bernoulli, tau 1)") {
    std::vector<double> probs(50, 0.3);
    auto base = direct_model(model::Family::bernoulli, logit_g(probs), 0.0);
    const double rho_before = funnel::precision(base, 1.0).precision;
    probs.push_back(0.2);
    auto bigger = direct_model(model::Family::bernoulli, logit_g(probs), 0.0);
    CHECK(funnel::precision(bigger, 1.0).precision > rho_before);
}

TEST_CASE("empirical null on exact N(0,1) scores keeps sigma2 near zero") {
    util::Rng rng(606);
    const std::size_t m = 1000;
    std::vector<double> z(m), v(m);
    double inv_v_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        z[i] = rng.normal();
        v[i] = rng.uniform(10.0, 40.0);
        inv_v_sum += 1.0 / v[i];
    }
    const auto fit = funnel::fit_empirical_null(z, v);
    CHECK(fit.converged);
    CHECK(fit.kappa0 >= 0.9);
    CHECK(fit.sigma2_phi >= 0.0);
    CHECK(fit.sigma2_phi <= 0.05 * inv_v_sum / double(m));
}

TEST_CASE("empirical null recovers an injected sigma2 at m = 3000") {
    util::Rng rng(707);
    const std::size_t m = 3000;
    const double sigma2_true = 0.04;
    std::vector<double> z(m), v(m);
    for (std::size_t i = 0; i < m; ++i) {
        v[i] = rng.uniform(8.0, 45.0);
        z[i] = rng.normal() * std::sqrt(1.0 + sigma2_true * v[i]);
    }
    const auto fit = funnel::fit_empirical_null(z, v);
    CHECK(fit.converged);
    CHECK(fit.sigma2_phi >= 0.5 * sigma2_true);
    CHECK(fit.sigma2_phi <= 1.5 * sigma2_true);
}

TEST_CASE("adjusted limits: degenerate fit reduces to the normal approximation") {
    std::vector<double> probs(80, 0.35);
    auto m = direct_model(model::Family::bernoulli, logit_g(probs), 0.0);
    funnel::OverdispersionFit none;
    none.sigma2_phi = 0.0;
    const auto adj = funnel::adjusted_control_limits(m, 1.0, 0.05, none);
    const auto pr = funnel::precision(m, 1.0);
    const double half = util::norm_quantile(0.975) * std::sqrt(pr.variance) / pr.expected;
    CHECK(adj.lower == doctest::Approx(1.0 - half).epsilon(1e-10));
    CHECK(adj.upper == doctest::Approx(1.0 + half).epsilon(1e-10));

    // limits widen monotonically in sigma2
    double prev = adj.upper - adj.lower;
    for (double s2 : {0.01, 0.05, 0.2}) {
        funnel::OverdispersionFit fit;
        fit.sigma2_phi = s2;
        const auto wider = funnel::adjusted_control_limits(m, 1.0, 0.05, fit);
        const double width = wider.upper - wider.lower;
        CHECK(width > prev);
        prev = width;
    }
}

TEST_CASE("empirical null rejects undersized inputs") {
    std::vector<double> z(10, 0.0), v(10, 1.0);
    CHECK_THROWS_AS(funnel::fit_empirical_null(z, v), std::invalid_argument);
}
