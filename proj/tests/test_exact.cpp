#include <doctest.h>

#include <cmath>
#include <vector>

#include "gplm/exact/exact_test.hpp"
#include "gplm/exact/poisson_binomial.hpp"
#include "gplm/util/rng.hpp"
#include "gplm/util/stats.hpp"
#include "oracles.hpp"

using namespace gplm;

namespace {

exact::ProviderNullModel direct_model(model::Family kind, std::vector<double> g_values,
                                      double gamma0, double tau = 1.0,
                                      double sigma2 = 1.0) {
    exact::ProviderNullModel m;
    m.provider_id = "T";
    m.family = {kind, sigma2};
    m.g_values = std::move(g_values);
    m.gamma0 = gamma0;
    m.tau = tau;
    return m;
}

// g values that turn expit(gamma0 + g_j) into the requested probabilities
std::vector<double> logit_g(const std::vector<double>& probs) {
    std::vector<double> g(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j)
        g[j] = std::log(probs[j] / (1.0 - probs[j]));
    return g;
}

}  // namespace

TEST_CASE("poisson-binomial fixed points") {
    CHECK(exact::poisson_binomial_cdf(std::vector<double>{0.5, 0.5}, 1) ==
          doctest::Approx(0.75).epsilon(1e-14));

    const std::vector<double> probs{0.2, 0.7};
    const auto pmf = exact::poisson_binomial_pmf(probs);
    CHECK(pmf[0] == doctest::Approx(0.24).epsilon(1e-14));
    CHECK(pmf[1] == doctest::Approx(0.62).epsilon(1e-14));
    CHECK(pmf[2] == doctest::Approx(0.14).epsilon(1e-14));
    CHECK(exact::poisson_binomial_cdf(probs, 1) == doctest::Approx(0.86).epsilon(1e-14));

    CHECK_THROWS_AS(exact::poisson_binomial_pmf(std::vector<double>{0.5, 1.0}),
                    std::domain_error);
    CHECK_THROWS_AS(exact::poisson_binomial_cdf(probs, 3), std::domain_error);
}

TEST_CASE("poisson-binomial DP equals subset enumeration on random vectors") {
    util::Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + rng.below(12);
        std::vector<double> probs(n);
        for (auto& p : probs) p = rng.uniform(0.02, 0.98);
        const auto pmf = exact::poisson_binomial_pmf(probs);
        for (long o = 0; o <= long(n); ++o) {
            CHECK(std::fabs(exact::poisson_binomial_cdf(probs, o) -
                            oracle::enumeration_cdf(probs, o)) <= 1e-12);
            CHECK(std::fabs(pmf[o] - oracle::enumeration_pmf(probs, o)) <= 1e-12);
        }
    }
}

TEST_CASE("poisson-binomial pmf sums to one at n = 10000") {
    util::Rng rng(17);
    std::vector<double> probs(10000);
    for (auto& p : probs) p = rng.uniform(0.01, 0.99);
    const auto pmf = exact::poisson_binomial_pmf(probs);
    double total = 0.0;
    for (double v : pmf) total += v;
    CHECK(std::fabs(total - 1.0) <= 1e-10);
}

TEST_CASE("conditional cdf per family") {
    // gaussian symmetry: mean 10, variance 4 per subject count
    auto g4 = direct_model(model::Family::gaussian, {2.5, 2.5, 2.5, 2.5}, 0.0, 1.0, 1.0);
    CHECK(exact::conditional_cdf(g4, 10.0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(exact::sub_cdf(g4, 10.0) == doctest::Approx(0.5).epsilon(1e-14));

    // poisson with total mean 3 at o=3, against the series oracle
    auto p3 = direct_model(model::Family::poisson, {std::log(1.5), std::log(1.5)}, 0.0);
    const double f3 = exact::conditional_cdf(p3, 3.0);
    CHECK(f3 == doctest::Approx(oracle::poisson_series_cdf(3.0, 3)).epsilon(1e-12));
    CHECK(f3 == doctest::Approx(0.6472318887822313).epsilon(1e-12));
    const double g3 = exact::sub_cdf(p3, 3.0);
    CHECK(g3 == doctest::Approx(oracle::poisson_series_cdf(3.0, 3) -
                                0.5 * oracle::poisson_series_pmf(3.0, 3))
                    .epsilon(1e-12));
    CHECK(g3 == doctest::Approx(0.5352109849545374).epsilon(1e-12));

    // bernoulli delegates to the poisson-binomial machinery
    auto b2 = direct_model(model::Family::bernoulli, logit_g({0.5, 0.5}), 0.0);
    CHECK(exact::conditional_cdf(b2, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(exact::sub_cdf(b2, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mid-p doubling and cap") {
    // symmetric two-coin model at o=1 has G exactly 0.5 -> p capped at 1
    auto b2 = direct_model(model::Family::bernoulli, logit_g({0.5, 0.5}), 0.0);
    CHECK(exact::exact_mid_p(b2, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

    // gaussian model placed so that G = 0.01 -> p = 0.02
    auto g1 = direct_model(model::Family::gaussian, {0.0}, 0.0, 1.0, 1.0);
    const double o = util::norm_quantile(0.01);
    CHECK(exact::exact_mid_p(g1, o) == doctest::Approx(0.02).epsilon(1e-9));
}

TEST_CASE("sub-cdf is strictly decreasing in the provider effect") {
    util::Rng rng(23);
    for (model::Family kind :
         {model::Family::gaussian, model::Family::bernoulli, model::Family::poisson}) {
        std::vector<double> g(12);
        for (auto& v : g) v = rng.normal(-0.5, 0.6);
        auto m = direct_model(kind, g, 0.0, 1.0, 0.8);
        const double o = kind == model::Family::gaussian ? 3.5 : 4.0;
        double prev = exact::sub_cdf_at(m, o, -2.0);
        for (double gamma = -1.5; gamma <= 2.0; gamma += 0.5) {
            const double cur = exact::sub_cdf_at(m, o, gamma);
            CHECK(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("confidence interval: gaussian symmetric case") {
    // identity link: mean = n*gamma + sum g; G(o; gamma) = Phi((o - mean)/sd)
    auto m = direct_model(model::Family::gaussian, {0.1, 0.1, 0.1, 0.1}, 0.0, 1.0, 2.0);
    const double o = 2.0;
    const auto ci = exact::exact_confidence_interval(m, o, 0.025, 0.025);
    // closed form: gamma solving mean = o is (o - 0.4)/4; half-width z*sd/4
    const double center = (o - 0.4) / 4.0;
    const double half = util::norm_quantile(0.975) * std::sqrt(4.0 * 2.0) / 4.0;
    CHECK(ci.lower == doctest::Approx(center - half).epsilon(1e-6));
    CHECK(ci.upper == doctest::Approx(center + half).epsilon(1e-6));

    // nesting: a bigger alpha1 pulls the lower endpoint up
    const auto wider = exact::exact_confidence_interval(m, o, 0.05, 0.025);
    CHECK(wider.lower > ci.lower);
}

TEST_CASE("confidence interval endpoints match a dense grid inversion (bernoulli)") {
    util::Rng rng(303);
    std::vector<double> g(20);
    for (auto& v : g) v = rng.normal(-0.4, 0.5);
    auto m = direct_model(model::Family::bernoulli, g, -0.3);
    const double o = 7.0;
    const auto ci = exact::exact_confidence_interval(m, o, 0.025, 0.025);

    // grid oracle: scan gamma, locate the sign flips of G - target
    auto grid_root = [&](double target) {
        double prev_gamma = -6.0;
        double prev_val = exact::sub_cdf_at(m, o, prev_gamma) - target;
        for (double gamma = -6.0 + 1e-3; gamma <= 6.0; gamma += 1e-3) {
            const double val = exact::sub_cdf_at(m, o, gamma) - target;
            if ((prev_val >= 0.0) != (val >= 0.0))
                return 0.5 * (prev_gamma + gamma);
            prev_gamma = gamma;
            prev_val = val;
        }
        return std::nan("");
    };
    CHECK(std::fabs(ci.lower - grid_root(0.975)) <= 1e-3);
    CHECK(std::fabs(ci.upper - grid_root(0.025)) <= 1e-3);

    // sub-CDF at the endpoints equals the targets within the root tolerance
    CHECK(exact::sub_cdf_at(m, o, ci.lower) == doctest::Approx(0.975).epsilon(1e-5));
    CHECK(exact::sub_cdf_at(m, o, ci.upper) == doctest::Approx(0.025).epsilon(1e-5));
}

TEST_CASE("confidence interval: boundary observations give one-sided intervals") {
    std::vector<double> g(10, 0.0);
    auto m = direct_model(model::Family::bernoulli, g, 0.0);
    const auto at_zero = exact::exact_confidence_interval(m, 0.0, 0.025, 0.025);
    CHECK(std::isinf(at_zero.lower));
    CHECK(at_zero.lower < 0.0);
    CHECK(std::isfinite(at_zero.upper));

    const auto at_n = exact::exact_confidence_interval(m, 10.0, 0.025, 0.025);
    CHECK(std::isfinite(at_n.lower));
    CHECK(std::isinf(at_n.upper));
    CHECK(at_n.upper > 0.0);

    auto pois = direct_model(model::Family::poisson, {0.0, 0.0}, 0.0);
    const auto pz = exact::exact_confidence_interval(pois, 0.0, 0.025, 0.025);
    CHECK(std::isinf(pz.lower));
    CHECK(std::isfinite(pz.upper));
}

TEST_CASE("CI inversion consistency with the exact test") {
    util::Rng rng(71);
    std::vector<double> g(30);
    for (auto& v : g) v = rng.normal(-0.6, 0.4);
    auto m = direct_model(model::Family::bernoulli, g, 0.0);
    const double o = 11.0;
    const auto ci = exact::exact_confidence_interval(m, o, 0.025, 0.025);
    for (double gamma : {0.8 * ci.lower + 0.2 * ci.upper, 0.5 * (ci.lower + ci.upper),
                         0.2 * ci.lower + 0.8 * ci.upper}) {
        auto shifted = m;
        shifted.gamma0 = gamma;
        CHECK(exact::exact_mid_p(shifted, o) >= 0.05);
    }
}

TEST_CASE("mid-p under a true null is near-uniform at n_i = 100") {
    util::Rng rng(3131);
    std::vector<double> pvals;
    for (int rep = 0; rep < 1000; ++rep) {
        // a fresh provider per replicate: heterogeneous means across the
        // population smooth out the per-provider discreteness
        std::vector<double> g(100);
        for (auto& v : g) v = rng.normal(-0.8, 0.5);
        auto m = direct_model(model::Family::bernoulli, g, 0.0);
        const auto probs = m.bernoulli_probs(0.0);
        double o = 0.0;
        for (double p : probs) o += rng.uniform() < p ? 1.0 : 0.0;
        pvals.push_back(exact::exact_mid_p(m, o));
    }
    std::sort(pvals.begin(), pvals.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < pvals.size(); ++i) {
        const double ecdf_hi = double(i + 1) / double(pvals.size());
        const double ecdf_lo = double(i) / double(pvals.size());
        ks = std::max(ks, std::fabs(ecdf_hi - pvals[i]));
        ks = std::max(ks, std::fabs(pvals[i] - ecdf_lo));
    }
    CHECK(ks < 0.05);
}

TEST_CASE("score and wald statistics: fixed points and hand fixture") {
    // all residuals zero -> score statistic 0, p = 1
    auto m = direct_model(model::Family::bernoulli, logit_g({0.5, 0.5, 0.5, 0.5}), 0.0);
    const std::vector<double> outcomes{0.5, 0.5, 0.5, 0.5};  // synthetic zero residuals
    const auto sc = exact::score_statistic(m, outcomes);
    CHECK(sc.statistic == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(sc.p_value == doctest::Approx(1.0).epsilon(1e-14));

    // hand-evaluated: probs {0.2, 0.6}, outcomes {1, 0}
    auto m2 = direct_model(model::Family::bernoulli, logit_g({0.2, 0.6}), 0.0);
    const std::vector<double> y2{1.0, 0.0};
    const double num = (1.0 - 0.2) + (0.0 - 0.6);
    const double den = std::sqrt(0.2 * 0.8 + 0.6 * 0.4);
    const auto sc2 = exact::score_statistic(m2, y2);
    CHECK(sc2.statistic == doctest::Approx(num / den).epsilon(1e-12));

    // wald is zero when the estimate sits at the norm
    const auto wd = exact::wald_statistic(-0.25, m2, -0.25);
    CHECK(wd.statistic == doctest::Approx(0.0).epsilon(1e-14));
    // hand fixture: info = sum p(1-p) at gamma_hat
    auto m3 = direct_model(model::Family::bernoulli, {0.0, 0.5}, 0.0);
    const double gamma_hat = 0.3;
    double info = 0.0;
    for (double gv : m3.g_values) {
        const double p = util::expit(gamma_hat + gv);
        info += p * (1.0 - p);
    }
    const auto wd2 = exact::wald_statistic(gamma_hat, m3, 0.1);
    CHECK(wd2.statistic == doctest::Approx((0.3 - 0.1) * std::sqrt(info)).epsilon(1e-12));
}

TEST_CASE("flag assignment truth table") {
    CHECK(exact::flag_provider(0.01, 1.4, 0.05) == exact::Flag::worse);
    CHECK(exact::flag_provider(0.20, 1.4, 0.05) == exact::Flag::expected);
    CHECK(exact::flag_provider(0.01, 0.6, 0.05) == exact::Flag::better);
    CHECK(exact::flag_provider(0.01, 1.0, 0.05) == exact::Flag::expected);
}

TEST_CASE("tau-scaled bernoulli means above one are a hard error") {
    auto m = direct_model(model::Family::bernoulli, logit_g({0.6, 0.3}), 0.0, 1.8);
    CHECK_THROWS_WITH_AS(static_cast<void>(m.bernoulli_probs(0.0)),
                         doctest::Contains("subject 0"), std::domain_error);
}
