#include "gplm/sim/scenario.hpp"

#include <cmath>
#include <stdexcept>

#include "gplm/util/rng.hpp"
#include "gplm/util/stats.hpp"

namespace gplm::sim {

namespace {
constexpr std::uint64_t kScenarioStream = 0xA0;
constexpr std::uint64_t kReplicateStreamBase = 0xB0000000ULL;
constexpr std::size_t kCovariateDim = 3;
}  // namespace

TruthKind truth_from_string(const std::string& s) {
    if (s == "linear") return TruthKind::linear;
    if (s == "nonlinear") return TruthKind::nonlinear;
    if (s == "weak-nonlinear" || s == "weak") return TruthKind::weak_nonlinear;
    throw std::invalid_argument("unknown truth kind: " + s);
}

std::string to_string(TruthKind t) {
    switch (t) {
        case TruthKind::linear: return "linear";
        case TruthKind::nonlinear: return "nonlinear";
        case TruthKind::weak_nonlinear: return "weak-nonlinear";
    }
    return "?";
}

double truth_value(TruthKind truth, std::span<const double> z) {
    const double linear = z[0] + 0.5 * z[1] - z[2];
    switch (truth) {
        case TruthKind::linear:
            return linear;
        case TruthKind::nonlinear:
            return linear + 0.2 * z[0] * z[1] + 0.8 * z[1] * z[1] +
                   0.4 * std::cos(z[0]) * std::sin(z[2]);
        case TruthKind::weak_nonlinear:
            return linear + 0.01 * z[0] * z[1] + 0.01 * z[1] * z[1] +
                   0.1 * std::cos(z[0]) * std::sin(z[2]);
    }
    return 0.0;
}

void SimScenario::validate() const {
    if (provider_count < 1) throw std::invalid_argument("scenario: provider_count >= 1");
    if (!(mean_provider_size > double(min_provider_size) * 0.5))
        throw std::invalid_argument("scenario: mean provider size too small for the floor");
    if (!(correlation >= 0.0 && correlation <= 0.9))
        throw std::invalid_argument("scenario: rho must lie in [0, 0.9]");
    if (!(effect_sd > 0.0)) throw std::invalid_argument("scenario: effect sd must be > 0");
    if (focal_size && *focal_size < 1)
        throw std::invalid_argument("scenario: focal size must be >= 1");
}

namespace {

// lower-triangular Cholesky of the 3x3 covariate covariance Omega - rho^2 J
struct Chol3 {
    double l[3][3];
};

Chol3 cholesky_cov(double rho) {
    const double diag = 1.0 - rho * rho;
    const double off = rho - rho * rho;
    double a[3][3] = {{diag, off, off}, {off, diag, off}, {off, off, diag}};
    Chol3 c{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[i][j];
            for (int k = 0; k < j; ++k) sum -= c.l[i][k] * c.l[j][k];
            if (i == j) {
                if (sum <= 0.0)
                    throw std::invalid_argument(
                        "scenario: covariate covariance is not positive definite");
                c.l[i][j] = std::sqrt(sum);
            } else {
                c.l[i][j] = sum / c.l[j][j];
            }
        }
    }
    return c;
}

}  // namespace

GeneratedPanel generate_panel(const SimScenario& scenario, std::size_t replicate_index) {
    scenario.validate();
    const std::size_t m = scenario.provider_count;
    const double mu = scenario.effect_mean;
    const double sigma = scenario.effect_sd;
    const double rho = scenario.correlation;
    const Chol3 chol = cholesky_cov(rho);

    // effects and provider sizes: one draw per scenario, shared by replicates
    util::Rng scenario_rng(scenario.seed, kScenarioStream);
    std::vector<double> gamma(m);
    for (std::size_t i = 0; i < m; ++i) gamma[i] = scenario_rng.normal(mu, sigma);
    std::vector<long> sizes(m);
    for (std::size_t i = 0; i < m; ++i) {
        long n = scenario_rng.poisson(scenario.mean_provider_size);
        sizes[i] = std::max(n, scenario.min_provider_size);
    }
    if (scenario.focal_size) {
        sizes[0] = *scenario.focal_size;
        gamma[0] = mu + scenario.focal_delta * sigma;
    }

    util::Rng rng(scenario.seed, kReplicateStreamBase + replicate_index);
    GeneratedPanel out;
    out.true_gamma = gamma;
    out.panel.p0 = kCovariateDim;
    out.panel.providers.resize(m);
    out.true_g_values.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        auto& blk = out.panel.providers[i];
        blk.provider_id = "P" + std::to_string(i + 1);
        const long n_i = sizes[i];
        blk.outcomes.resize(n_i);
        blk.covariates.resize(std::size_t(n_i) * kCovariateDim);
        out.true_g_values[i].resize(n_i);
        const double mean_shift = (rho / sigma) * (gamma[i] - mu);
        for (long j = 0; j < n_i; ++j) {
            double e[3] = {rng.normal(), rng.normal(), rng.normal()};
            double* z = blk.covariates.data() + std::size_t(j) * kCovariateDim;
            for (int r = 0; r < 3; ++r) {
                double v = mean_shift;
                for (int k = 0; k <= r; ++k) v += chol.l[r][k] * e[k];
                z[r] = v;
            }
            const double g = truth_value(scenario.truth, {z, kCovariateDim});
            out.true_g_values[i][j] = g;
            const double p = util::expit(gamma[i] + g);
            blk.outcomes[j] = rng.uniform() < p ? 1.0 : 0.0;
        }
    }
    return out;
}

}  // namespace gplm::sim
