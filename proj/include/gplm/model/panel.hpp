#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gplm::model {

enum class Family { gaussian, bernoulli, poisson };

Family family_from_string(const std::string& s);
std::string to_string(Family f);

// Outcome family plus the Gaussian nuisance variance once estimated post-fit.
struct OutcomeFamily {
    Family kind = Family::bernoulli;
    double sigma2_hat = 0.0;  // > 0 required only where Gaussian inference needs it

    double h(double omega) const;
    double hdot(double omega) const;
};

struct LossTerm {
    double neg_loglik;  // -[y*omega - h(omega)]
    double residual;    // y - hdot(omega)
};

// Per-observation negative log-likelihood contribution and raw residual.
LossTerm loss_and_residual(const OutcomeFamily& family, double y, double omega);

// One provider's cluster: outcomes and an n_i x p0 row-major covariate matrix.
struct ProviderBlock {
    std::string provider_id;
    std::vector<double> outcomes;
    std::vector<double> covariates;

    std::size_t size() const { return outcomes.size(); }
    std::span<const double> row(std::size_t j, std::size_t p0) const {
        return {covariates.data() + j * p0, p0};
    }
};

// (provider, subject) coordinate used by index sets in splitting and sampling
struct ObsRef {
    std::uint32_t provider;
    std::uint32_t row;
    bool operator==(const ObsRef&) const = default;
};

struct ProviderPanel {
    std::vector<ProviderBlock> providers;
    std::size_t p0 = 0;

    std::size_t provider_count() const { return providers.size(); }
    std::size_t total_rows() const;
    std::span<const double> covariates_of(ObsRef ref) const {
        return providers[ref.provider].row(ref.row, p0);
    }
    double outcome_of(ObsRef ref) const {
        return providers[ref.provider].outcomes[ref.row];
    }

    // Enforces the panel invariants; throws std::invalid_argument with the
    // offending provider/row on violation.
    void validate(Family family) const;
};

}  // namespace gplm::model
