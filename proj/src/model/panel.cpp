#include "gplm/model/panel.hpp"

#include <cmath>
#include <stdexcept>

#include "gplm/util/stats.hpp"

namespace gplm::model {

Family family_from_string(const std::string& s) {
    if (s == "gaussian") return Family::gaussian;
    if (s == "bernoulli") return Family::bernoulli;
    if (s == "poisson") return Family::poisson;
    throw std::invalid_argument("unknown outcome family: " + s);
}

std::string to_string(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::bernoulli: return "bernoulli";
        case Family::poisson: return "poisson";
    }
    return "?";
}

double OutcomeFamily::h(double omega) const {
    switch (kind) {
        case Family::gaussian: return 0.5 * omega * omega;
        case Family::bernoulli: return util::log1pexp(omega);
        case Family::poisson: return std::exp(omega);
    }
    return 0.0;
}

double OutcomeFamily::hdot(double omega) const {
    switch (kind) {
        case Family::gaussian: return omega;
        case Family::bernoulli: return util::expit(omega);
        case Family::poisson: return std::exp(omega);
    }
    return 0.0;
}

LossTerm loss_and_residual(const OutcomeFamily& family, double y, double omega) {
    if (!std::isfinite(y) || !std::isfinite(omega))
        throw std::domain_error("loss_and_residual: non-finite input");
    return {family.h(omega) - y * omega, y - family.hdot(omega)};
}

std::size_t ProviderPanel::total_rows() const {
    std::size_t n = 0;
    for (const auto& p : providers) n += p.size();
    return n;
}

void ProviderPanel::validate(Family family) const {
    if (providers.empty()) throw std::invalid_argument("panel has no providers");
    for (std::size_t i = 0; i < providers.size(); ++i) {
        const auto& blk = providers[i];
        if (blk.size() == 0)
            throw std::invalid_argument("provider '" + blk.provider_id +
                                        "' has no observations");
        if (blk.covariates.size() != blk.size() * p0)
            throw std::invalid_argument("provider '" + blk.provider_id +
                                        "' covariate matrix shape mismatch");
        for (double z : blk.covariates)
            if (!std::isfinite(z))
                throw std::invalid_argument("provider '" + blk.provider_id +
                                            "' has non-finite covariate");
        for (std::size_t j = 0; j < blk.size(); ++j) {
            const double y = blk.outcomes[j];
            if (!std::isfinite(y))
                throw std::invalid_argument("provider '" + blk.provider_id +
                                            "' has non-finite outcome");
            if (family == Family::bernoulli && y != 0.0 && y != 1.0)
                throw std::invalid_argument(
                    "provider '" + blk.provider_id + "' row " + std::to_string(j) +
                    ": bernoulli outcome must be 0 or 1");
            if (family == Family::poisson && (y < 0.0 || y != std::floor(y)))
                throw std::invalid_argument(
                    "provider '" + blk.provider_id + "' row " + std::to_string(j) +
                    ": poisson outcome must be a nonnegative integer");
        }
    }
}

}  // namespace gplm::model
