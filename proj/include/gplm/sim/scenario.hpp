#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gplm/model/panel.hpp"

namespace gplm::sim {

enum class TruthKind { linear, nonlinear, weak_nonlinear };

TruthKind truth_from_string(const std::string& s);
std::string to_string(TruthKind t);

// true covariate-effect surface on the 3-dimensional covariate vector
double truth_value(TruthKind truth, std::span<const double> z);

// Clustered Bernoulli data-generating mechanism: provider sizes Poisson(nu)
// truncated below, effects N(mu, sigma^2) drawn once per scenario, covariates
// correlated with the provider effect through rho, outcomes
// Bernoulli(expit(gamma_i + g*(Z))). The optional focal override pins provider
// 0's size and sets gamma_0 = mu + delta * sigma for power studies.
struct SimScenario {
    std::size_t provider_count = 100;
    double mean_provider_size = 50.0;
    long min_provider_size = 20;
    double effect_mean = -1.0116009116784799;  // log(4/11)
    double effect_sd = 0.4;
    double correlation = 0.0;
    TruthKind truth = TruthKind::nonlinear;
    std::optional<long> focal_size;
    double focal_delta = 0.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct GeneratedPanel {
    model::ProviderPanel panel;
    std::vector<double> true_gamma;
    std::vector<std::vector<double>> true_g_values;
};

// Effects and sizes are functions of the scenario seed alone; covariates and
// outcomes are fresh per replicate.
GeneratedPanel generate_panel(const SimScenario& scenario, std::size_t replicate_index);

}  // namespace gplm::sim
