#pragma once

#include <vector>

#include "gplm/optim/optim.hpp"
#include "gplm/sim/metrics.hpp"
#include "gplm/sim/scenario.hpp"

namespace gplm::sim {

// Full-panel predicted probabilities from a fitted Bernoulli model.
std::vector<double> predict_probs(const model::ProviderPanel& panel,
                                  const model::NetworkParams& params,
                                  const model::DropoutSpec* inference_dropout);

struct ModelComparisonResult {
    MetricSummary gplm;
    MetricSummary glm;
    std::size_t replicates = 0;
    std::size_t gplm_failures = 0;
    std::size_t glm_failures = 0;
};

// Fits the network model and its zero-hidden-layer degenerate (the GLM) to
// each replicate and aggregates full-panel metrics.
ModelComparisonResult run_model_comparison(const SimScenario& scenario,
                                           const model::NetworkTopology& topology,
                                           const optim::TrainConfig& config,
                                           std::size_t replicates);

struct OptimizerComparisonRow {
    optim::Algorithm algorithm;
    MetricSummary metrics;
    double mean_seconds = 0.0;
    double mean_iterations = 0.0;
    // time-to-convergence of this algorithm relative to AMSGrad (>1 = slower),
    // averaged over panels; iteration-based twin is deterministic
    double speedup_vs_amsgrad_time = 1.0;
    double speedup_vs_amsgrad_iters = 1.0;
};

// Table-2 protocol: per panel, each algorithm is fitted `fits_per_panel`
// times; per-panel speedups are ratios of the per-panel mean times, averaged
// across panels. Metrics come from the first fit per panel.
std::vector<OptimizerComparisonRow> run_optimizer_comparison(
    const SimScenario& scenario, const model::NetworkTopology& topology,
    const optim::TrainConfig& config, const std::vector<optim::Algorithm>& algorithms,
    std::size_t panels, std::size_t fits_per_panel);

struct SamplingVarianceReplicate {
    optim::GradientVariance stratified;
    optim::GradientVariance simple;
};

struct SamplingVarianceResult {
    std::vector<SamplingVarianceReplicate> rows;
    // fraction of replicates with strictly smaller stratified variance
    double frac_lower_w = 0.0;
    double frac_lower_b = 0.0;
    double frac_lower_gamma = 0.0;
};

// Fits each replicate, then evaluates the two gradient-variance formulas at
// the fitted parameters with one fresh batch per sampling scheme.
SamplingVarianceResult run_sampling_variance(const SimScenario& scenario,
                                             const model::NetworkTopology& topology,
                                             const optim::TrainConfig& config,
                                             std::size_t replicates);

struct CalibrationRates {
    double two_sided = 0.0;
    double left = 0.0;
    double right = 0.0;
};

struct CalibrationPoint {
    double delta = 0.0;
    std::size_t replicates = 0;
    CalibrationRates exact;
    CalibrationRates score;
    CalibrationRates wald;
};

// Rejection rates of the three tests for the focal provider across replicates;
// delta = 0 measures type-I error, other deltas measure power.
CalibrationPoint run_test_calibration(const SimScenario& base, double delta,
                                      const model::NetworkTopology& topology,
                                      const optim::TrainConfig& config, double alpha,
                                      std::size_t replicates);

}  // namespace gplm::sim
