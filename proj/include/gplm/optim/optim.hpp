#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gplm/model/network.hpp"
#include "gplm/model/panel.hpp"

namespace gplm::optim {

enum class Algorithm { amsgrad, adam, rmsprop, sgd };
enum class Sampling { stratified, simple };

Algorithm algorithm_from_string(const std::string& s);
std::string to_string(Algorithm a);
Sampling sampling_from_string(const std::string& s);
std::string to_string(Sampling s);

struct TrainConfig {
    Algorithm algorithm = Algorithm::amsgrad;
    Sampling sampling = Sampling::stratified;
    double train_fraction = 0.8;  // delta, share of rows entering the training set
    double batch_fraction = 0.1;  // xi, share of the training set drawn per iteration
    double learning_rate = 1e-3;  // eta; decayed as eta / sqrt(s)
    double beta1 = 0.9;
    double beta2 = 0.999;
    double rms_beta = 0.9;  // RMSProp's single decay
    double epsilon = 1e-8;
    std::size_t patience = 5;  // u consecutive worse validation evals stop training
    std::size_t max_iterations = 10000;
    std::size_t validate_every = 1;
    std::optional<model::DropoutSpec> dropout;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SplitSets {
    std::vector<model::ObsRef> train;
    std::vector<model::ObsRef> validation;
};

// Stratified split: provider i contributes max(1, floor(delta * n_i)) rows to
// the training set, the rest to validation (possibly none for tiny providers).
SplitSets split_train_validation(const model::ProviderPanel& panel, double delta,
                                 std::uint64_t seed);

// Training set grouped by provider for stratified draws.
struct TrainIndex {
    std::vector<std::vector<model::ObsRef>> by_provider;
    std::vector<model::ObsRef> pooled;

    static TrainIndex build(std::size_t provider_count,
                            const std::vector<model::ObsRef>& train);
};

// One mini-batch: stratified mode draws max(1, floor(xi*|T_i|)) rows per
// provider without replacement; simple mode draws floor(xi*|T|) from the pool.
// Fresh randomness per iteration, reproducible from (seed, iteration).
std::vector<model::ObsRef> sample_batch(const TrainIndex& train, double xi,
                                        Sampling sampling, std::uint64_t seed,
                                        std::uint64_t iteration);

// Running-minimum validation tracker: stop after `patience` consecutive
// evaluations above the best seen so far.
struct EarlyStopTracker {
    explicit EarlyStopTracker(std::size_t patience_) : patience(patience_) {}
    std::size_t patience;
    double best = std::numeric_limits<double>::infinity();
    std::size_t consecutive_worse = 0;

    struct Outcome {
        bool improved;
        bool stop;
    };
    Outcome observe(double loss) {
        if (loss < best) {
            best = loss;
            consecutive_worse = 0;
            return {true, false};
        }
        if (loss > best) {
            ++consecutive_worse;
            return {false, consecutive_worse >= patience};
        }
        consecutive_worse = 0;
        return {false, false};
    }
};

struct GradientVariance {
    double var_w = 0.0;
    double var_b = 0.0;
    double var_gamma = 0.0;
};

struct FitResult {
    model::NetworkParams params;  // parameters at the best validation loss
    double validation_loss = 0.0;
    std::size_t iterations = 0;
    double wall_seconds = 0.0;
    bool stopping_used_training_loss = false;  // validation set was empty
    std::vector<std::pair<GradientVariance, GradientVariance>>
        variance_trace;  // (stratified, simple) when tracing is enabled

    // tracing cadence, set via fit_with_trace
};

// Mean of -l_ij over an index set, inference-mode forward.
double evaluate_loss(const model::ProviderPanel& panel,
                     const model::NetworkParams& params,
                     const model::OutcomeFamily& family,
                     const std::vector<model::ObsRef>& rows,
                     const model::DropoutSpec* inference_dropout);

FitResult fit(const model::ProviderPanel& panel, const model::NetworkTopology& topology,
              const model::OutcomeFamily& family, const TrainConfig& config,
              std::size_t variance_trace_every = 0);

// Gradient-component variance of the mini-batch mean under the two sampling
// schemes, evaluated at `params` and split into weight / bias / provider-
// effect blocks. Both are deterministic given the parameters and use the
// batch only for its size: the stratified estimate weights each stratum's
// within-provider deviations at the proportional allocation, the simple one
// measures deviations of all training observations from the pooled mean.
// Their difference is the between-provider variance component.
GradientVariance gradient_variance(const model::ProviderPanel& panel,
                                   const model::NetworkParams& params,
                                   const model::OutcomeFamily& family,
                                   const TrainIndex& train,
                                   const std::vector<model::ObsRef>& batch,
                                   Sampling sampling);

}  // namespace gplm::optim
