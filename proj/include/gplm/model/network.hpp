#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gplm/model/panel.hpp"

namespace gplm::model {

enum class Activation { relu, identity };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Layer sizes [p_0, ..., p_{L+1}] with a scalar output, plus one activation
// per non-input layer. The output activation must be identity: the network
// emits a raw predictor that the link function interprets.
struct NetworkTopology {
    std::vector<std::size_t> layer_sizes;
    std::vector<Activation> activations;

    std::size_t hidden_layers() const { return layer_sizes.size() - 2; }
    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t affine_count() const { return layer_sizes.size() - 1; }
    void validate() const;

    static NetworkTopology dense_relu(std::size_t input_dim,
                                      const std::vector<std::size_t>& hidden);
};

struct DropoutSpec {
    double retention_prob = 1.0;  // applies to input and hidden layers
};

// Per-iteration node masks for layers 0..L (input and hidden).
struct DropoutMask {
    std::vector<std::vector<std::uint8_t>> keep;
};

// All trainable parameters in one flat block laid out as
// [gamma(m) | W1 | b1 | ... | W_{L+1} | b_{L+1}] so optimizer updates run as
// single fused sweeps. Weight matrices are row-major p_{l+1} x p_l.
class NetworkParams {
public:
    NetworkParams() = default;
    NetworkParams(NetworkTopology topology, std::size_t provider_count);

    const NetworkTopology& topology() const { return topology_; }
    std::size_t provider_count() const { return m_; }
    std::size_t size() const { return theta_.size(); }

    std::span<double> flat() { return theta_; }
    std::span<const double> flat() const { return theta_; }

    std::span<double> gamma() { return {theta_.data(), m_}; }
    std::span<const double> gamma() const { return {theta_.data(), m_}; }

    double* weight(std::size_t l) { return theta_.data() + w_offsets_[l]; }
    const double* weight(std::size_t l) const { return theta_.data() + w_offsets_[l]; }
    double* bias(std::size_t l) { return theta_.data() + b_offsets_[l]; }
    const double* bias(std::size_t l) const { return theta_.data() + b_offsets_[l]; }

    std::size_t weight_offset(std::size_t l) const { return w_offsets_[l]; }
    std::size_t bias_offset(std::size_t l) const { return b_offsets_[l]; }
    std::size_t gamma_size() const { return m_; }
    std::size_t weight_total() const { return w_total_; }
    std::size_t bias_total() const { return b_total_; }

    // true for indices belonging to a weight matrix (gamma and biases false)
    bool is_weight_index(std::size_t idx) const;

private:
    NetworkTopology topology_;
    std::size_t m_ = 0;
    std::vector<double> theta_;
    std::vector<std::size_t> w_offsets_;
    std::vector<std::size_t> b_offsets_;
    std::size_t w_total_ = 0;
    std::size_t b_total_ = 0;
};

// Scratch buffers reused across forward/backward calls; one per thread.
struct Workspace {
    std::vector<std::vector<double>> act;  // post-activation per layer, 0..L+1
    std::vector<double> delta_a;
    std::vector<double> delta_b;
    std::vector<double> scaled;

    void resize_for(const NetworkTopology& topology);
};

// Glorot-uniform weights, zero biases and provider effects; deterministic in seed.
NetworkParams init_params(const NetworkTopology& topology, std::size_t provider_count,
                          std::uint64_t rng_seed);

// Network output g(z). Training passes supply the iteration's dropout mask;
// inference passes scale activations by the retention probability instead
// (pass the spec of the dropout the parameters were trained with, if any).
double forward(const NetworkParams& params, std::span<const double> z,
               const DropoutMask* mask, const DropoutSpec* inference_dropout,
               Workspace& ws);

// gamma_i + g(z), inference mode
double predictor(const NetworkParams& params, std::size_t provider_index,
                 std::span<const double> z, const DropoutSpec* inference_dropout,
                 Workspace& ws);

// Accumulates the gradient of -l_ij into grad (layout of NetworkParams::flat).
// Only gamma_i and the shared network parameters receive contributions.
// Runs its own forward pass with the supplied mask.
void accumulate_backward(const NetworkParams& params, std::size_t provider_index,
                         std::span<const double> z, double y,
                         const OutcomeFamily& family, const DropoutMask* mask,
                         Workspace& ws, std::span<double> grad);

// Single-observation gradient (zeroed first); convenience for tests and
// the variance diagnostics.
std::vector<double> backward(const NetworkParams& params, std::size_t provider_index,
                             std::span<const double> z, double y,
                             const OutcomeFamily& family,
                             const DropoutMask* mask, Workspace& ws);

}  // namespace gplm::model
