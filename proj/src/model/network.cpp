#include "gplm/model/network.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "gplm/kernels/kernels.hpp"
#include "gplm/util/rng.hpp"

namespace gplm::model {

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
    return a == Activation::relu ? "relu" : "identity";
}

void NetworkTopology::validate() const {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("topology needs at least input and output layers");
    for (std::size_t s : layer_sizes)
        if (s < 1) throw std::invalid_argument("topology layer size must be >= 1");
    if (layer_sizes.back() != 1)
        throw std::invalid_argument("topology output layer must have size 1");
    if (activations.size() != layer_sizes.size() - 1)
        throw std::invalid_argument("topology needs one activation per non-input layer");
    if (activations.back() != Activation::identity)
        throw std::invalid_argument("topology output activation must be identity");
}

NetworkTopology NetworkTopology::dense_relu(std::size_t input_dim,
                                            const std::vector<std::size_t>& hidden) {
    NetworkTopology t;
    t.layer_sizes.push_back(input_dim);
    for (std::size_t h : hidden) t.layer_sizes.push_back(h);
    t.layer_sizes.push_back(1);
    for (std::size_t l = 0; l < hidden.size(); ++l)
        t.activations.push_back(Activation::relu);
    t.activations.push_back(Activation::identity);
    t.validate();
    return t;
}

NetworkParams::NetworkParams(NetworkTopology topology, std::size_t provider_count)
    : topology_(std::move(topology)), m_(provider_count) {
    topology_.validate();
    const auto& sizes = topology_.layer_sizes;
    std::size_t offset = m_;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        w_offsets_.push_back(offset);
        offset += sizes[l + 1] * sizes[l];
        w_total_ += sizes[l + 1] * sizes[l];
        b_offsets_.push_back(offset);
        offset += sizes[l + 1];
        b_total_ += sizes[l + 1];
    }
    theta_.assign(offset, 0.0);
}

bool NetworkParams::is_weight_index(std::size_t idx) const {
    for (std::size_t l = 0; l < w_offsets_.size(); ++l)
        if (idx >= w_offsets_[l] && idx < b_offsets_[l]) return true;
    return false;
}

void Workspace::resize_for(const NetworkTopology& topology) {
    const auto& sizes = topology.layer_sizes;
    act.resize(sizes.size());
    std::size_t widest = 0;
    for (std::size_t l = 0; l < sizes.size(); ++l) {
        act[l].resize(sizes[l]);
        widest = std::max(widest, sizes[l]);
    }
    delta_a.resize(widest);
    delta_b.resize(widest);
    scaled.resize(widest);
}

NetworkParams init_params(const NetworkTopology& topology, std::size_t provider_count,
                          std::uint64_t rng_seed) {
    topology.validate();
    NetworkParams params(topology, provider_count);
    util::Rng rng(rng_seed);
    const auto& sizes = topology.layer_sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double bound = std::sqrt(6.0) / std::sqrt(double(sizes[l] + sizes[l + 1]));
        double* w = params.weight(l);
        const std::size_t count = sizes[l + 1] * sizes[l];
        for (std::size_t k = 0; k < count; ++k) w[k] = rng.uniform(-bound, bound);
    }
    return params;
}

namespace {

void check_input(const NetworkParams& params, std::span<const double> z,
                 const DropoutMask* mask) {
    const auto& sizes = params.topology().layer_sizes;
    if (z.size() != sizes.front())
        throw std::invalid_argument("forward: covariate vector has length " +
                                    std::to_string(z.size()) + ", expected " +
                                    std::to_string(sizes.front()));
    if (mask) {
        if (mask->keep.size() != sizes.size() - 1)
            throw std::invalid_argument("forward: dropout mask layer count mismatch");
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
            if (mask->keep[l].size() != sizes[l])
                throw std::invalid_argument("forward: dropout mask width mismatch");
    }
}

inline void apply_mask(double* v, const std::vector<std::uint8_t>& keep) {
    for (std::size_t k = 0; k < keep.size(); ++k)
        if (!keep[k]) v[k] = 0.0;
}

}  // namespace

double forward(const NetworkParams& params, std::span<const double> z,
               const DropoutMask* mask, const DropoutSpec* inference_dropout,
               Workspace& ws) {
    check_input(params, z, mask);
    const auto& kern = kern::active();
    const auto& topo = params.topology();
    const auto& sizes = topo.layer_sizes;
    ws.resize_for(topo);

    std::memcpy(ws.act[0].data(), z.data(), z.size() * sizeof(double));
    if (mask) apply_mask(ws.act[0].data(), mask->keep[0]);

    const double upsilon = inference_dropout ? inference_dropout->retention_prob : 1.0;
    const bool scale_inputs = !mask && inference_dropout && upsilon != 1.0;

    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double* src = ws.act[l].data();
        if (scale_inputs) {
            std::memcpy(ws.scaled.data(), src, sizes[l] * sizeof(double));
            kern.scale(ws.scaled.data(), upsilon, sizes[l]);
            src = ws.scaled.data();
        }
        kern.affine(params.weight(l), src, params.bias(l), ws.act[l + 1].data(),
                    sizes[l + 1], sizes[l]);
        if (topo.activations[l] == Activation::relu)
            kern.relu(ws.act[l + 1].data(), sizes[l + 1]);
        if (mask && l + 2 < sizes.size()) apply_mask(ws.act[l + 1].data(), mask->keep[l + 1]);
    }
    return ws.act.back()[0];
}

double predictor(const NetworkParams& params, std::size_t provider_index,
                 std::span<const double> z, const DropoutSpec* inference_dropout,
                 Workspace& ws) {
    if (provider_index >= params.provider_count())
        throw std::out_of_range("predictor: provider index out of range");
    return params.gamma()[provider_index] +
           forward(params, z, nullptr, inference_dropout, ws);
}

void accumulate_backward(const NetworkParams& params, std::size_t provider_index,
                         std::span<const double> z, double y,
                         const OutcomeFamily& family, const DropoutMask* mask,
                         Workspace& ws, std::span<double> grad) {
    if (provider_index >= params.provider_count())
        throw std::out_of_range("backward: provider index out of range");
    const auto& kern = kern::active();
    const auto& topo = params.topology();
    const auto& sizes = topo.layer_sizes;

    const double g_value = forward(params, z, mask, nullptr, ws);
    const double omega = params.gamma()[provider_index] + g_value;
    const double residual = y - family.hdot(omega);

    // d(-l)/d omega = -(y - hdot(omega)); gamma_i enters omega additively
    grad[provider_index] += -residual;

    // delta_a holds d(-l)/d a^{(l+1)} while walking layers backwards
    ws.delta_a[0] = -residual;
    for (std::size_t l = sizes.size() - 2; l + 1 > 0; --l) {
        const std::size_t rows = sizes[l + 1];
        const std::size_t cols = sizes[l];
        // fold the activation derivative: relu'(pre) = [post > 0]
        if (topo.activations[l] == Activation::relu) {
            for (std::size_t k = 0; k < rows; ++k)
                if (ws.act[l + 1][k] <= 0.0) ws.delta_a[k] = 0.0;
        }
        kern.rank1_update(grad.data() + params.weight_offset(l), ws.delta_a.data(),
                          ws.act[l].data(), rows, cols);
        kern.axpy(1.0, ws.delta_a.data(), grad.data() + params.bias_offset(l), rows);
        if (l == 0) break;
        kern.matvec_t(params.weight(l), ws.delta_a.data(), ws.delta_b.data(), rows, cols);
        if (mask) apply_mask(ws.delta_b.data(), mask->keep[l]);
        std::swap(ws.delta_a, ws.delta_b);
    }
}

std::vector<double> backward(const NetworkParams& params, std::size_t provider_index,
                             std::span<const double> z, double y,
                             const OutcomeFamily& family, const DropoutMask* mask,
                             Workspace& ws) {
    std::vector<double> grad(params.size(), 0.0);
    accumulate_backward(params, provider_index, z, y, family, mask, ws, grad);
    return grad;
}

}  // namespace gplm::model
