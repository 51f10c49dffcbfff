#include "gplm/optim/optim.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>

#include "gplm/kernels/kernels.hpp"
#include "gplm/util/rng.hpp"

namespace gplm::optim {

namespace {
// disjoint stream ids carved out of the fit seed
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kBatchStreamBase = 1000;
constexpr std::uint64_t kMaskStreamBase = 0x80000000ULL;
}  // namespace

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "amsgrad") return Algorithm::amsgrad;
    if (s == "adam") return Algorithm::adam;
    if (s == "rmsprop") return Algorithm::rmsprop;
    if (s == "sgd") return Algorithm::sgd;
    throw std::invalid_argument("unknown algorithm: " + s);
}

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::amsgrad: return "amsgrad";
        case Algorithm::adam: return "adam";
        case Algorithm::rmsprop: return "rmsprop";
        case Algorithm::sgd: return "sgd";
    }
    return "?";
}

Sampling sampling_from_string(const std::string& s) {
    if (s == "stratified") return Sampling::stratified;
    if (s == "simple") return Sampling::simple;
    throw std::invalid_argument("unknown sampling scheme: " + s);
}

std::string to_string(Sampling s) {
    return s == Sampling::stratified ? "stratified" : "simple";
}

void TrainConfig::validate() const {
    if (!(train_fraction > 0.5 && train_fraction < 1.0))
        throw std::invalid_argument("train_fraction must lie in (0.5, 1)");
    if (!(batch_fraction > 0.0 && batch_fraction < 1.0))
        throw std::invalid_argument("batch_fraction must lie in (0, 1)");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in [0,1)");
    if (!(rms_beta >= 0.0 && rms_beta < 1.0))
        throw std::invalid_argument("rms_beta must lie in [0,1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (validate_every < 1) throw std::invalid_argument("validate_every must be >= 1");
    if (dropout && !(dropout->retention_prob > 0.0 && dropout->retention_prob <= 1.0))
        throw std::invalid_argument("dropout retention probability must lie in (0,1]");
}

SplitSets split_train_validation(const model::ProviderPanel& panel, double delta,
                                 std::uint64_t seed) {
    if (!(delta > 0.5 && delta < 1.0))
        throw std::invalid_argument("train fraction must lie in (0.5, 1)");
    util::Rng rng(seed, kSplitStream);
    SplitSets out;
    std::vector<std::uint32_t> rows;
    for (std::uint32_t i = 0; i < panel.provider_count(); ++i) {
        const std::size_t n_i = panel.providers[i].size();
        const std::size_t take =
            std::max<std::size_t>(1, static_cast<std::size_t>(delta * double(n_i)));
        rows.resize(n_i);
        for (std::uint32_t j = 0; j < n_i; ++j) rows[j] = j;
        rng.partial_shuffle(rows, take);
        for (std::size_t j = 0; j < n_i; ++j) {
            (j < take ? out.train : out.validation).push_back({i, rows[j]});
        }
    }
    return out;
}

TrainIndex TrainIndex::build(std::size_t provider_count,
                             const std::vector<model::ObsRef>& train) {
    TrainIndex idx;
    idx.by_provider.resize(provider_count);
    idx.pooled = train;
    for (const auto& ref : train) idx.by_provider[ref.provider].push_back(ref);
    return idx;
}

std::vector<model::ObsRef> sample_batch(const TrainIndex& train, double xi,
                                        Sampling sampling, std::uint64_t seed,
                                        std::uint64_t iteration) {
    if (!(xi > 0.0 && xi < 1.0))
        throw std::invalid_argument("batch fraction must lie in (0, 1)");
    util::Rng rng(seed, kBatchStreamBase + iteration);
    std::vector<model::ObsRef> batch;
    if (sampling == Sampling::stratified) {
        std::vector<std::uint32_t> rows;
        for (const auto& strat : train.by_provider) {
            if (strat.empty()) continue;
            const std::size_t take = std::max<std::size_t>(
                1, static_cast<std::size_t>(xi * double(strat.size())));
            rows.resize(strat.size());
            for (std::uint32_t j = 0; j < strat.size(); ++j) rows[j] = j;
            rng.partial_shuffle(rows, take);
            for (std::size_t j = 0; j < take; ++j) batch.push_back(strat[rows[j]]);
        }
    } else {
        const std::size_t take = std::max<std::size_t>(
            1, static_cast<std::size_t>(xi * double(train.pooled.size())));
        std::vector<std::uint32_t> rows(train.pooled.size());
        for (std::uint32_t j = 0; j < rows.size(); ++j) rows[j] = j;
        rng.partial_shuffle(rows, take);
        for (std::size_t j = 0; j < take; ++j) batch.push_back(train.pooled[rows[j]]);
    }
    return batch;
}

double evaluate_loss(const model::ProviderPanel& panel,
                     const model::NetworkParams& params,
                     const model::OutcomeFamily& family,
                     const std::vector<model::ObsRef>& rows,
                     const model::DropoutSpec* inference_dropout) {
    if (rows.empty()) throw std::invalid_argument("evaluate_loss: empty index set");
    model::Workspace ws;
    double total = 0.0;
    for (const auto& ref : rows) {
        const double omega =
            params.gamma()[ref.provider] +
            model::forward(params, panel.covariates_of(ref), nullptr, inference_dropout, ws);
        total += family.h(omega) - panel.outcome_of(ref) * omega;
    }
    return total / double(rows.size());
}

namespace {

model::DropoutMask sample_mask(const model::NetworkTopology& topology,
                               double retention, util::Rng& rng) {
    model::DropoutMask mask;
    const auto& sizes = topology.layer_sizes;
    mask.keep.resize(sizes.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        mask.keep[l].resize(sizes[l]);
        for (auto& keep : mask.keep[l])
            keep = rng.uniform() < retention ? 1 : 0;
    }
    return mask;
}

}  // namespace

FitResult fit(const model::ProviderPanel& panel, const model::NetworkTopology& topology,
              const model::OutcomeFamily& family, const TrainConfig& config,
              std::size_t variance_trace_every) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    topology.validate();
    if (topology.input_dim() != panel.p0)
        throw std::invalid_argument("topology input width does not match panel covariates");
    panel.validate(family.kind);

    const auto& kern = kern::active();
    const std::size_t m = panel.provider_count();

    auto split = split_train_validation(panel, config.train_fraction, config.rng_seed);
    const TrainIndex train = TrainIndex::build(m, split.train);
    const bool validation_empty = split.validation.empty();
    const auto& stopping_rows = validation_empty ? split.train : split.validation;

    model::NetworkParams params =
        model::init_params(topology, m, util::Rng(config.rng_seed, kInitStream).next_u64());
    const std::size_t dim = params.size();

    std::vector<double> grad(dim, 0.0);
    std::vector<double> mom_r(dim, 0.0);
    std::vector<double> mom_v(dim, 0.0);
    std::vector<double> mom_vhat(dim, 0.0);
    std::vector<double> checkpoint(params.flat().begin(), params.flat().end());

    const model::DropoutSpec* inference_dropout =
        config.dropout ? &*config.dropout : nullptr;

    model::Workspace ws;
    EarlyStopTracker tracker(config.patience);
    FitResult result;
    result.stopping_used_training_loss = validation_empty;

#ifndef NDEBUG
    std::vector<double> vhat_before(dim, 0.0);
#endif

    std::size_t s = 0;
    while (s < config.max_iterations) {
        ++s;
        auto batch = sample_batch(train, config.batch_fraction, config.sampling,
                                  config.rng_seed, s);

        model::DropoutMask mask;
        const bool use_mask = config.dropout && config.dropout->retention_prob < 1.0;
        if (use_mask) {
            util::Rng mask_rng(config.rng_seed, kMaskStreamBase + s);
            mask = sample_mask(topology, config.dropout->retention_prob, mask_rng);
        }

        std::fill(grad.begin(), grad.end(), 0.0);
        for (const auto& ref : batch)
            model::accumulate_backward(params, ref.provider, panel.covariates_of(ref),
                                       panel.outcome_of(ref), family,
                                       use_mask ? &mask : nullptr, ws, grad);
        kern.scale(grad.data(), 1.0 / double(batch.size()), dim);

        const double eta_s = config.learning_rate / std::sqrt(double(s));
        switch (config.algorithm) {
            case Algorithm::amsgrad:
#ifndef NDEBUG
                std::memcpy(vhat_before.data(), mom_vhat.data(), dim * sizeof(double));
#endif
                kern.amsgrad_step(params.flat().data(), mom_r.data(), mom_v.data(),
                                  mom_vhat.data(), grad.data(), config.beta1,
                                  config.beta2, eta_s, config.epsilon, dim);
#ifndef NDEBUG
                for (std::size_t i = 0; i < dim; ++i)
                    assert(mom_vhat[i] >= vhat_before[i]);
#endif
                break;
            case Algorithm::adam: {
                const double corr1 = 1.0 / (1.0 - std::pow(config.beta1, double(s)));
                const double corr2 = 1.0 / (1.0 - std::pow(config.beta2, double(s)));
                kern.adam_step(params.flat().data(), mom_r.data(), mom_v.data(),
                               grad.data(), config.beta1, config.beta2, corr1, corr2,
                               eta_s, config.epsilon, dim);
                break;
            }
            case Algorithm::rmsprop:
                kern.rmsprop_step(params.flat().data(), mom_v.data(), grad.data(),
                                  config.rms_beta, eta_s, config.epsilon, dim);
                break;
            case Algorithm::sgd:
                kern.sgd_step(params.flat().data(), grad.data(), eta_s, dim);
                break;
        }

        if (variance_trace_every > 0 && s % variance_trace_every == 0) {
            auto simple_batch = sample_batch(train, config.batch_fraction,
                                             Sampling::simple, config.rng_seed, s);
            result.variance_trace.emplace_back(
                gradient_variance(panel, params, family, train, batch,
                                  Sampling::stratified),
                gradient_variance(panel, params, family, train, simple_batch,
                                  Sampling::simple));
        }

        if (s % config.validate_every != 0 && s != config.max_iterations) continue;

        const double loss =
            evaluate_loss(panel, params, family, stopping_rows, inference_dropout);
        if (!std::isfinite(loss))
            throw FitError("non-finite loss at iteration " + std::to_string(s) +
                           "; the learning rate is likely too high");
        const auto outcome = tracker.observe(loss);
        if (outcome.improved)
            std::copy(params.flat().begin(), params.flat().end(), checkpoint.begin());
        if (outcome.stop) break;
    }

    std::copy(checkpoint.begin(), checkpoint.end(), params.flat().begin());
    result.params = std::move(params);
    result.validation_loss = tracker.best;
    result.iterations = s;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

GradientVariance gradient_variance(const model::ProviderPanel& panel,
                                   const model::NetworkParams& params,
                                   const model::OutcomeFamily& family,
                                   const TrainIndex& train,
                                   const std::vector<model::ObsRef>& batch,
                                   Sampling sampling) {
    const auto& kern = kern::active();
    const std::size_t m = panel.provider_count();
    const std::size_t dim = params.size();
    const double t_total = double(train.pooled.size());
    model::Workspace ws;

    std::vector<double> obs_grad(dim);
    auto block_sqdist = [&](const std::vector<double>& x, const std::vector<double>& mu,
                            GradientVariance& acc, double weight) {
        for (std::size_t l = 0; l < params.topology().affine_count(); ++l) {
            const std::size_t w_off = params.weight_offset(l);
            const std::size_t w_len = params.bias_offset(l) - w_off;
            const std::size_t b_off = params.bias_offset(l);
            const std::size_t b_len = params.topology().layer_sizes[l + 1];
            acc.var_w += weight * kern.sqdist(x.data() + w_off, mu.data() + w_off, w_len);
            acc.var_b += weight * kern.sqdist(x.data() + b_off, mu.data() + b_off, b_len);
        }
    };

    GradientVariance out;
    if (batch.empty()) throw std::invalid_argument("gradient_variance: empty batch");

    if (sampling == Sampling::stratified) {
        // Per-stratum weights |T_i| / |T_i(s)| evaluated at the proportional
        // allocation |T_i(s)| = xi_eff * |T_i| implied by the realized batch
        // size, so every stratum carries the common factor 1 / xi_eff. This is
        // the scale at which the stratified and simple estimates measure the
        // variance of batch means of equal size.
        const double xi_eff = double(batch.size()) / t_total;
        std::vector<double> mean(dim);
        for (std::size_t i = 0; i < m; ++i) {
            const auto& strat = train.by_provider[i];
            if (strat.empty()) continue;
            std::fill(mean.begin(), mean.end(), 0.0);
            for (const auto& ref : strat) {
                std::fill(obs_grad.begin(), obs_grad.end(), 0.0);
                model::accumulate_backward(params, ref.provider, panel.covariates_of(ref),
                                           panel.outcome_of(ref), family, nullptr, ws,
                                           {obs_grad.data(), dim});
                kern.axpy(1.0, obs_grad.data(), mean.data(), dim);
            }
            kern.scale(mean.data(), 1.0 / double(strat.size()), dim);

            const double weight = 1.0 / xi_eff;
            for (const auto& ref : strat) {
                std::fill(obs_grad.begin(), obs_grad.end(), 0.0);
                model::accumulate_backward(params, ref.provider, panel.covariates_of(ref),
                                           panel.outcome_of(ref), family, nullptr, ws,
                                           {obs_grad.data(), dim});
                block_sqdist(obs_grad, mean, out, weight);
                const double dev = obs_grad[i] - mean[i];
                out.var_gamma += weight * dev * dev;
            }
        }
        const double norm = 1.0 / (t_total * t_total);
        out.var_w *= norm;
        out.var_b *= norm;
        out.var_gamma *= norm;
        return out;
    }

    // Simple sampling: squared deviations of every training observation from
    // the full-training mean, normalized by 1/(|T| * |T_s|). This is the
    // variance of a size-|T_s| simple-sample batch mean; against the
    // stratified estimate above it differs by exactly the between-provider
    // variance component, so stratification never increases the estimate.
    std::vector<double> mean(dim, 0.0);
    for (const auto& ref : train.pooled) {
        std::fill(obs_grad.begin(), obs_grad.end(), 0.0);
        model::accumulate_backward(params, ref.provider, panel.covariates_of(ref),
                                   panel.outcome_of(ref), family, nullptr, ws,
                                   {obs_grad.data(), dim});
        kern.axpy(1.0, obs_grad.data(), mean.data(), dim);
    }
    kern.scale(mean.data(), 1.0 / t_total, dim);
    double gamma_mean_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) gamma_mean_sq += mean[i] * mean[i];

    for (const auto& ref : train.pooled) {
        std::fill(obs_grad.begin(), obs_grad.end(), 0.0);
        model::accumulate_backward(params, ref.provider, panel.covariates_of(ref),
                                   panel.outcome_of(ref), family, nullptr, ws,
                                   {obs_grad.data(), dim});
        block_sqdist(obs_grad, mean, out, 1.0);
        // the observation's gamma block is a single spike at its own provider
        const double dev = obs_grad[ref.provider] - mean[ref.provider];
        out.var_gamma +=
            dev * dev + gamma_mean_sq - mean[ref.provider] * mean[ref.provider];
    }
    const double norm = 1.0 / (t_total * double(batch.size()));
    out.var_w *= norm;
    out.var_b *= norm;
    out.var_gamma *= norm;
    return out;
}

}  // namespace gplm::optim
