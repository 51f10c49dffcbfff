#include "gplm/sim/runners.hpp"

#include <algorithm>
#include <cmath>

#include "gplm/exact/exact_test.hpp"
#include "gplm/util/parallel.hpp"
#include "gplm/util/rng.hpp"
#include "gplm/util/stats.hpp"

namespace gplm::sim {

namespace {

model::NetworkTopology glm_topology(std::size_t input_dim) {
    return model::NetworkTopology::dense_relu(input_dim, {});
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t x = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xc2b2ae3d27d4eb4fULL);
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    return x;
}

}  // namespace

std::vector<double> predict_probs(const model::ProviderPanel& panel,
                                  const model::NetworkParams& params,
                                  const model::DropoutSpec* inference_dropout) {
    std::vector<double> probs;
    probs.reserve(panel.total_rows());
    model::Workspace ws;
    for (std::uint32_t i = 0; i < panel.provider_count(); ++i) {
        const auto& blk = panel.providers[i];
        for (std::uint32_t j = 0; j < blk.size(); ++j) {
            const double omega =
                model::predictor(params, i, blk.row(j, panel.p0), inference_dropout, ws);
            probs.push_back(util::expit(omega));
        }
    }
    return probs;
}

namespace {

std::vector<double> flatten_outcomes(const model::ProviderPanel& panel) {
    std::vector<double> out;
    out.reserve(panel.total_rows());
    for (const auto& blk : panel.providers)
        out.insert(out.end(), blk.outcomes.begin(), blk.outcomes.end());
    return out;
}

}  // namespace

ModelComparisonResult run_model_comparison(const SimScenario& scenario,
                                           const model::NetworkTopology& topology,
                                           const optim::TrainConfig& config,
                                           std::size_t replicates) {
    struct Slot {
        Metrics gplm{}, glm{};
        bool gplm_ok = false, glm_ok = false;
    };
    std::vector<Slot> slots(replicates);
    const auto glm_topo = glm_topology(topology.input_dim());
    const model::OutcomeFamily family{model::Family::bernoulli, 0.0};

    util::parallel_for(replicates, [&](std::size_t r) {
        auto data = generate_panel(scenario, r);
        const auto outcomes = flatten_outcomes(data.panel);
        const model::DropoutSpec* drop = config.dropout ? &*config.dropout : nullptr;
        for (int which = 0; which < 2; ++which) {
            optim::TrainConfig cfg = config;
            cfg.rng_seed = mix_seed(scenario.seed, r + 1, which + 1);
            try {
                auto fit = optim::fit(data.panel, which == 0 ? topology : glm_topo,
                                      family, cfg);
                const auto probs = predict_probs(data.panel, fit.params, drop);
                const auto metrics = classification_metrics(probs, outcomes);
                if (which == 0) {
                    slots[r].gplm = metrics;
                    slots[r].gplm_ok = true;
                } else {
                    slots[r].glm = metrics;
                    slots[r].glm_ok = true;
                }
            } catch (const optim::FitError&) {
                // replicate excluded below, failure counted
            }
        }
    });

    ModelComparisonResult out;
    out.replicates = replicates;
    std::vector<Metrics> gplm_rows, glm_rows;
    for (const auto& slot : slots) {
        if (slot.gplm_ok) gplm_rows.push_back(slot.gplm);
        else ++out.gplm_failures;
        if (slot.glm_ok) glm_rows.push_back(slot.glm);
        else ++out.glm_failures;
    }
    out.gplm = MetricSummary::aggregate(gplm_rows);
    out.glm = MetricSummary::aggregate(glm_rows);
    return out;
}

std::vector<OptimizerComparisonRow> run_optimizer_comparison(
    const SimScenario& scenario, const model::NetworkTopology& topology,
    const optim::TrainConfig& config, const std::vector<optim::Algorithm>& algorithms,
    std::size_t panels, std::size_t fits_per_panel) {
    const model::OutcomeFamily family{model::Family::bernoulli, 0.0};
    const model::DropoutSpec* drop = config.dropout ? &*config.dropout : nullptr;

    struct PanelStats {
        std::vector<double> mean_seconds;
        std::vector<double> mean_iters;
        std::vector<Metrics> metrics;
    };
    std::vector<PanelStats> stats(panels);

    util::parallel_for(panels, [&](std::size_t p) {
        auto data = generate_panel(scenario, p);
        const auto outcomes = flatten_outcomes(data.panel);
        auto& slot = stats[p];
        slot.mean_seconds.resize(algorithms.size());
        slot.mean_iters.resize(algorithms.size());
        slot.metrics.resize(algorithms.size());
        for (std::size_t a = 0; a < algorithms.size(); ++a) {
            double total_seconds = 0.0, total_iters = 0.0;
            for (std::size_t f = 0; f < fits_per_panel; ++f) {
                optim::TrainConfig cfg = config;
                cfg.algorithm = algorithms[a];
                cfg.rng_seed = mix_seed(scenario.seed, p + 1, f + 1);
                auto fit = optim::fit(data.panel, topology, family, cfg);
                total_seconds += fit.wall_seconds;
                total_iters += double(fit.iterations);
                if (f == 0) {
                    const auto probs = predict_probs(data.panel, fit.params, drop);
                    slot.metrics[a] = classification_metrics(probs, outcomes);
                }
            }
            slot.mean_seconds[a] = total_seconds / double(fits_per_panel);
            slot.mean_iters[a] = total_iters / double(fits_per_panel);
        }
    });

    std::size_t ams_index = 0;
    for (std::size_t a = 0; a < algorithms.size(); ++a)
        if (algorithms[a] == optim::Algorithm::amsgrad) ams_index = a;

    std::vector<OptimizerComparisonRow> rows(algorithms.size());
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        rows[a].algorithm = algorithms[a];
        std::vector<Metrics> metric_rows;
        double speedup_time = 0.0, speedup_iters = 0.0, seconds = 0.0, iters = 0.0;
        for (std::size_t p = 0; p < panels; ++p) {
            metric_rows.push_back(stats[p].metrics[a]);
            speedup_time += stats[p].mean_seconds[a] / stats[p].mean_seconds[ams_index];
            speedup_iters += stats[p].mean_iters[a] / stats[p].mean_iters[ams_index];
            seconds += stats[p].mean_seconds[a];
            iters += stats[p].mean_iters[a];
        }
        rows[a].metrics = MetricSummary::aggregate(metric_rows);
        rows[a].mean_seconds = seconds / double(panels);
        rows[a].mean_iterations = iters / double(panels);
        rows[a].speedup_vs_amsgrad_time = speedup_time / double(panels);
        rows[a].speedup_vs_amsgrad_iters = speedup_iters / double(panels);
    }
    return rows;
}

SamplingVarianceResult run_sampling_variance(const SimScenario& scenario,
                                             const model::NetworkTopology& topology,
                                             const optim::TrainConfig& config,
                                             std::size_t replicates) {
    const model::OutcomeFamily family{model::Family::bernoulli, 0.0};
    SamplingVarianceResult out;
    out.rows.resize(replicates);

    util::parallel_for(replicates, [&](std::size_t r) {
        auto data = generate_panel(scenario, r);
        optim::TrainConfig cfg = config;
        cfg.rng_seed = mix_seed(scenario.seed, r + 1, 7);
        auto fit = optim::fit(data.panel, topology, family, cfg);

        auto split = optim::split_train_validation(data.panel, cfg.train_fraction,
                                                   cfg.rng_seed);
        auto train = optim::TrainIndex::build(data.panel.provider_count(), split.train);
        // one fresh draw at the fitted parameters; both schemes are assessed
        // at the same batch-size budget
        auto batch = optim::sample_batch(train, cfg.batch_fraction,
                                         optim::Sampling::simple, cfg.rng_seed,
                                         fit.iterations + 1);
        out.rows[r].stratified =
            optim::gradient_variance(data.panel, fit.params, family, train, batch,
                                     optim::Sampling::stratified);
        out.rows[r].simple =
            optim::gradient_variance(data.panel, fit.params, family, train, batch,
                                     optim::Sampling::simple);
    });

    double w = 0, b = 0, g = 0;
    for (const auto& row : out.rows) {
        if (row.stratified.var_w < row.simple.var_w) w += 1.0;
        if (row.stratified.var_b < row.simple.var_b) b += 1.0;
        if (row.stratified.var_gamma < row.simple.var_gamma) g += 1.0;
    }
    out.frac_lower_w = w / double(replicates);
    out.frac_lower_b = b / double(replicates);
    out.frac_lower_gamma = g / double(replicates);
    return out;
}

CalibrationPoint run_test_calibration(const SimScenario& base, double delta,
                                      const model::NetworkTopology& topology,
                                      const optim::TrainConfig& config, double alpha,
                                      std::size_t replicates) {
    SimScenario scenario = base;
    scenario.focal_delta = delta;
    if (!scenario.focal_size)
        throw std::invalid_argument("calibration scenario needs a focal provider size");
    const model::OutcomeFamily family{model::Family::bernoulli, 0.0};
    const model::DropoutSpec* drop = config.dropout ? &*config.dropout : nullptr;

    struct Tally {
        bool ok = false;
        bool ex2 = false, exl = false, exr = false;
        bool sc2 = false, scl = false, scr = false;
        bool wd2 = false, wdl = false, wdr = false;
    };
    std::vector<Tally> tallies(replicates);

    util::parallel_for(replicates, [&](std::size_t r) {
        auto data = generate_panel(scenario, r);
        optim::TrainConfig cfg = config;
        cfg.rng_seed = mix_seed(scenario.seed, r + 1, 13);
        optim::FitResult fit;
        try {
            fit = optim::fit(data.panel, topology, family, cfg);
        } catch (const optim::FitError&) {
            return;
        }
        const auto gamma = fit.params.gamma();
        const double norm =
            util::median_of(std::vector<double>(gamma.begin(), gamma.end()));

        auto null_model =
            exact::make_null_model(fit.params, data.panel, 0, family, norm, 1.0, drop);
        const auto& blk = data.panel.providers[0];
        double observed = 0.0;
        for (double y : blk.outcomes) observed += y;

        auto& t = tallies[r];
        const double g_sub = exact::sub_cdf(null_model, observed);
        const double mid_p = std::min(1.0, 2.0 * std::min(g_sub, 1.0 - g_sub));
        t.ex2 = mid_p < alpha;
        t.exl = g_sub < alpha / 2.0;
        t.exr = 1.0 - g_sub < alpha / 2.0;

        const double z = util::norm_quantile(1.0 - alpha / 2.0);
        const auto score = exact::score_statistic(null_model, blk.outcomes);
        t.sc2 = std::fabs(score.statistic) > z;
        t.scl = score.statistic < -z;
        t.scr = score.statistic > z;

        auto own_model = null_model;
        own_model.gamma0 = gamma[0];
        const auto wald = exact::wald_statistic(gamma[0], own_model, norm);
        t.wd2 = std::fabs(wald.statistic) > z;
        t.wdl = wald.statistic < -z;
        t.wdr = wald.statistic > z;
        t.ok = true;
    });

    CalibrationPoint point;
    point.delta = delta;
    std::size_t used = 0;
    for (const auto& t : tallies) {
        if (!t.ok) continue;
        ++used;
        point.exact.two_sided += t.ex2;
        point.exact.left += t.exl;
        point.exact.right += t.exr;
        point.score.two_sided += t.sc2;
        point.score.left += t.scl;
        point.score.right += t.scr;
        point.wald.two_sided += t.wd2;
        point.wald.left += t.wdl;
        point.wald.right += t.wdr;
    }
    point.replicates = used;
    if (used > 0) {
        const double inv = 1.0 / double(used);
        for (auto* rates : {&point.exact, &point.score, &point.wald}) {
            rates->two_sided *= inv;
            rates->left *= inv;
            rates->right *= inv;
        }
    }
    return point;
}

}  // namespace gplm::sim
