#include "gplm/io/reports.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "gplm/io/csv.hpp"
#include "gplm/util/parallel.hpp"
#include "gplm/util/stats.hpp"

namespace gplm::io {

double population_norm(std::span<const double> gamma, const std::string& norm) {
    if (norm == "median")
        return util::median_of(std::vector<double>(gamma.begin(), gamma.end()));
    if (norm == "mean")
        return std::accumulate(gamma.begin(), gamma.end(), 0.0) / double(gamma.size());
    double v = 0.0;
    const auto res = std::from_chars(norm.data(), norm.data() + norm.size(), v);
    if (res.ec != std::errc{} || res.ptr != norm.data() + norm.size())
        throw std::invalid_argument("population norm must be median, mean, or a number");
    return v;
}

namespace {

// panel provider -> dense artifact index; every panel provider must be known
std::vector<std::size_t> artifact_index_map(const ModelArtifact& artifact,
                                            const model::ProviderPanel& panel) {
    std::unordered_map<std::string, std::size_t> lookup;
    for (std::size_t i = 0; i < artifact.provider_ids.size(); ++i)
        lookup.emplace(artifact.provider_ids[i], i);
    std::vector<std::size_t> map(panel.provider_count());
    for (std::size_t i = 0; i < panel.provider_count(); ++i) {
        const auto it = lookup.find(panel.providers[i].provider_id);
        if (it == lookup.end())
            throw std::invalid_argument("panel provider '" +
                                        panel.providers[i].provider_id +
                                        "' is not present in the model artifact");
        map[i] = it->second;
    }
    return map;
}

const model::DropoutSpec* inference_dropout(const ModelArtifact& artifact) {
    return artifact.dropout ? &*artifact.dropout : nullptr;
}

}  // namespace

std::vector<ProviderReportRow> build_profile_report(const ModelArtifact& artifact,
                                                    const model::ProviderPanel& panel,
                                                    const ProfileOptions& options) {
    if (!(options.alpha > 0.0 && options.alpha < 1.0))
        throw std::invalid_argument("profile: alpha must lie in (0,1)");
    const auto index_map = artifact_index_map(artifact, panel);
    const double norm = population_norm(artifact.params.gamma(), options.norm);
    const bool bernoulli = artifact.family.kind == model::Family::bernoulli;

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < panel.provider_count(); ++i)
        if (panel.providers[i].size() >= options.min_provider_size) kept.push_back(i);

    std::vector<ProviderReportRow> rows(kept.size());
    util::parallel_for(kept.size(), [&](std::size_t k) {
        const std::size_t i = kept[k];
        const auto& blk = panel.providers[i];
        auto null_model = exact::make_null_model(artifact.params, panel, i,
                                                 artifact.family, norm, 1.0,
                                                 inference_dropout(artifact));
        ProviderReportRow row;
        row.provider_id = blk.provider_id;
        row.n = blk.size();
        row.observed = std::accumulate(blk.outcomes.begin(), blk.outcomes.end(), 0.0);
        row.expected = null_model.mean_total(norm);
        row.srr = funnel::standardized_ratio(row.observed, row.expected);
        row.mid_p = exact::exact_mid_p(null_model, row.observed);
        row.ci = exact::exact_confidence_interval(null_model, row.observed,
                                                  options.alpha1, options.alpha2);
        row.flag_exact = exact::flag_provider(row.mid_p, row.srr, options.alpha);
        if (bernoulli) {
            row.score_p = exact::score_statistic(null_model, blk.outcomes).p_value;
            row.flag_score = exact::flag_provider(row.score_p, row.srr, options.alpha);
            const double gamma_hat = artifact.params.gamma()[index_map[i]];
            auto own = null_model;
            own.gamma0 = gamma_hat;
            row.wald_p = exact::wald_statistic(gamma_hat, own, norm).p_value;
        }
        rows[k] = std::move(row);
    });
    return rows;
}

std::string profile_report_csv(const std::vector<ProviderReportRow>& rows) {
    std::string text =
        "provider_id,n_i,O_i,E_i,SRR,mid_p,score_p,wald_p,ci_lower,ci_upper,"
        "flag_exact,flag_score\n";
    for (const auto& row : rows) {
        text += join_csv({row.provider_id, std::to_string(row.n), fmt_number(row.observed),
                          fmt_number(row.expected), fmt_number(row.srr),
                          fmt_number(row.mid_p), fmt_number(row.score_p),
                          fmt_number(row.wald_p), fmt_number(row.ci.lower),
                          fmt_number(row.ci.upper), exact::to_string(row.flag_exact),
                          exact::to_string(row.flag_score)});
    }
    return text;
}

FunnelReport build_funnel_report(const ModelArtifact& artifact,
                                 const model::ProviderPanel& panel,
                                 const FunnelOptions& options) {
    if (options.targets.empty() || options.alphas.empty())
        throw std::invalid_argument("funnel: needs at least one target and alpha");
    (void)artifact_index_map(artifact, panel);  // validates id coverage
    const double norm = population_norm(artifact.params.gamma(), options.norm);

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < panel.provider_count(); ++i)
        if (panel.providers[i].size() >= options.min_provider_size) kept.push_back(i);

    FunnelReport report;
    report.targets = options.targets;
    report.alphas = options.alphas;
    report.overdispersion = options.overdispersion;
    report.rows.resize(kept.size());

    const std::size_t n_t = options.targets.size();
    const std::size_t n_a = options.alphas.size();

    std::vector<exact::ProviderNullModel> models(kept.size());
    std::vector<double> observed(kept.size());
    util::parallel_for(kept.size(), [&](std::size_t k) {
        const std::size_t i = kept[k];
        const auto& blk = panel.providers[i];
        models[k] = exact::make_null_model(artifact.params, panel, i, artifact.family,
                                           norm, 1.0, inference_dropout(artifact));
        observed[k] =
            std::accumulate(blk.outcomes.begin(), blk.outcomes.end(), 0.0);
        auto& row = report.rows[k];
        row.provider_id = blk.provider_id;
        const double expected = models[k].mean_total(norm);
        row.srr = funnel::standardized_ratio(observed[k], expected);
        row.precision_by_target.resize(n_t);
        row.limits.resize(n_t * n_a);
        for (std::size_t t = 0; t < n_t; ++t) {
            row.precision_by_target[t] =
                funnel::precision(models[k], options.targets[t]).precision;
            for (std::size_t a = 0; a < n_a; ++a)
                row.limits[t * n_a + a] = funnel::interpolated_control_limits(
                    models[k], options.targets[t], options.alphas[a] / 2.0,
                    options.alphas[a] / 2.0);
        }
    });

    if (options.overdispersion) {
        report.fits.resize(n_t);
        for (auto& row : report.rows) row.adj_limits.resize(n_t * n_a);
        for (std::size_t t = 0; t < n_t; ++t) {
            const double tau = options.targets[t];
            std::vector<double> z(kept.size()), slopes(kept.size());
            for (std::size_t k = 0; k < kept.size(); ++k) {
                auto scaled = models[k];
                scaled.tau = tau;
                z[k] = funnel::provider_z_score(scaled, observed[k]);
                slopes[k] = funnel::precision(models[k], tau).variance;
            }
            report.fits[t] =
                funnel::fit_empirical_null(z, slopes, options.central_quantile);
            util::parallel_for(kept.size(), [&](std::size_t k) {
                for (std::size_t a = 0; a < n_a; ++a)
                    report.rows[k].adj_limits[t * n_a + a] =
                        funnel::adjusted_control_limits(models[k], tau,
                                                        options.alphas[a],
                                                        report.fits[t]);
            });
        }
    }
    return report;
}

namespace {

std::string limit_suffix(double tau, double alpha) {
    return "_t" + fmt_number(tau) + "_a" + fmt_number(alpha);
}

}  // namespace

std::string funnel_report_csv(const FunnelReport& report) {
    std::string header = "provider_id,precision,SRR";
    for (std::size_t t = 0; t < report.targets.size(); ++t)
        for (double a : report.alphas) {
            header += ",lower" + limit_suffix(report.targets[t], a);
            header += ",upper" + limit_suffix(report.targets[t], a);
        }
    if (report.overdispersion)
        for (std::size_t t = 0; t < report.targets.size(); ++t)
            for (double a : report.alphas) {
                header += ",adj_lower" + limit_suffix(report.targets[t], a);
                header += ",adj_upper" + limit_suffix(report.targets[t], a);
            }
    std::string text = header + "\n";
    for (const auto& row : report.rows) {
        std::vector<std::string> cells{row.provider_id,
                                       fmt_number(row.precision_by_target[0]),
                                       fmt_number(row.srr)};
        for (const auto& lim : row.limits) {
            cells.push_back(fmt_number(lim.lower));
            cells.push_back(fmt_number(lim.upper));
        }
        for (const auto& lim : row.adj_limits) {
            cells.push_back(fmt_number(lim.lower));
            cells.push_back(fmt_number(lim.upper));
        }
        text += join_csv(cells);
    }
    return text;
}

std::string funnel_svg(const FunnelReport& report, std::size_t target_index) {
    if (target_index >= report.targets.size())
        throw std::out_of_range("funnel_svg: target index out of range");
    const double tau = report.targets[target_index];
    const std::size_t n_a = report.alphas.size();

    const double width = 860, height = 600;
    const double ml = 70, mr = 30, mt = 30, mb = 50;

    double max_rho = 1.0, max_t = 2.0;
    for (const auto& row : report.rows) {
        max_rho = std::max(max_rho, row.precision_by_target[target_index]);
        max_t = std::max(max_t, row.srr);
    }
    max_rho *= 1.05;
    max_t = std::min(4.0, max_t * 1.1);

    auto px = [&](double rho) {
        return ml + (width - ml - mr) * rho / max_rho;
    };
    auto py = [&](double t) {
        const double clamped = std::clamp(t, 0.0, max_t);
        return height - mb - (height - mt - mb) * clamped / max_t;
    };

    std::vector<std::size_t> order(report.rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return report.rows[a].precision_by_target[target_index] <
               report.rows[b].precision_by_target[target_index];
    });

    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_number(width) +
        "\" height=\"" + fmt_number(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // axes
    svg += "<line x1=\"" + fmt_number(ml) + "\" y1=\"" + fmt_number(height - mb) +
           "\" x2=\"" + fmt_number(width - mr) + "\" y2=\"" + fmt_number(height - mb) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt_number(ml) + "\" y1=\"" + fmt_number(mt) + "\" x2=\"" +
           fmt_number(ml) + "\" y2=\"" + fmt_number(height - mb) +
           "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt_number(width / 2) + "\" y=\"" + fmt_number(height - 12) +
           "\" text-anchor=\"middle\" font-size=\"14\">precision</text>\n";
    svg += "<text x=\"18\" y=\"" + fmt_number(height / 2) +
           "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 " +
           fmt_number(height / 2) + ")\">standardized ratio</text>\n";
    // target line
    svg += "<line x1=\"" + fmt_number(ml) + "\" y1=\"" + fmt_number(py(tau)) +
           "\" x2=\"" + fmt_number(width - mr) + "\" y2=\"" + fmt_number(py(tau)) +
           "\" stroke=\"gray\" stroke-dasharray=\"2,4\"/>\n";

    const char* palette[] = {"#1b6ca8", "#a82a1b", "#3c8c40", "#8c3c88"};
    auto polyline = [&](std::size_t a, bool lower, bool adjusted) {
        std::string pts;
        for (std::size_t idx : order) {
            const auto& row = report.rows[idx];
            const auto& lims = adjusted ? row.adj_limits : row.limits;
            const auto& lim = lims[target_index * n_a + a];
            pts += fmt_number(px(row.precision_by_target[target_index])) + "," +
                   fmt_number(py(lower ? lim.lower : lim.upper)) + " ";
        }
        const std::string dash = adjusted ? " stroke-dasharray=\"6,3\"" : "";
        return "<polyline fill=\"none\" stroke=\"" +
               std::string(palette[a % 4]) + "\"" + dash + " points=\"" + pts +
               "\"/>\n";
    };
    for (std::size_t a = 0; a < n_a; ++a) {
        svg += polyline(a, true, false);
        svg += polyline(a, false, false);
        if (report.overdispersion) {
            svg += polyline(a, true, true);
            svg += polyline(a, false, true);
        }
    }
    for (const auto& row : report.rows) {
        svg += "<circle cx=\"" + fmt_number(px(row.precision_by_target[target_index])) +
               "\" cy=\"" + fmt_number(py(row.srr)) +
               "\" r=\"2\" fill=\"black\" fill-opacity=\"0.5\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string model_comparison_csv(const sim::ModelComparisonResult& result) {
    std::string text = "model,metric,mean,sd,replicates_used\n";
    const auto emit = [&](const char* name, const sim::MetricSummary& s) {
        for (std::size_t k = 0; k < sim::Metrics::kCount; ++k)
            text += join_csv({name, sim::Metrics::name(k), fmt_number(s.mean[k]),
                              fmt_number(s.sd[k]), std::to_string(s.counted[k])});
    };
    emit("gplm", result.gplm);
    emit("glm", result.glm);
    return text;
}

std::string optimizer_metrics_csv(const std::vector<sim::OptimizerComparisonRow>& rows) {
    std::string text = "algorithm,metric,mean,sd\n";
    for (const auto& row : rows) {
        const std::string alg = optim::to_string(row.algorithm);
        for (std::size_t k = 0; k < sim::Metrics::kCount; ++k)
            text += join_csv({alg, sim::Metrics::name(k), fmt_number(row.metrics.mean[k]),
                              fmt_number(row.metrics.sd[k])});
        text += join_csv({alg, "mean_iterations", fmt_number(row.mean_iterations), "0"});
        text += join_csv(
            {alg, "speedup_iters_vs_amsgrad", fmt_number(row.speedup_vs_amsgrad_iters), "0"});
    }
    return text;
}

std::string optimizer_timing_csv(const std::vector<sim::OptimizerComparisonRow>& rows) {
    std::string text = "algorithm,mean_seconds,speedup_time_vs_amsgrad\n";
    for (const auto& row : rows)
        text += join_csv({optim::to_string(row.algorithm), fmt_number(row.mean_seconds),
                          fmt_number(row.speedup_vs_amsgrad_time)});
    return text;
}

std::string sampling_variance_csv(const sim::SamplingVarianceResult& result) {
    std::string text =
        "replicate,strat_var_w,strat_var_b,strat_var_gamma,"
        "simple_var_w,simple_var_b,simple_var_gamma\n";
    for (std::size_t r = 0; r < result.rows.size(); ++r) {
        const auto& row = result.rows[r];
        text += join_csv({std::to_string(r), fmt_number(row.stratified.var_w),
                          fmt_number(row.stratified.var_b),
                          fmt_number(row.stratified.var_gamma),
                          fmt_number(row.simple.var_w), fmt_number(row.simple.var_b),
                          fmt_number(row.simple.var_gamma)});
    }
    text += join_csv({"frac_stratified_lower", fmt_number(result.frac_lower_w),
                      fmt_number(result.frac_lower_b),
                      fmt_number(result.frac_lower_gamma), "", "", ""});
    return text;
}

std::string calibration_csv(const std::vector<sim::CalibrationPoint>& points,
                            long focal_size, double rho, double alpha) {
    std::string text =
        "test,delta,n1,rho,alpha,replicates,two_sided,left,right\n";
    for (const auto& p : points) {
        const auto emit = [&](const char* test, const sim::CalibrationRates& r) {
            text += join_csv({test, fmt_number(p.delta), std::to_string(focal_size),
                              fmt_number(rho), fmt_number(alpha),
                              std::to_string(p.replicates), fmt_number(r.two_sided),
                              fmt_number(r.left), fmt_number(r.right)});
        };
        emit("exact", p.exact);
        emit("score", p.score);
        emit("wald", p.wald);
    }
    return text;
}

}  // namespace gplm::io
