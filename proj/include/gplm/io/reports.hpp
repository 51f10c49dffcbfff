#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gplm/exact/exact_test.hpp"
#include "gplm/funnel/funnel.hpp"
#include "gplm/io/artifact.hpp"
#include "gplm/sim/runners.hpp"

namespace gplm::io {

// population norm f(gamma_hat): "median", "mean", or a numeric constant
double population_norm(std::span<const double> gamma, const std::string& norm);

struct ProfileOptions {
    double alpha = 0.05;
    double alpha1 = 0.025;
    double alpha2 = 0.025;
    std::string norm = "median";
    std::size_t min_provider_size = 15;

    void set_alpha(double a) {
        alpha = a;
        alpha1 = a / 2.0;
        alpha2 = a / 2.0;
    }
};

struct ProviderReportRow {
    std::string provider_id;
    std::size_t n = 0;
    double observed = 0.0;
    double expected = 0.0;
    double srr = 0.0;
    double mid_p = 1.0;
    double score_p = std::numeric_limits<double>::quiet_NaN();
    double wald_p = std::numeric_limits<double>::quiet_NaN();
    exact::ConfidenceInterval ci;
    exact::Flag flag_exact = exact::Flag::expected;
    exact::Flag flag_score = exact::Flag::expected;
};

std::vector<ProviderReportRow> build_profile_report(const ModelArtifact& artifact,
                                                    const model::ProviderPanel& panel,
                                                    const ProfileOptions& options);

std::string profile_report_csv(const std::vector<ProviderReportRow>& rows);

struct FunnelOptions {
    std::vector<double> targets{1.0};
    std::vector<double> alphas{0.05};
    bool overdispersion = false;
    std::string norm = "median";
    std::size_t min_provider_size = 15;
    double central_quantile = 0.25;
};

struct FunnelRow {
    std::string provider_id;
    double srr = 0.0;
    std::vector<double> precision_by_target;
    std::vector<funnel::ControlLimits> limits;      // [target * alphas + alpha]
    std::vector<funnel::ControlLimits> adj_limits;  // same indexing when enabled
};

struct FunnelReport {
    std::vector<double> targets;
    std::vector<double> alphas;
    bool overdispersion = false;
    std::vector<funnel::OverdispersionFit> fits;  // one per target when enabled
    std::vector<FunnelRow> rows;
};

FunnelReport build_funnel_report(const ModelArtifact& artifact,
                                 const model::ProviderPanel& panel,
                                 const FunnelOptions& options);

std::string funnel_report_csv(const FunnelReport& report);

// scatter of SRR against precision with limit polylines for one target
std::string funnel_svg(const FunnelReport& report, std::size_t target_index);

// simulation-suite tables
std::string model_comparison_csv(const sim::ModelComparisonResult& result);
std::string optimizer_metrics_csv(const std::vector<sim::OptimizerComparisonRow>& rows);
std::string optimizer_timing_csv(const std::vector<sim::OptimizerComparisonRow>& rows);
std::string sampling_variance_csv(const sim::SamplingVarianceResult& result);
std::string calibration_csv(const std::vector<sim::CalibrationPoint>& points,
                            long focal_size, double rho, double alpha);

}  // namespace gplm::io
