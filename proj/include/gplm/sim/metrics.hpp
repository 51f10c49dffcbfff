#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace gplm::sim {

// Binary classification metrics at a fixed threshold plus the rank-based AUC.
// Entries that are undefined on the given data (e.g. AUC for a single-class
// outcome vector) come back as NaN and are skipped during aggregation.
struct Metrics {
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double auc = 0.0;

    static constexpr std::size_t kCount = 6;
    double operator[](std::size_t k) const {
        const double* base = &accuracy;
        return base[k];
    }
    double& operator[](std::size_t k) {
        double* base = &accuracy;
        return base[k];
    }
    static const char* name(std::size_t k);
};

Metrics classification_metrics(std::span<const double> predicted_probs,
                               std::span<const double> outcomes,
                               double threshold = 0.5);

// Mann-Whitney AUC with midranks for ties; NaN when one class is absent
double rank_auc(std::span<const double> scores, std::span<const double> outcomes);

// mean and standard deviation over replicates, NaN-skipping per metric
struct MetricSummary {
    Metrics mean;
    Metrics sd;
    std::vector<std::size_t> counted;

    static MetricSummary aggregate(const std::vector<Metrics>& rows);
};

}  // namespace gplm::sim
