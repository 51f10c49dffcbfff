#include "gplm/sim/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gplm::sim {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

const char* Metrics::name(std::size_t k) {
    static const char* names[kCount] = {"accuracy", "sensitivity", "specificity",
                                        "precision", "f1", "auc"};
    return names[k];
}

double rank_auc(std::span<const double> scores, std::span<const double> outcomes) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * double(i + 1 + j);  // ranks are 1-based
        for (std::size_t k = i; k < j; ++k) {
            if (outcomes[order[k]] == 1.0) {
                rank_sum_pos += midrank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return kNaN;
    return (rank_sum_pos - 0.5 * double(n_pos) * double(n_pos + 1)) /
           (double(n_pos) * double(n_neg));
}

Metrics classification_metrics(std::span<const double> predicted_probs,
                               std::span<const double> outcomes, double threshold) {
    if (predicted_probs.size() != outcomes.size())
        throw std::invalid_argument("classification_metrics: size mismatch");
    if (predicted_probs.empty())
        throw std::invalid_argument("classification_metrics: empty input");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("classification_metrics: threshold must lie in (0,1)");

    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const bool pred = predicted_probs[i] >= threshold;
        const bool pos = outcomes[i] == 1.0;
        if (pred && pos) ++tp;
        else if (pred && !pos) ++fp;
        else if (!pred && pos) ++fn;
        else ++tn;
    }
    Metrics m;
    m.accuracy = (tp + tn) / double(outcomes.size());
    m.sensitivity = (tp + fn) > 0 ? tp / (tp + fn) : kNaN;
    m.specificity = (tn + fp) > 0 ? tn / (tn + fp) : kNaN;
    m.precision = (tp + fp) > 0 ? tp / (tp + fp) : kNaN;
    m.f1 = (std::isnan(m.sensitivity) || std::isnan(m.precision) ||
            m.sensitivity + m.precision == 0.0)
               ? kNaN
               : 2.0 * m.sensitivity * m.precision / (m.sensitivity + m.precision);
    m.auc = rank_auc(predicted_probs, outcomes);
    return m;
}

MetricSummary MetricSummary::aggregate(const std::vector<Metrics>& rows) {
    MetricSummary out;
    out.counted.assign(Metrics::kCount, 0);
    for (std::size_t k = 0; k < Metrics::kCount; ++k) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& row : rows) {
            if (std::isnan(row[k])) continue;
            sum += row[k];
            ++n;
        }
        out.counted[k] = n;
        if (n == 0) {
            out.mean[k] = kNaN;
            out.sd[k] = kNaN;
            continue;
        }
        const double mean = sum / double(n);
        out.mean[k] = mean;
        double ss = 0.0;
        for (const auto& row : rows) {
            if (std::isnan(row[k])) continue;
            ss += (row[k] - mean) * (row[k] - mean);
        }
        out.sd[k] = n > 1 ? std::sqrt(ss / double(n - 1)) : 0.0;
    }
    return out;
}

}  // namespace gplm::sim
