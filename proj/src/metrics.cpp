#include "wsgat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "wsgat/errors.hpp"

namespace wsgat::metrics {

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size())
        throw UndefinedMetricError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                                   std::to_string(labels.size()) + " labels");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::uint64_t positives = 0;
    std::uint64_t negatives = 0;
    // Twice the Mann-Whitney U statistic, kept integral so the result is exact
    // up to the final division.
    std::uint64_t twice_u = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::uint64_t group_pos = 0;
        std::uint64_t group_neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (std::isnan(scores[order[j]])) throw UndefinedMetricError("roc_auc: NaN score");
            (labels[order[j]] ? group_pos : group_neg) += 1;
            ++j;
        }
        if (std::isnan(scores[order[i]])) throw UndefinedMetricError("roc_auc: NaN score");
        twice_u += 2 * group_pos * negatives + group_pos * group_neg;
        positives += group_pos;
        negatives += group_neg;
        i = j;
    }
    if (positives == 0 || negatives == 0)
        throw UndefinedMetricError("roc_auc: both classes must be present");
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) *
                                           static_cast<double>(negatives));
}

double f1_score(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels) {
    if (predicted.size() != labels.size() || predicted.empty())
        throw UndefinedMetricError("f1_score: inputs must be nonempty and of equal length");
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        const bool p = predicted[k] != 0;
        const bool l = labels[k] != 0;
        tp += p && l;
        fp += p && !l;
        fn += !p && l;
    }
    const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth) {
    if (predicted.size() != truth.size())
        throw UndefinedMetricError("mean_absolute_error: length mismatch " +
                                   std::to_string(predicted.size()) + " vs " +
                                   std::to_string(truth.size()));
    if (predicted.empty()) throw UndefinedMetricError("mean_absolute_error: empty input");
    double total = 0.0;
    for (std::size_t k = 0; k < predicted.size(); ++k) total += std::abs(predicted[k] - truth[k]);
    return total / static_cast<double>(predicted.size());
}

}  // namespace wsgat::metrics
