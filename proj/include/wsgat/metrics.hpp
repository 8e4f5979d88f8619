#ifndef WSGAT_METRICS_HPP
#define WSGAT_METRICS_HPP

#include <cstdint>
#include <span>

namespace wsgat::metrics {

/// Exact ROC AUC: P(score+ > score-) + P(tie) / 2 over all positive/negative
/// pairs, via sorting and tie groups. Throws UndefinedMetricError unless both
/// classes are present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Binary F1 of the positive class; 0 when precision + recall = 0.
double f1_score(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> labels);

double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth);

}  // namespace wsgat::metrics

#endif  // WSGAT_METRICS_HPP
