#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kfg {

/// Binary-classification metrics with malignant as the positive class.
/// Ratios with a zero denominator are reported as 0 and flagged by name.
struct ClassificationMetrics {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double sensitivity = 0.0;  // TP / (TP + FN)
  double specificity = 0.0;  // TN / (TN + FP)
  double precision = 0.0;    // TP / (TP + FP)
  double f1 = 0.0;
  std::vector<std::string> undefined;  // metric names with zero denominators

  static ClassificationMetrics from_counts(int64_t tp, int64_t fp, int64_t tn, int64_t fn);
  static ClassificationMetrics from_predictions(const std::vector<int>& predicted,
                                                const std::vector<int>& labels);
};

/// Mean of per-fold metrics (counts summed, ratios averaged).
ClassificationMetrics mean_metrics(const std::vector<ClassificationMetrics>& folds);

}  // namespace kfg
