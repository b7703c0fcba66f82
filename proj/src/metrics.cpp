#include "kfg/metrics.hpp"

#include <stdexcept>

namespace kfg {

ClassificationMetrics ClassificationMetrics::from_counts(int64_t tp, int64_t fp, int64_t tn,
                                                         int64_t fn) {
  if (tp < 0 || fp < 0 || tn < 0 || fn < 0 || tp + fp + tn + fn == 0) {
    throw std::invalid_argument("metrics need non-negative counts with a non-empty total");
  }
  ClassificationMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(tp + tn + fp + fn);
  auto ratio = [&m](int64_t num, int64_t den, const char* name) {
    if (den == 0) {
      m.undefined.push_back(name);
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.sensitivity = ratio(tp, tp + fn, "sensitivity");
  m.specificity = ratio(tn, tn + fp, "specificity");
  m.precision = ratio(tp, tp + fp, "precision");
  if (m.precision + m.sensitivity == 0.0) {
    m.undefined.emplace_back("f1");
    m.f1 = 0.0;
  } else {
    m.f1 = 2.0 * m.precision * m.sensitivity / (m.precision + m.sensitivity);
  }
  return m;
}

ClassificationMetrics ClassificationMetrics::from_predictions(const std::vector<int>& predicted,
                                                              const std::vector<int>& labels) {
  if (predicted.empty() || predicted.size() != labels.size()) {
    throw std::invalid_argument("metrics: prediction/label size mismatch");
  }
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (labels[i] == 1) {
      (predicted[i] == 1 ? tp : fn) += 1;
    } else {
      (predicted[i] == 1 ? fp : tn) += 1;
    }
  }
  return from_counts(tp, fp, tn, fn);
}

ClassificationMetrics mean_metrics(const std::vector<ClassificationMetrics>& folds) {
  if (folds.empty()) throw std::invalid_argument("mean_metrics: no folds");
  ClassificationMetrics m;
  for (const auto& f : folds) {
    m.tp += f.tp;
    m.fp += f.fp;
    m.tn += f.tn;
    m.fn += f.fn;
    m.accuracy += f.accuracy;
    m.sensitivity += f.sensitivity;
    m.specificity += f.specificity;
    m.precision += f.precision;
    m.f1 += f.f1;
  }
  double k = static_cast<double>(folds.size());
  m.accuracy /= k;
  m.sensitivity /= k;
  m.specificity /= k;
  m.precision /= k;
  m.f1 /= k;
  return m;
}

}  // namespace kfg
