#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kfg/classifier.hpp"
#include "kfg/config.hpp"
#include "kfg/dataset.hpp"
#include "kfg/folds.hpp"
#include "kfg/localizer.hpp"
#include "kfg/metrics.hpp"
#include "kfg/report.hpp"

namespace kfg {

/// Manifest plus per-video derived quantities cached across folds and
/// ablation variants. Pixels are streamed from disk on demand.
struct DatasetIndex {
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::vector<double>> motion;       // full per-frame M_i
  std::map<std::string, int> predicted_key;                // filled when needed

  static DatasetIndex open(const std::string& data_dir);
  const ManifestEntry& entry(const std::string& id) const;
  /// Motion index of one video, computed on first use.
  const std::vector<double>& motion_for(const std::string& id);
};

// ---- localizer stage ---------------------------------------------------------

struct LocalizerStage {
  LocalizerModel model;
  AdamState opt;
  std::vector<double> loss_curve;          // per epoch
  std::vector<std::string> train_ids, test_ids;
};

/// Deterministic train/test split on shuffled ids (stream "split" of seed).
std::pair<std::vector<size_t>, std::vector<size_t>> split_indices(size_t n, double train_fraction,
                                                                  uint64_t seed);

LocalizerStage run_train_localizer(const DatasetIndex& index, const ExperimentConfig& config,
                                   std::ostream* log);

struct LocalizerEval {
  std::vector<double> accuracy_at_d;  // D = 0..d_max inclusive
  CsvTable predictions;               // video_id, predicted, label, distance
};

LocalizerEval run_eval_localizer(const LocalizerModel& model, const DatasetIndex& index,
                                 const std::vector<std::string>& ids, int d_max);

// ---- classifier stage ---------------------------------------------------------

struct ClassifierVariant {
  bool key_frame_centered = true;
  bool use_spp = true;
  bool use_attention = true;
};

struct EpochLoss {
  double l_cls = 0.0, l_motion = 0.0, total = 0.0;
};

struct FoldResult {
  int fold = 0;
  ClassificationMetrics metrics;
  std::vector<EpochLoss> losses;
};

struct CrossvalResult {
  std::vector<FoldResult> folds;
  ClassificationMetrics mean;
};

/// Trains one classifier on every fold but `holdout`; returns the model and
/// its loss curve.
ClassifierModel train_classifier_fold(DatasetIndex& index, const ExperimentConfig& config,
                                      const ClassifierVariant& variant, const FoldSplit& split,
                                      int holdout, std::vector<EpochLoss>* losses,
                                      std::ostream* log, AdamState* opt_out = nullptr);

ClassificationMetrics evaluate_classifier_fold(ClassifierModel& model, DatasetIndex& index,
                                               const ExperimentConfig& config,
                                               const ClassifierVariant& variant,
                                               const FoldSplit& split, int holdout);

CrossvalResult run_crossval(DatasetIndex& index, const ExperimentConfig& config,
                            const ClassifierVariant& variant, std::ostream* log);

struct AblationRow {
  ClassifierVariant variant;
  ClassificationMetrics mean;
};

/// The 2x2x2 grid of {key-frame centered vs uniform} x {SPP vs flatten} x
/// {attention on/off}, all on the same folds and seed.
std::vector<AblationRow> run_ablation(DatasetIndex& index, const ExperimentConfig& config,
                                      std::ostream* log);

CsvTable metrics_csv(const std::vector<FoldResult>& folds, const ClassificationMetrics& mean);
CsvTable ablation_csv(const std::vector<AblationRow>& rows);

/// Fold split used by every classifier command (stratified, seeded).
FoldSplit dataset_folds(const DatasetIndex& index, const ExperimentConfig& config);

/// Fills index.predicted_key for the given ids from a localizer checkpoint.
void predict_key_frames(DatasetIndex& index, const ExperimentConfig& config);

}  // namespace kfg
