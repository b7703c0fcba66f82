#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace kfg {

/// Flat experiment configuration. Defaults follow the reference training
/// recipe: localizer Adam lr 0.01 / batch 64 / 20 epochs; classifier Adam
/// lr 1e-3 for 20 epochs then 1e-4 for 20 more, weight decay 1e-8, batch 16;
/// 5-fold cross-validation; 32-frame 112x112 clips.
struct ExperimentConfig {
  uint64_t seed = 0;
  std::string data_dir;
  std::string out_dir;
  std::string precision = "f64";          // f64 | f32
  std::string key_frame_source = "gt";    // gt | predicted
  std::string localizer_checkpoint;        // required when key_frame_source == predicted

  int clip_len = 32;  // T, even
  int folds = 5;

  // Synthetic data generation.
  int n_videos = 20;
  int n_frames = 96;
  int frame_h = 256;
  int frame_w = 256;
  double class_balance = 0.5;
  double detection_dropout = 0.03;

  // Localizer stage.
  double localizer_lr = 0.01;
  int localizer_batch = 64;
  int localizer_epochs = 20;
  double train_fraction = 0.8;  // train/test split for the localizer stage

  // Classifier stage.
  double classifier_lr = 1e-3;
  double classifier_lr2 = 1e-4;
  double classifier_weight_decay = 1e-8;
  int classifier_batch = 16;
  int classifier_epochs_stage1 = 20;
  int classifier_epochs_stage2 = 20;
  bool augment = true;

  // Ablation toggles for single runs (ablate sweeps all of them).
  bool use_spp = true;
  bool use_attention = true;
  bool key_frame_centered = true;

  void validate() const;
  std::string to_json_string() const;
  uint64_t digest() const;
};

/// Reads a config file; accepts both a flat config object and a run.json
/// wrapper ({"command": ..., "config": {...}}). Unknown keys are an error.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Records the resolved config and command under <out_dir>/run.json.
void write_run_json(const ExperimentConfig& config, const std::string& command);

/// Exclusive lock file in the run directory; released on destruction.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace kfg
