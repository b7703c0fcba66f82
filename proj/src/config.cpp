#include "kfg/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "kfg/rng.hpp"

namespace kfg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json config_to_json(const ExperimentConfig& c) {
  return json{
      {"seed", c.seed},
      {"data_dir", c.data_dir},
      {"out_dir", c.out_dir},
      {"precision", c.precision},
      {"key_frame_source", c.key_frame_source},
      {"localizer_checkpoint", c.localizer_checkpoint},
      {"clip_len", c.clip_len},
      {"folds", c.folds},
      {"n_videos", c.n_videos},
      {"n_frames", c.n_frames},
      {"frame_h", c.frame_h},
      {"frame_w", c.frame_w},
      {"class_balance", c.class_balance},
      {"detection_dropout", c.detection_dropout},
      {"localizer_lr", c.localizer_lr},
      {"localizer_batch", c.localizer_batch},
      {"localizer_epochs", c.localizer_epochs},
      {"train_fraction", c.train_fraction},
      {"classifier_lr", c.classifier_lr},
      {"classifier_lr2", c.classifier_lr2},
      {"classifier_weight_decay", c.classifier_weight_decay},
      {"classifier_batch", c.classifier_batch},
      {"classifier_epochs_stage1", c.classifier_epochs_stage1},
      {"classifier_epochs_stage2", c.classifier_epochs_stage2},
      {"augment", c.augment},
      {"use_spp", c.use_spp},
      {"use_attention", c.use_attention},
      {"key_frame_centered", c.key_frame_centered},
  };
}

void config_from_json(const json& j, ExperimentConfig& c) {
  static const std::set<std::string> known = {
      "seed", "data_dir", "out_dir", "precision", "key_frame_source", "localizer_checkpoint",
      "clip_len", "folds", "n_videos", "n_frames", "frame_h", "frame_w", "class_balance",
      "detection_dropout", "localizer_lr", "localizer_batch", "localizer_epochs",
      "train_fraction", "classifier_lr", "classifier_lr2", "classifier_weight_decay",
      "classifier_batch", "classifier_epochs_stage1", "classifier_epochs_stage2", "augment",
      "use_spp", "use_attention", "key_frame_centered"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw std::runtime_error("config: unknown key '" + key + "'");
  }
  auto get = [&j](const char* key, auto& into) {
    if (j.contains(key)) into = j.at(key).get<std::decay_t<decltype(into)>>();
  };
  get("seed", c.seed);
  get("data_dir", c.data_dir);
  get("out_dir", c.out_dir);
  get("precision", c.precision);
  get("key_frame_source", c.key_frame_source);
  get("localizer_checkpoint", c.localizer_checkpoint);
  get("clip_len", c.clip_len);
  get("folds", c.folds);
  get("n_videos", c.n_videos);
  get("n_frames", c.n_frames);
  get("frame_h", c.frame_h);
  get("frame_w", c.frame_w);
  get("class_balance", c.class_balance);
  get("detection_dropout", c.detection_dropout);
  get("localizer_lr", c.localizer_lr);
  get("localizer_batch", c.localizer_batch);
  get("localizer_epochs", c.localizer_epochs);
  get("train_fraction", c.train_fraction);
  get("classifier_lr", c.classifier_lr);
  get("classifier_lr2", c.classifier_lr2);
  get("classifier_weight_decay", c.classifier_weight_decay);
  get("classifier_batch", c.classifier_batch);
  get("classifier_epochs_stage1", c.classifier_epochs_stage1);
  get("classifier_epochs_stage2", c.classifier_epochs_stage2);
  get("augment", c.augment);
  get("use_spp", c.use_spp);
  get("use_attention", c.use_attention);
  get("key_frame_centered", c.key_frame_centered);
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::runtime_error("config: " + what); };
  if (precision != "f64" && precision != "f32") fail("precision must be f64 or f32");
  if (key_frame_source != "gt" && key_frame_source != "predicted") {
    fail("key_frame_source must be gt or predicted");
  }
  if (clip_len < 2 || clip_len % 2 != 0) fail("clip_len must be a positive even number");
  if (folds < 2) fail("folds must be >= 2");
  if (n_videos < 1 || n_frames < 1) fail("dataset sizes must be positive");
  if (class_balance < 0.0 || class_balance > 1.0) fail("class_balance outside [0,1]");
  if (localizer_lr <= 0.0 || classifier_lr <= 0.0 || classifier_lr2 <= 0.0) {
    fail("learning rates must be positive");
  }
  if (classifier_weight_decay < 0.0) fail("weight decay must be >= 0");
  if (localizer_batch < 1 || classifier_batch < 1) fail("batch sizes must be positive");
  if (localizer_epochs < 1 || classifier_epochs_stage1 < 0 || classifier_epochs_stage2 < 0 ||
      classifier_epochs_stage1 + classifier_epochs_stage2 < 1) {
    fail("epoch counts must be positive");
  }
  if (train_fraction <= 0.0 || train_fraction >= 1.0) fail("train_fraction outside (0,1)");
}

std::string ExperimentConfig::to_json_string() const { return config_to_json(*this).dump(2); }

uint64_t ExperimentConfig::digest() const { return fnv1a64(config_to_json(*this).dump()); }

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  if (doc.contains("config") && doc.at("config").is_object()) doc = doc.at("config");
  ExperimentConfig c;
  config_from_json(doc, c);
  return c;
}

void write_run_json(const ExperimentConfig& config, const std::string& command) {
  fs::create_directories(config.out_dir);
  json doc{{"command", command}, {"config", config_to_json(config)}};
  std::ofstream os(fs::path(config.out_dir) / "run.json", std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write run.json in " + config.out_dir);
  os << doc.dump(2) << "\n";
}

RunLock::RunLock(const fs::path& dir) {
  fs::create_directories(dir);
  path_ = dir / "lock";
  std::ifstream probe(path_);
  if (probe.good()) {
    throw std::runtime_error("run directory " + dir.string() +
                             " is locked by another command (remove 'lock' if stale)");
  }
  std::ofstream os(path_);
  if (!os) throw std::runtime_error("cannot create lock file in " + dir.string());
  os << "locked\n";
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace kfg
