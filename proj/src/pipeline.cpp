#include "kfg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "kfg/checkpoint.hpp"
#include "kfg/clip.hpp"
#include "kfg/similarity.hpp"

namespace kfg {

DatasetIndex DatasetIndex::open(const std::string& data_dir) {
  DatasetIndex idx;
  idx.entries = load_manifest(data_dir);
  if (idx.entries.empty()) throw std::runtime_error("dataset " + data_dir + " is empty");
  return idx;
}

const ManifestEntry& DatasetIndex::entry(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return e;
  }
  throw std::runtime_error("dataset has no video '" + id + "'");
}

const std::vector<double>& DatasetIndex::motion_for(const std::string& id) {
  auto it = motion.find(id);
  if (it != motion.end()) return it->second;
  VideoSample video = load_video(entry(id));
  return motion.emplace(id, motion_index(video)).first->second;
}

// ---- localizer stage -----------------------------------------------------------

std::pair<std::vector<size_t>, std::vector<size_t>> split_indices(size_t n, double train_fraction,
                                                                  uint64_t seed) {
  if (n == 0) throw std::invalid_argument("split_indices: empty dataset");
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  RngStream rng(seed, "split");
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(i)));
    std::swap(order[i - 1], order[j]);
  }
  size_t n_train = static_cast<size_t>(std::lround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<size_t>(n_train, 1, n - 1);
  std::vector<size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {std::move(train), std::move(test)};
}

LocalizerStage run_train_localizer(const DatasetIndex& index, const ExperimentConfig& config,
                                   std::ostream* log) {
  std::vector<VideoSample> videos;
  videos.reserve(index.entries.size());
  for (const auto& e : index.entries) videos.push_back(load_video_metadata(e));

  auto [train_idx, test_idx] = split_indices(videos.size(), config.train_fraction, config.seed);
  std::vector<VideoSample> train_videos;
  train_videos.reserve(train_idx.size());
  for (size_t i : train_idx) train_videos.push_back(videos[i]);

  LocalizerStage stage;
  RngStream init_rng(config.seed, "init");
  stage.model = LocalizerModel::init(LocalizerConfig{}, init_rng);

  LocalizerTrainConfig tc;
  tc.lr = config.localizer_lr;
  tc.batch = config.localizer_batch;
  tc.epochs = config.localizer_epochs;
  tc.seed = config.seed;
  tc.round_params_f32 = (config.precision == "f32");
  if (tc.round_params_f32) {
    for (auto& [name, t] : stage.model.parameters()) t->round_to_f32();
  }
  stage.loss_curve = train_localizer(stage.model, train_videos, tc, &stage.opt);
  if (log) {
    for (size_t e = 0; e < stage.loss_curve.size(); ++e) {
      (*log) << "localizer epoch " << (e + 1) << " mse " << format_double(stage.loss_curve[e])
             << "\n";
    }
  }
  for (size_t i : train_idx) stage.train_ids.push_back(videos[i].id);
  for (size_t i : test_idx) stage.test_ids.push_back(videos[i].id);
  return stage;
}

LocalizerEval run_eval_localizer(const LocalizerModel& model, const DatasetIndex& index,
                                 const std::vector<std::string>& ids, int d_max) {
  if (ids.empty()) throw std::invalid_argument("eval-localizer: no videos to evaluate");
  LocalizerEval eval;
  std::vector<int> preds, labels;
  eval.predictions.header = {"video_id", "predicted", "label", "distance"};
  for (const auto& id : ids) {
    VideoSample video = load_video_metadata(index.entry(id));
    int pred = predict_keyframe(model, video);
    preds.push_back(pred);
    labels.push_back(video.key_frame_index);
    eval.predictions.rows.push_back({id, std::to_string(pred),
                                     std::to_string(video.key_frame_index),
                                     std::to_string(std::abs(pred - video.key_frame_index))});
  }
  for (int d = 0; d <= d_max; ++d) {
    eval.accuracy_at_d.push_back(accuracy_at_tolerance(preds, labels, d));
  }
  return eval;
}

void predict_key_frames(DatasetIndex& index, const ExperimentConfig& config) {
  if (config.localizer_checkpoint.empty()) {
    throw std::runtime_error("key_frame_source=predicted needs --localizer-checkpoint");
  }
  RngStream init_rng(0, "init");
  LocalizerModel model = LocalizerModel::init(LocalizerConfig{}, init_rng);
  Checkpoint ckpt = load_checkpoint(config.localizer_checkpoint);
  restore_from_checkpoint(ckpt, "localizer", model.parameters(),
                          std::map<std::string, Tensor*>{}, nullptr);
  for (const auto& e : index.entries) {
    if (index.predicted_key.count(e.id)) continue;
    VideoSample video = load_video_metadata(e);
    index.predicted_key[e.id] = predict_keyframe(model, video);
  }
}

// ---- classifier stage -----------------------------------------------------------

FoldSplit dataset_folds(const DatasetIndex& index, const ExperimentConfig& config) {
  std::vector<std::pair<std::string, int>> id_labels;
  id_labels.reserve(index.entries.size());
  for (const auto& e : index.entries) id_labels.emplace_back(e.id, e.label);
  return kfold_split(id_labels, config.folds, config.seed);
}

namespace {

struct PreparedSample {
  Clip clip;
  std::vector<double> v_motion;
  int label = 0;
};

/// Clip slots for one video under a variant; `center` is the ground-truth or
/// predicted key-frame.
std::vector<int> variant_slots(const ManifestEntry& e, const ClassifierVariant& variant,
                               int center, int t) {
  if (variant.key_frame_centered) return keyframe_window_slots(e.n_frames, center, t);
  return uniform_window_slots(e.n_frames, t);
}

int clip_center(const DatasetIndex& index, const ExperimentConfig& config,
                const ManifestEntry& e) {
  if (config.key_frame_source == "predicted") {
    auto it = index.predicted_key.find(e.id);
    if (it == index.predicted_key.end()) {
      throw std::runtime_error("no predicted key-frame for video '" + e.id + "'");
    }
    return it->second;
  }
  return e.key_frame_index;
}

PreparedSample prepare_sample(DatasetIndex& index, const ExperimentConfig& config,
                              const ClassifierVariant& variant, const std::string& id, int t_w,
                              bool training, RngStream* augment_rng) {
  const ManifestEntry& e = index.entry(id);
  const int center = clip_center(index, config, e);
  std::vector<int> slots = variant_slots(e, variant, center, config.clip_len);

  PreparedSample s;
  s.label = e.label;
  {
    VideoSample video = load_video(e);
    s.clip = extract_window_at(video, slots, center);
  }
  if (training && config.augment && augment_rng) {
    s.clip = augment(s.clip, *augment_rng);
  }
  if (variant.use_attention) {
    const std::vector<double>& m = index.motion_for(id);
    std::vector<double> m_slots(slots.size());
    for (size_t i = 0; i < slots.size(); ++i) m_slots[i] = m[static_cast<size_t>(slots[i])];
    s.v_motion = motion_vector(m_slots, t_w);
  }
  return s;
}

Tensor batch_clips(const std::vector<PreparedSample>& samples) {
  const int64_t n = static_cast<int64_t>(samples.size());
  const auto& shape = samples[0].clip.voxels.shape();
  Tensor batch({n, shape[0], shape[1], shape[2], shape[3]});
  int64_t stride = samples[0].clip.voxels.size();
  for (int64_t s = 0; s < n; ++s) {
    std::copy(samples[static_cast<size_t>(s)].clip.voxels.data(),
              samples[static_cast<size_t>(s)].clip.voxels.data() + stride,
              batch.data() + s * stride);
  }
  return batch;
}

ClassifierConfig variant_model_config(const ExperimentConfig& config,
                                      const ClassifierVariant& variant) {
  ClassifierConfig mc;
  mc.t = config.clip_len;
  mc.use_spp = variant.use_spp;
  mc.use_attention = variant.use_attention;
  return mc;
}

void check_fold_classes(const std::vector<std::string>& ids, const DatasetIndex& index,
                        const std::string& what) {
  bool has0 = false, has1 = false;
  for (const auto& id : ids) {
    (index.entry(id).label == 1 ? has1 : has0) = true;
  }
  if (!has0 || !has1) {
    throw std::runtime_error(what + " contains a single class; metrics are undefined");
  }
}

}  // namespace

ClassifierModel train_classifier_fold(DatasetIndex& index, const ExperimentConfig& config,
                                      const ClassifierVariant& variant, const FoldSplit& split,
                                      int holdout, std::vector<EpochLoss>* losses,
                                      std::ostream* log, AdamState* opt_out) {
  std::vector<std::string> train_ids;
  for (const auto& [id, fold] : split.assignments) {
    if (fold != holdout) train_ids.push_back(id);
  }
  if (train_ids.empty()) throw std::runtime_error("empty training set for fold " + std::to_string(holdout));
  check_fold_classes(train_ids, index, "training split of fold " + std::to_string(holdout));

  if (config.key_frame_source == "predicted") predict_key_frames(index, config);

  const std::string fold_tag = "fold" + std::to_string(holdout);
  RngStream init_rng(config.seed, "init");
  RngStream fold_init = init_rng.fork(fold_tag);
  ClassifierModel model = ClassifierModel::init(variant_model_config(config, variant), fold_init);
  const bool round_f32 = (config.precision == "f32");
  if (round_f32) {
    for (auto& [name, t] : model.parameters()) t->round_to_f32();
  }

  AdamState opt;
  opt.cfg.lr = config.classifier_lr;
  opt.cfg.weight_decay = config.classifier_weight_decay;
  auto params = model.parameters();

  RngStream shuffle_root(config.seed, "classifier_shuffle");
  RngStream augment_root(config.seed, "augment");
  RngStream dropout_root(config.seed, "dropout");

  const int total_epochs = config.classifier_epochs_stage1 + config.classifier_epochs_stage2;
  const int t_w = model.trace.t_w;
  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    opt.cfg.lr = epoch < config.classifier_epochs_stage1 ? config.classifier_lr
                                                         : config.classifier_lr2;
    const std::string epoch_tag = fold_tag + "/epoch" + std::to_string(epoch);
    RngStream shuffle_rng = shuffle_root.fork(epoch_tag);
    std::vector<std::string> order = train_ids;
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(shuffle_rng.uniform_int(static_cast<int64_t>(i)));
      std::swap(order[i - 1], order[j]);
    }

    EpochLoss epoch_loss;
    int batches = 0;
    size_t cursor = 0;
    while (cursor < order.size()) {
      size_t end = std::min(order.size(), cursor + static_cast<size_t>(config.classifier_batch));
      std::vector<PreparedSample> samples;
      samples.reserve(end - cursor);
      for (size_t i = cursor; i < end; ++i) {
        RngStream aug = augment_root.fork(epoch_tag + "/" + order[i]);
        samples.push_back(
            prepare_sample(index, config, variant, order[i], t_w, true, &aug));
      }
      const size_t b = samples.size();

      Tensor clips = batch_clips(samples);
      RngStream drop_rng = dropout_root.fork(epoch_tag + "/batch" + std::to_string(batches));
      ClassifierCache cache;
      ClassifierOutput out = classifier_forward(model, clips, true, &drop_rng, &cache);
      clips = Tensor();

      std::vector<double> labels(b);
      for (size_t s = 0; s < b; ++s) labels[s] = samples[s].label;
      double l_cls = bce_loss(out.probs, labels);
      std::vector<double> d_logits = bce_loss_backward_logits(out.probs, labels);

      double l_motion = 0.0;
      std::vector<std::vector<double>> d_v_temp;
      if (variant.use_attention) {
        d_v_temp.resize(b);
        for (size_t s = 0; s < b; ++s) {
          Tensor vt({t_w}, std::vector<double>(out.v_temp[s]));
          Tensor vm({t_w}, std::vector<double>(samples[s].v_motion));
          l_motion += cosine_consistency_loss(vt, vm);
          Tensor d = cosine_consistency_loss_backward(vt, vm);
          d_v_temp[s].assign(d.data(), d.data() + d.size());
          for (auto& g : d_v_temp[s]) g /= static_cast<double>(b);
        }
        l_motion /= static_cast<double>(b);
      }

      auto grads = classifier_backward(model, cache, d_logits, d_v_temp);
      opt.step(params, grads);
      if (round_f32) {
        for (auto& [name, t] : params) t->round_to_f32();
      }

      epoch_loss.l_cls += l_cls;
      epoch_loss.l_motion += l_motion;
      epoch_loss.total += l_cls + l_motion;
      ++batches;
      cursor = end;
    }
    epoch_loss.l_cls /= batches;
    epoch_loss.l_motion /= batches;
    epoch_loss.total /= batches;
    if (losses) losses->push_back(epoch_loss);
    if (log) {
      (*log) << "fold " << holdout << " epoch " << (epoch + 1) << " lr "
             << format_double(opt.cfg.lr) << " l_cls " << format_double(epoch_loss.l_cls);
      if (variant.use_attention) (*log) << " l_motion " << format_double(epoch_loss.l_motion);
      (*log) << " total " << format_double(epoch_loss.total) << "\n";
    }
  }
  if (opt_out) *opt_out = opt;
  return model;
}

ClassificationMetrics evaluate_classifier_fold(ClassifierModel& model, DatasetIndex& index,
                                               const ExperimentConfig& config,
                                               const ClassifierVariant& variant,
                                               const FoldSplit& split, int holdout) {
  std::vector<std::string> test_ids;
  for (const auto& [id, fold] : split.assignments) {
    if (fold == holdout) test_ids.push_back(id);
  }
  if (test_ids.empty()) throw std::runtime_error("fold " + std::to_string(holdout) + " is empty");
  check_fold_classes(test_ids, index, "fold " + std::to_string(holdout));
  if (config.key_frame_source == "predicted") predict_key_frames(index, config);

  const int t_w = model.trace.t_w;
  std::vector<int> predicted, labels;
  size_t cursor = 0;
  while (cursor < test_ids.size()) {
    size_t end = std::min(test_ids.size(), cursor + static_cast<size_t>(config.classifier_batch));
    std::vector<PreparedSample> samples;
    for (size_t i = cursor; i < end; ++i) {
      samples.push_back(prepare_sample(index, config, variant, test_ids[i], t_w, false, nullptr));
    }
    Tensor clips = batch_clips(samples);
    ClassifierOutput out = classifier_forward(model, clips, false, nullptr, nullptr);
    for (size_t s = 0; s < samples.size(); ++s) {
      predicted.push_back(out.probs[s] >= 0.5 ? 1 : 0);
      labels.push_back(samples[s].label);
    }
    cursor = end;
  }
  return ClassificationMetrics::from_predictions(predicted, labels);
}

CrossvalResult run_crossval(DatasetIndex& index, const ExperimentConfig& config,
                            const ClassifierVariant& variant, std::ostream* log) {
  FoldSplit split = dataset_folds(index, config);
  CrossvalResult result;
  std::vector<ClassificationMetrics> fold_metrics;
  for (int fold = 0; fold < config.folds; ++fold) {
    FoldResult fr;
    fr.fold = fold;
    ClassifierModel model =
        train_classifier_fold(index, config, variant, split, fold, &fr.losses, log);
    fr.metrics = evaluate_classifier_fold(model, index, config, variant, split, fold);
    fold_metrics.push_back(fr.metrics);
    if (log) {
      (*log) << "fold " << fold << " accuracy " << format_double(fr.metrics.accuracy) << "\n";
    }
    result.folds.push_back(std::move(fr));
  }
  result.mean = mean_metrics(fold_metrics);
  return result;
}

std::vector<AblationRow> run_ablation(DatasetIndex& index, const ExperimentConfig& config,
                                      std::ostream* log) {
  std::vector<AblationRow> rows;
  for (int kf = 0; kf <= 1; ++kf) {
    for (int spp = 0; spp <= 1; ++spp) {
      for (int attn = 0; attn <= 1; ++attn) {
        ClassifierVariant variant;
        variant.key_frame_centered = kf == 1;
        variant.use_spp = spp == 1;
        variant.use_attention = attn == 1;
        if (log) {
          (*log) << "ablation variant key_frame=" << kf << " spp=" << spp
                 << " motion_attention=" << attn << "\n";
        }
        CrossvalResult cv = run_crossval(index, config, variant, log);
        rows.push_back({variant, cv.mean});
      }
    }
  }
  return rows;
}

CsvTable metrics_csv(const std::vector<FoldResult>& folds, const ClassificationMetrics& mean) {
  CsvTable t;
  t.header = {"fold",      "accuracy", "sensitivity", "specificity", "precision",
              "f1",        "tp",       "fp",          "tn",          "fn",
              "undefined"};
  auto row = [](const std::string& tag, const ClassificationMetrics& m) {
    std::string undef;
    for (size_t i = 0; i < m.undefined.size(); ++i) undef += (i ? ";" : "") + m.undefined[i];
    return std::vector<std::string>{tag,
                                    format_double(m.accuracy),
                                    format_double(m.sensitivity),
                                    format_double(m.specificity),
                                    format_double(m.precision),
                                    format_double(m.f1),
                                    std::to_string(m.tp),
                                    std::to_string(m.fp),
                                    std::to_string(m.tn),
                                    std::to_string(m.fn),
                                    undef};
  };
  for (const auto& f : folds) t.rows.push_back(row(std::to_string(f.fold), f.metrics));
  t.rows.push_back(row("mean", mean));
  return t;
}

CsvTable ablation_csv(const std::vector<AblationRow>& rows) {
  CsvTable t;
  t.header = {"key_frame", "spp",       "motion_attention", "accuracy", "sensitivity",
              "specificity", "precision", "f1"};
  for (const auto& r : rows) {
    t.rows.push_back({r.variant.key_frame_centered ? "1" : "0", r.variant.use_spp ? "1" : "0",
                      r.variant.use_attention ? "1" : "0", format_double(r.mean.accuracy),
                      format_double(r.mean.sensitivity), format_double(r.mean.specificity),
                      format_double(r.mean.precision), format_double(r.mean.f1)});
  }
  return t;
}

}  // namespace kfg
