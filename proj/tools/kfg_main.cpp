#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kfg/checkpoint.hpp"
#include "kfg/config.hpp"
#include "kfg/dataset.hpp"
#include "kfg/gradsuite.hpp"
#include "kfg/pipeline.hpp"
#include "kfg/report.hpp"
#include "kfg/similarity.hpp"
#include "kfg/synth.hpp"

namespace fs = std::filesystem;
using namespace kfg;

namespace {

/// Shared flags; values land in the config after file defaults are applied.
struct CommonFlags {
  std::string config_file;
  CLI::App* cmd = nullptr;

  void attach(CLI::App* app, ExperimentConfig& cfg) {
    cmd = app;
    app->add_option("--config", config_file, "JSON config file (flags override file values)");
    app->add_option("--seed", cfg.seed, "master RNG seed");
    app->add_option("--data-dir", cfg.data_dir, "dataset directory (manifest.json inside)");
    app->add_option("--out-dir", cfg.out_dir, "run directory for artifacts");
    app->add_option("--key-frame-source", cfg.key_frame_source, "gt | predicted")
        ->check(CLI::IsMember({"gt", "predicted"}));
    app->add_option("--localizer-checkpoint", cfg.localizer_checkpoint,
                    "localizer checkpoint for --key-frame-source predicted");
    app->add_option("--folds", cfg.folds, "cross-validation fold count");
    app->add_option("--precision", cfg.precision, "f64 | f32")
        ->check(CLI::IsMember({"f64", "f32"}));
  }

  /// Applies precedence defaults < config file < explicit flags.
  ExperimentConfig resolve(ExperimentConfig flag_values) {
    if (config_file.empty()) return flag_values;
    return merge(load_config(config_file), flag_values);
  }

  ExperimentConfig merge(ExperimentConfig base, const ExperimentConfig& flags) {
    auto passed = [this](const std::string& name) {
      const CLI::Option* opt = cmd->get_option_no_throw(name);
      return opt && opt->count() > 0;
    };
    if (passed("--seed")) base.seed = flags.seed;
    if (passed("--data-dir")) base.data_dir = flags.data_dir;
    if (passed("--out-dir")) base.out_dir = flags.out_dir;
    if (passed("--key-frame-source")) base.key_frame_source = flags.key_frame_source;
    if (passed("--localizer-checkpoint")) base.localizer_checkpoint = flags.localizer_checkpoint;
    if (passed("--folds")) base.folds = flags.folds;
    if (passed("--precision")) base.precision = flags.precision;
    if (passed("--n-videos")) base.n_videos = flags.n_videos;
    if (passed("--n-frames")) base.n_frames = flags.n_frames;
    if (passed("--frame-h")) base.frame_h = flags.frame_h;
    if (passed("--frame-w")) base.frame_w = flags.frame_w;
    if (passed("--class-balance")) base.class_balance = flags.class_balance;
    if (passed("--detection-dropout")) base.detection_dropout = flags.detection_dropout;
    if (passed("--clip-len")) base.clip_len = flags.clip_len;
    if (passed("--localizer-lr")) base.localizer_lr = flags.localizer_lr;
    if (passed("--localizer-batch")) base.localizer_batch = flags.localizer_batch;
    if (passed("--localizer-epochs")) base.localizer_epochs = flags.localizer_epochs;
    if (passed("--train-fraction")) base.train_fraction = flags.train_fraction;
    if (passed("--classifier-lr")) base.classifier_lr = flags.classifier_lr;
    if (passed("--classifier-lr2")) base.classifier_lr2 = flags.classifier_lr2;
    if (passed("--weight-decay")) base.classifier_weight_decay = flags.classifier_weight_decay;
    if (passed("--classifier-batch")) base.classifier_batch = flags.classifier_batch;
    if (passed("--epochs-stage1")) base.classifier_epochs_stage1 = flags.classifier_epochs_stage1;
    if (passed("--epochs-stage2")) base.classifier_epochs_stage2 = flags.classifier_epochs_stage2;
    if (passed("--augment")) base.augment = flags.augment;
    if (passed("--use-spp")) base.use_spp = flags.use_spp;
    if (passed("--use-attention")) base.use_attention = flags.use_attention;
    if (passed("--key-frame-centered")) base.key_frame_centered = flags.key_frame_centered;
    return base;
  }
};

void require(bool ok, const std::string& message) {
  if (!ok) throw std::runtime_error(message);
}

ClassifierVariant variant_from(const ExperimentConfig& cfg) {
  return ClassifierVariant{cfg.key_frame_centered, cfg.use_spp, cfg.use_attention};
}

void write_loss_csv(const fs::path& path, const std::vector<EpochLoss>& losses,
                    bool with_motion) {
  CsvTable t;
  if (with_motion) t.header = {"epoch", "l_cls", "l_motion", "total"};
  else t.header = {"epoch", "l_cls", "total"};
  for (size_t e = 0; e < losses.size(); ++e) {
    if (with_motion) {
      t.rows.push_back({std::to_string(e + 1), format_double(losses[e].l_cls),
                        format_double(losses[e].l_motion), format_double(losses[e].total)});
    } else {
      t.rows.push_back({std::to_string(e + 1), format_double(losses[e].l_cls),
                        format_double(losses[e].total)});
    }
  }
  write_csv(path, t);
}

int cmd_gen_data(const ExperimentConfig& cfg) {
  require(!cfg.out_dir.empty(), "gen-data needs --out-dir");
  RunLock lock(cfg.out_dir);
  SynthConfig sc;
  sc.n_videos = cfg.n_videos;
  sc.n_frames = cfg.n_frames;
  sc.frame_h = cfg.frame_h;
  sc.frame_w = cfg.frame_w;
  sc.class_balance = cfg.class_balance;
  sc.clip_len = cfg.clip_len;
  sc.detection_dropout = cfg.detection_dropout;
  generate_synthetic_to_dir(sc, cfg.seed, cfg.out_dir);
  write_run_json(cfg, "gen-data");
  std::cout << "wrote " << cfg.n_videos << " synthetic videos to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_gen_labels(const ExperimentConfig& cfg) {
  require(!cfg.data_dir.empty(), "gen-labels needs --data-dir");
  require(!cfg.out_dir.empty(), "gen-labels needs --out-dir");
  RunLock lock(cfg.out_dir);
  fs::create_directories(fs::path(cfg.out_dir) / "labels");
  fs::create_directories(fs::path(cfg.out_dir) / "motion");
  auto entries = load_manifest(cfg.data_dir);
  for (const auto& e : entries) {
    VideoSample meta = load_video_metadata(e);
    ScoreSequence labels = generate_score_labels(meta);
    CsvTable lt;
    lt.header = {"frame_index", "value"};
    for (size_t i = 0; i < labels.size(); ++i) {
      lt.rows.push_back({std::to_string(i), format_double(labels[i])});
    }
    write_csv(fs::path(cfg.out_dir) / "labels" / (e.id + ".csv"), lt);

    VideoSample full = load_video(e);
    std::vector<double> m = motion_index(full);
    CsvTable mt;
    mt.header = {"frame_index", "value"};
    for (size_t i = 0; i < m.size(); ++i) {
      mt.rows.push_back({std::to_string(i), format_double(m[i])});
    }
    write_csv(fs::path(cfg.out_dir) / "motion" / (e.id + ".csv"), mt);
  }
  write_run_json(cfg, "gen-labels");
  std::cout << "wrote label and motion CSVs for " << entries.size() << " videos\n";
  return 0;
}

int cmd_train_localizer(const ExperimentConfig& cfg) {
  require(!cfg.data_dir.empty(), "train-localizer needs --data-dir");
  require(!cfg.out_dir.empty(), "train-localizer needs --out-dir");
  RunLock lock(cfg.out_dir);
  DatasetIndex index = DatasetIndex::open(cfg.data_dir);
  LocalizerStage stage = run_train_localizer(index, cfg, &std::cout);

  CsvTable loss;
  loss.header = {"epoch", "loss"};
  for (size_t e = 0; e < stage.loss_curve.size(); ++e) {
    loss.rows.push_back({std::to_string(e + 1), format_double(stage.loss_curve[e])});
  }
  write_csv(fs::path(cfg.out_dir) / "localizer_loss.csv", loss);

  CsvTable split;
  split.header = {"video_id", "role"};
  for (const auto& id : stage.train_ids) split.rows.push_back({id, "train"});
  for (const auto& id : stage.test_ids) split.rows.push_back({id, "test"});
  write_csv(fs::path(cfg.out_dir) / "split.csv", split);

  Checkpoint ckpt = make_checkpoint("localizer", stage.model.parameters(),
                                    std::map<std::string, Tensor*>{}, &stage.opt, cfg.digest());
  save_checkpoint(ckpt, fs::path(cfg.out_dir) / "localizer.kfgm");
  write_run_json(cfg, "train-localizer");
  std::cout << "saved localizer checkpoint to " << cfg.out_dir << "/localizer.kfgm\n";
  return 0;
}

int cmd_eval_localizer(const ExperimentConfig& cfg, std::string checkpoint, std::string which) {
  require(!cfg.data_dir.empty(), "eval-localizer needs --data-dir");
  require(!cfg.out_dir.empty(), "eval-localizer needs --out-dir");
  RunLock lock(cfg.out_dir);
  if (checkpoint.empty()) checkpoint = (fs::path(cfg.out_dir) / "localizer.kfgm").string();

  DatasetIndex index = DatasetIndex::open(cfg.data_dir);
  RngStream init_rng(0, "init");
  LocalizerModel model = LocalizerModel::init(LocalizerConfig{}, init_rng);
  Checkpoint ckpt = load_checkpoint(checkpoint);
  restore_from_checkpoint(ckpt, "localizer", model.parameters(),
                          std::map<std::string, Tensor*>{}, nullptr);

  std::vector<std::string> ids;
  if (which == "all") {
    for (const auto& e : index.entries) ids.push_back(e.id);
  } else {
    auto [train_idx, test_idx] = split_indices(index.entries.size(), cfg.train_fraction, cfg.seed);
    const auto& pick = (which == "train") ? train_idx : test_idx;
    for (size_t i : pick) ids.push_back(index.entries[i].id);
  }

  LocalizerEval eval = run_eval_localizer(model, index, ids, 32);
  CsvTable acc;
  acc.header = {"D", "accuracy"};
  for (size_t d = 0; d < eval.accuracy_at_d.size(); ++d) {
    acc.rows.push_back({std::to_string(d), format_double(eval.accuracy_at_d[d])});
  }
  write_csv(fs::path(cfg.out_dir) / "accuracy_at_d.csv", acc);
  write_csv(fs::path(cfg.out_dir) / "predictions.csv", eval.predictions);
  write_run_json(cfg, "eval-localizer");
  std::cout << "accuracy@5 " << format_double(eval.accuracy_at_d[5]) << ", accuracy@15 "
            << format_double(eval.accuracy_at_d[15]) << " over " << ids.size() << " videos ("
            << which << " split)\n";
  return 0;
}

int cmd_train_classifier(const ExperimentConfig& cfg, int fold) {
  require(!cfg.data_dir.empty(), "train-classifier needs --data-dir");
  require(!cfg.out_dir.empty(), "train-classifier needs --out-dir");
  RunLock lock(cfg.out_dir);
  DatasetIndex index = DatasetIndex::open(cfg.data_dir);
  FoldSplit split = dataset_folds(index, cfg);
  require(fold >= 0 && fold < cfg.folds, "fold index outside [0, folds)");

  ClassifierVariant variant = variant_from(cfg);
  std::vector<EpochLoss> losses;
  AdamState opt;
  ClassifierModel model =
      train_classifier_fold(index, cfg, variant, split, fold, &losses, &std::cout, &opt);

  write_loss_csv(fs::path(cfg.out_dir) / ("classifier_loss_fold" + std::to_string(fold) + ".csv"),
                 losses, variant.use_attention);
  Checkpoint ckpt =
      make_checkpoint("classifier", model.parameters(), model.buffers(), &opt, cfg.digest());
  save_checkpoint(ckpt, fs::path(cfg.out_dir) / ("classifier_fold" + std::to_string(fold) + ".kfgm"));
  write_run_json(cfg, "train-classifier");
  std::cout << "saved classifier checkpoint for fold " << fold << "\n";
  return 0;
}

int cmd_eval_classifier(const ExperimentConfig& cfg, int fold, std::string checkpoint) {
  require(!cfg.data_dir.empty(), "eval-classifier needs --data-dir");
  require(!cfg.out_dir.empty(), "eval-classifier needs --out-dir");
  RunLock lock(cfg.out_dir);
  if (checkpoint.empty()) {
    checkpoint = (fs::path(cfg.out_dir) / ("classifier_fold" + std::to_string(fold) + ".kfgm"))
                     .string();
  }
  DatasetIndex index = DatasetIndex::open(cfg.data_dir);
  FoldSplit split = dataset_folds(index, cfg);

  ClassifierVariant variant = variant_from(cfg);
  ClassifierConfig mc;
  mc.t = cfg.clip_len;
  mc.use_spp = variant.use_spp;
  mc.use_attention = variant.use_attention;
  RngStream init_rng(0, "init");
  ClassifierModel model = ClassifierModel::init(mc, init_rng);
  Checkpoint ckpt = load_checkpoint(checkpoint);
  restore_from_checkpoint(ckpt, "classifier", model.parameters(), model.buffers(), nullptr);

  ClassificationMetrics metrics = evaluate_classifier_fold(model, index, cfg, variant, split, fold);
  FoldResult fr;
  fr.fold = fold;
  fr.metrics = metrics;
  write_csv(fs::path(cfg.out_dir) / "metrics.csv", metrics_csv({fr}, metrics));
  write_run_json(cfg, "eval-classifier");
  std::cout << "fold " << fold << " accuracy " << format_double(metrics.accuracy) << "\n";
  return 0;
}

int cmd_crossval(const ExperimentConfig& cfg) {
  require(!cfg.data_dir.empty(), "crossval needs --data-dir");
  require(!cfg.out_dir.empty(), "crossval needs --out-dir");
  RunLock lock(cfg.out_dir);
  DatasetIndex index = DatasetIndex::open(cfg.data_dir);
  ClassifierVariant variant = variant_from(cfg);
  CrossvalResult cv = run_crossval(index, cfg, variant, &std::cout);
  write_csv(fs::path(cfg.out_dir) / "metrics.csv", metrics_csv(cv.folds, cv.mean));
  for (const auto& fr : cv.folds) {
    write_loss_csv(
        fs::path(cfg.out_dir) / ("classifier_loss_fold" + std::to_string(fr.fold) + ".csv"),
        fr.losses, variant.use_attention);
  }
  write_run_json(cfg, "crossval");
  std::cout << "mean accuracy " << format_double(cv.mean.accuracy) << " over " << cfg.folds
            << " folds\n";
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg) {
  require(!cfg.data_dir.empty(), "ablate needs --data-dir");
  require(!cfg.out_dir.empty(), "ablate needs --out-dir");
  RunLock lock(cfg.out_dir);
  DatasetIndex index = DatasetIndex::open(cfg.data_dir);
  std::vector<AblationRow> rows = run_ablation(index, cfg, &std::cout);
  write_csv(fs::path(cfg.out_dir) / "ablation.csv", ablation_csv(rows));
  write_run_json(cfg, "ablate");
  std::cout << "wrote ablation.csv (" << rows.size() << " rows)\n";
  return 0;
}

int cmd_gradcheck(const ExperimentConfig& cfg) {
  GradSuiteResult result = run_gradient_suite(&std::cout);
  if (!cfg.out_dir.empty()) {
    RunLock lock(cfg.out_dir);
    CsvTable t;
    t.header = {"check", "max_rel_err", "coords"};
    for (const auto& line : result.lines) {
      t.rows.push_back({line.name, format_double(line.max_rel_err), std::to_string(line.coords)});
    }
    write_csv(fs::path(cfg.out_dir) / "gradcheck.csv", t);
    write_run_json(cfg, "gradcheck");
  }
  return result.all_pass() ? 0 : 2;
}

int cmd_report(const ExperimentConfig& cfg) {
  require(!cfg.out_dir.empty(), "report needs --out-dir");
  emit_report(cfg.out_dir);
  std::cout << "wrote summary.txt and report.svg in " << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Key-frame guided ultrasound video pipeline"};
  app.require_subcommand(1);

  ExperimentConfig cfg;  // flag values parse into here
  CommonFlags common;

  auto* gen_data = app.add_subcommand("gen-data", "generate a synthetic dataset");
  auto* gen_labels = app.add_subcommand("gen-labels", "export score-label and motion CSVs");
  auto* train_loc = app.add_subcommand("train-localizer", "train the key-frame localizer");
  auto* eval_loc = app.add_subcommand("eval-localizer", "accuracy@D curve and predictions");
  auto* train_cls = app.add_subcommand("train-classifier", "train the video classifier (one fold)");
  auto* eval_cls = app.add_subcommand("eval-classifier", "evaluate a classifier checkpoint");
  auto* crossval = app.add_subcommand("crossval", "k-fold cross-validation of the classifier");
  auto* ablate = app.add_subcommand("ablate", "2x2x2 ablation grid");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks for every kernel");
  auto* report = app.add_subcommand("report", "merge run CSVs into summary + SVG");

  std::string checkpoint;
  std::string which_split = "test";
  int fold = 0;

  CLI::App* chosen = nullptr;
  auto attach_common = [&](CLI::App* sub) {
    common.attach(sub, cfg);
    sub->callback([&chosen, &common, sub] {
      chosen = sub;
      common.cmd = sub;
    });
  };
  attach_common(gen_data);
  gen_data->add_option("--n-videos", cfg.n_videos, "number of videos");
  gen_data->add_option("--n-frames", cfg.n_frames, "frames per video");
  gen_data->add_option("--frame-h", cfg.frame_h, "frame height");
  gen_data->add_option("--frame-w", cfg.frame_w, "frame width");
  gen_data->add_option("--class-balance", cfg.class_balance, "malignant fraction");
  gen_data->add_option("--detection-dropout", cfg.detection_dropout, "missing-detection rate");
  gen_data->add_option("--clip-len", cfg.clip_len, "clip length T");

  attach_common(gen_labels);
  attach_common(train_loc);
  train_loc->add_option("--localizer-lr", cfg.localizer_lr, "Adam learning rate");
  train_loc->add_option("--localizer-batch", cfg.localizer_batch, "batch size in videos");
  train_loc->add_option("--localizer-epochs", cfg.localizer_epochs, "epochs");
  train_loc->add_option("--train-fraction", cfg.train_fraction, "train split fraction");

  attach_common(eval_loc);
  eval_loc->add_option("--checkpoint", checkpoint, "localizer checkpoint path");
  eval_loc->add_option("--split", which_split, "test | train | all")
      ->check(CLI::IsMember({"test", "train", "all"}));
  eval_loc->add_option("--train-fraction", cfg.train_fraction, "train split fraction");

  auto add_classifier_flags = [&](CLI::App* sub) {
    sub->add_option("--clip-len", cfg.clip_len, "clip length T");
    sub->add_option("--classifier-lr", cfg.classifier_lr, "stage-1 learning rate");
    sub->add_option("--classifier-lr2", cfg.classifier_lr2, "stage-2 learning rate");
    sub->add_option("--weight-decay", cfg.classifier_weight_decay, "Adam weight decay");
    sub->add_option("--classifier-batch", cfg.classifier_batch, "batch size in clips");
    sub->add_option("--epochs-stage1", cfg.classifier_epochs_stage1, "stage-1 epochs");
    sub->add_option("--epochs-stage2", cfg.classifier_epochs_stage2, "stage-2 epochs");
    sub->add_flag("--augment,!--no-augment", cfg.augment, "training augmentation");
    sub->add_flag("--use-spp,!--no-spp", cfg.use_spp, "3-D SPP head (else flatten)");
    sub->add_flag("--use-attention,!--no-attention", cfg.use_attention, "motion attention");
    sub->add_flag("--key-frame-centered,!--uniform-sampling", cfg.key_frame_centered,
                  "key-frame-centered clips (else uniform sampling)");
  };
  attach_common(train_cls);
  add_classifier_flags(train_cls);
  train_cls->add_option("--fold", fold, "holdout fold index");
  attach_common(eval_cls);
  add_classifier_flags(eval_cls);
  eval_cls->add_option("--fold", fold, "fold to evaluate");
  eval_cls->add_option("--checkpoint", checkpoint, "classifier checkpoint path");
  attach_common(crossval);
  add_classifier_flags(crossval);
  attach_common(ablate);
  add_classifier_flags(ablate);
  attach_common(gradcheck);
  attach_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 1;  // usage error
  }

  try {
    ExperimentConfig resolved = common.resolve(cfg);
    resolved.validate();
    if (chosen == gen_data) return cmd_gen_data(resolved);
    if (chosen == gen_labels) return cmd_gen_labels(resolved);
    if (chosen == train_loc) return cmd_train_localizer(resolved);
    if (chosen == eval_loc) return cmd_eval_localizer(resolved, checkpoint, which_split);
    if (chosen == train_cls) return cmd_train_classifier(resolved, fold);
    if (chosen == eval_cls) return cmd_eval_classifier(resolved, fold, checkpoint);
    if (chosen == crossval) return cmd_crossval(resolved);
    if (chosen == ablate) return cmd_ablate(resolved);
    if (chosen == gradcheck) return cmd_gradcheck(resolved);
    if (chosen == report) return cmd_report(resolved);
    std::cerr << "no subcommand chosen\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
