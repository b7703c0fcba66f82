#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kfg/dataset.hpp"
#include "kfg/kernels.hpp"
#include "kfg/similarity.hpp"

namespace kfg {

/// Per-nodule description: the detector's 256-D appearance feature plus the
/// normalized (x1/W, y1/H, x2/W, y2/H, i/(N-1)) spatio-temporal vector.
struct NoduleDescriptor {
  std::vector<double> appearance;         // length kFeatureDim
  std::array<double, 5> spatiotemporal;
};

NoduleDescriptor build_descriptor(const VideoSample& video, int frame_index);

struct LocalizerConfig {
  int feature_dim = kFeatureDim;
  int embed_dim = 256;   // per-branch embedding; LSTM input is 2x this
  int hidden = 256;
  int head_hidden = 64;
};

/// Appearance and spatio-temporal embeddings, an LSTM over detected frames,
/// and a two-layer scoring head with a sigmoid output.
struct LocalizerModel {
  LocalizerConfig cfg;
  Tensor w_app, b_app;  // (embed, feature_dim)
  Tensor w_st, b_st;    // (embed, 5)
  LstmParams lstm;      // input 2*embed -> hidden
  Tensor w_h1, b_h1;    // (head_hidden, hidden)
  Tensor w_h2, b_h2;    // (1, head_hidden)

  static LocalizerModel init(const LocalizerConfig& cfg, RngStream& init_rng);
  std::map<std::string, Tensor*> parameters();
};

struct LocalizerCache {
  std::vector<int> detected;
  Tensor x_app, x_st;          // inputs per detected frame
  Tensor app_pre, st_pre;      // pre-ReLU embeddings
  Tensor lstm_in;              // (F, 2*embed)
  LstmCache lstm;
  Tensor h_out;                // (F, hidden)
  Tensor head1_pre;            // (F, head_hidden)
  Tensor logits;               // (F, 1)
  std::vector<double> scores;  // sigmoid(logits)
};

/// Scores every frame; frames without a detection score 0 and are skipped by
/// the LSTM. Throws if the video has no detections.
ScoreSequence localizer_forward(const LocalizerModel& model, const VideoSample& video,
                                LocalizerCache* cache = nullptr);

/// Gradients for an upstream d(score) on each detected frame (same order as
/// cache.detected).
std::map<std::string, Tensor> localizer_backward(const LocalizerModel& model,
                                                 const LocalizerCache& cache,
                                                 const std::vector<double>& d_scores);

/// MSE over detected frames against the generated labels; accumulates
/// parameter gradients scaled by `grad_scale` into `grads`.
double localizer_loss_and_grads(const LocalizerModel& model, const VideoSample& video,
                                const ScoreSequence& labels, double grad_scale,
                                std::map<std::string, Tensor>& grads);

int predict_keyframe(const LocalizerModel& model, const VideoSample& video);

/// Fraction of samples with |pred - label| <= d.
double accuracy_at_tolerance(const std::vector<int>& predictions, const std::vector<int>& labels,
                             int d);

struct LocalizerTrainConfig {
  double lr = 0.01;
  int batch = 64;
  int epochs = 20;
  uint64_t seed = 0;
  bool round_params_f32 = false;  // fast-mode storage precision after each step
};

/// Adam on batches of videos against generated score labels. Returns the
/// per-epoch mean training loss; the final optimizer state is copied out when
/// `opt_out` is given (for checkpointing).
std::vector<double> train_localizer(LocalizerModel& model, const std::vector<VideoSample>& videos,
                                    const LocalizerTrainConfig& cfg, AdamState* opt_out = nullptr);

}  // namespace kfg
