#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kfg/clip.hpp"
#include "kfg/kernels.hpp"

namespace kfg {

/// Architecture knobs. The defaults are the canonical network: four 3x3x3
/// conv+BN blocks (strides 111 / 122 / 222 / 222), pooling after the third
/// and fourth block, a motion-attention branch on the first pooled map, a
/// three-level 3-D SPP head and a two-layer classifier with dropout.
struct ClassifierConfig {
  int t = 32;
  int input_hw = 112;
  std::array<int, 4> widths = {16, 32, 64, 64};
  std::array<std::array<int, 3>, 4> strides = {{{1, 1, 1}, {1, 2, 2}, {2, 2, 2}, {2, 2, 2}}};
  bool use_spp = true;
  bool use_attention = true;
  int head_hidden = 128;
  double dropout_rate = 0.5;

  /// Per-layer (out_channels, kernel, stride) of the attention branch; the
  /// plan must reduce one pooled spatial slice to a single channel at 1x1.
  struct AttnConv {
    int out_ch, kernel, stride;
  };
  std::vector<AttnConv> attention_plan = {{8, 3, 2}, {4, 3, 2}, {1, 2, 1}};
};

/// Shape trace resolved at model construction.
struct ClassifierTrace {
  std::array<std::vector<int64_t>, 4> conv_out;  // (C,D,H,W) after each conv/BN block
  std::vector<int64_t> pool1_out, pool2_out;
  std::vector<int64_t> attn_spatial;  // slice extent after each branch conv (starts at pool1 H)
  int t_w = 0;                        // temporal extent of pool1 output
  int64_t head_in = 0;                // SPP length or flattened pool2 length
};

struct ClassifierModel {
  ClassifierConfig cfg;
  ClassifierTrace trace;
  std::array<ConvSpec, 4> conv_spec;
  std::array<Tensor, 4> conv_w, conv_b;
  std::array<BatchNormParams, 4> bn;
  std::vector<ConvSpec> attn_spec;
  std::vector<Tensor> attn_w, attn_b;
  Tensor fc1_w, fc1_b;  // (head_hidden, head_in)
  Tensor fc2_w, fc2_b;  // (1, head_hidden)

  static ClassifierModel init(const ClassifierConfig& cfg, RngStream& init_rng);
  std::map<std::string, Tensor*> parameters();
  /// Non-learned state persisted with the model (BN running statistics).
  std::map<std::string, Tensor*> buffers();
};

struct ClassifierOutput {
  std::vector<double> probs;                      // per sample
  std::vector<std::vector<double>> v_temp;        // per sample, length t_w (empty if no attention)
};

/// Opaque between forward and backward; holds exactly the activations the
/// hand-written backward pass needs.
struct ClassifierCache {
  Tensor input;  // (N,1,T,H,W)
  std::array<BatchNorm3dCache, 4> bn;
  std::vector<MaxPool3dCache> pool1, pool2;          // per sample
  Tensor pool1_out;                                  // (N,C,Tw,h,w), pre-attention
  std::vector<std::vector<Tensor>> attn_acts;        // per sample, per branch layer inputs
  std::vector<std::vector<double>> attn_logits;      // per sample, per slice
  std::vector<std::vector<double>> v_temp;
  std::vector<Spp3dCache> spp;                       // per sample
  Tensor head_in;                                    // (N, head_in)
  Tensor fc1_pre;                                    // (N, head_hidden)
  DropoutCache drop;
  bool dropout_active = false;
  Tensor dropped;                                    // post-dropout activations
  std::vector<double> probs;
};

/// Runs the batch (N,1,T,H,W) through the network. Training mode uses batch
/// statistics in BN and, when `dropout_rng` is given, active dropout; eval
/// mode uses running statistics and no dropout.
ClassifierOutput classifier_forward(ClassifierModel& model, const Tensor& clips, bool training,
                                    RngStream* dropout_rng, ClassifierCache* cache = nullptr);

/// Backward from per-sample logit gradients and (when attention is on)
/// per-sample v_temp gradients coming from the consistency loss.
std::map<std::string, Tensor> classifier_backward(const ClassifierModel& model,
                                                  const ClassifierCache& cache,
                                                  const std::vector<double>& d_logits,
                                                  const std::vector<std::vector<double>>& d_v_temp);

/// Eq-style loss bookkeeping: total is exactly the sum of the two parts.
struct LossRecord {
  double l_cls = 0.0;
  double l_motion = 0.0;
  double total = 0.0;
};

/// Single-sample record; batch training averages the parts over the batch.
LossRecord compute_losses(double prob, int label, const Tensor& v_temp, const Tensor& v_motion);

}  // namespace kfg
