#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kfg/rng.hpp"
#include "kfg/tensor.hpp"

namespace kfg {

/// Geometry of a 2-D or 3-D convolution. Output extent per axis is
/// floor((in + 2*pad - kernel) / stride) + 1 and must be >= 1.
struct ConvSpec {
  std::vector<int> kernel;   // 2 or 3 extents
  std::vector<int> stride;   // matching length
  std::vector<int> padding;  // matching length, zero-padding
  int in_channels = 1;
  int out_channels = 1;

  int dims() const { return static_cast<int>(kernel.size()); }
  void validate() const;
  /// Spatial output extents for the given input extents; throws on mismatch
  /// or degenerate output.
  std::vector<int64_t> output_extents(const std::vector<int64_t>& input) const;
  int64_t weight_count() const;

  static ConvSpec conv3d(int in_ch, int out_ch, std::array<int, 3> kernel,
                         std::array<int, 3> stride, std::array<int, 3> padding);
  static ConvSpec conv2d(int in_ch, int out_ch, std::array<int, 2> kernel,
                         std::array<int, 2> stride, std::array<int, 2> padding);
};

/// Gradients a layer hands back: one tensor for its input, one per parameter.
struct LayerGrads {
  Tensor d_input;
  std::map<std::string, Tensor> d_params;
};

// ---- convolution -----------------------------------------------------------

/// x: (C_in, D, H, W); weights: (C_out, C_in, kd, kh, kw); bias: (C_out).
Tensor conv3d(const Tensor& x, const ConvSpec& spec, const Tensor& weights, const Tensor& bias);
LayerGrads conv3d_backward(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                           const Tensor& d_out);

/// x: (C_in, H, W); weights: (C_out, C_in, kh, kw); bias: (C_out).
Tensor conv2d(const Tensor& x, const ConvSpec& spec, const Tensor& weights, const Tensor& bias);
LayerGrads conv2d_backward(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                           const Tensor& d_out);

/// Batched conv3d over (N, C_in, D, H, W); weight/bias gradients accumulate in
/// sample order (deterministic). `want_d_input=false` skips the input gradient
/// for the first layer of a network.
Tensor conv3d_batch(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                    const Tensor& bias);
LayerGrads conv3d_batch_backward(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                                 const Tensor& d_out, bool want_d_input = true);

// ---- pooling ---------------------------------------------------------------

struct MaxPool3dCache {
  std::vector<int64_t> argmax;  // flat input index per output element
  std::vector<int64_t> in_shape;
};

/// x: (C, D, H, W). Floor semantics: trailing remainder is dropped. Ties route
/// the gradient to the first maximizer in row-major order.
Tensor maxpool3d(const Tensor& x, std::array<int, 3> window, std::array<int, 3> stride,
                 MaxPool3dCache* cache = nullptr);
Tensor maxpool3d_backward(const Tensor& d_out, const MaxPool3dCache& cache);

struct Spp3dCache {
  std::vector<int64_t> argmax;  // flat input index per pooled output element (levels 2 and 3)
  std::vector<int64_t> in_shape;
  int64_t flat_len = 0;
};

/// Three-level pyramid over (C, D, H, W): the flattened map itself, adaptive
/// 2x2x2 max bins, and a global max per channel. Output length is
/// C * (D*H*W + 8 + 1). Adaptive bin i over extent E spans
/// [floor(i*E/2), ceil((i+1)*E/2)). Requires D, H, W >= 2.
Tensor spp3d(const Tensor& x, Spp3dCache* cache = nullptr);
Tensor spp3d_backward(const Tensor& d_out, const Spp3dCache& cache);

// ---- dense -----------------------------------------------------------------

/// x: (in) or (rows, in); weights: (out, in); bias: (out). Affine map W x + b,
/// applied row-wise in the matrix case.
Tensor fully_connected(const Tensor& x, const Tensor& weights, const Tensor& bias);
LayerGrads fully_connected_backward(const Tensor& x, const Tensor& weights, const Tensor& d_out);

Tensor relu(const Tensor& x);
/// Subgradient at 0 is 0.
Tensor relu_backward(const Tensor& x, const Tensor& d_out);

struct DropoutCache {
  std::vector<uint8_t> keep;
};

/// Inverted-scaling dropout: training mode zeroes each element with
/// probability `rate` and scales survivors by 1/(1-rate); eval mode is the
/// identity. Requires 0 <= rate < 1.
Tensor dropout(const Tensor& x, double rate, bool training, RngStream& rng,
               DropoutCache* cache = nullptr);
Tensor dropout_backward(const Tensor& d_out, double rate, const DropoutCache& cache);

// ---- LSTM ------------------------------------------------------------------

/// Single-layer unidirectional LSTM. Packed gate order along the first axis
/// of w_x / w_h / b is [input, forget, cell, output], each `hidden` rows.
struct LstmParams {
  Tensor w_x;  // (4*hidden, input_dim)
  Tensor w_h;  // (4*hidden, hidden)
  Tensor b;    // (4*hidden)
  int hidden() const { return static_cast<int>(b.dim(0) / 4); }
  int input_dim() const { return static_cast<int>(w_x.dim(1)); }
};

struct LstmCache {
  Tensor gates;   // (F, 4*hidden), post-activation
  Tensor cells;   // (F, hidden)
  Tensor tanh_c;  // (F, hidden)
  Tensor hidden;  // (F, hidden)
};

/// inputs: (F, input_dim); returns the hidden state at every step (F, hidden).
/// Sigmoid gates, tanh cell/output nonlinearity.
Tensor lstm_sequence(const Tensor& inputs, const LstmParams& params, const Tensor& h0,
                     const Tensor& c0, LstmCache* cache = nullptr);

struct LstmGrads {
  Tensor d_inputs;
  Tensor d_w_x, d_w_h, d_b;
  Tensor d_h0, d_c0;
};

/// Backpropagation through time for an upstream gradient on every hidden
/// output (F, hidden).
LstmGrads lstm_sequence_backward(const Tensor& inputs, const LstmParams& params, const Tensor& h0,
                                 const Tensor& c0, const LstmCache& cache, const Tensor& d_hidden);

// ---- batch normalization ---------------------------------------------------

struct BatchNormParams {
  Tensor gamma, beta;              // (C)
  Tensor running_mean, running_var;  // (C), updated in training mode
  double eps = 1e-5;
  double momentum = 0.1;

  static BatchNormParams init(int channels);
};

struct BatchNorm3dCache {
  Tensor xhat;                  // (N, C, D, H, W)
  std::vector<double> inv_std;  // per channel
  bool training = false;
};

/// x: (N, C, D, H, W). Per-channel standardization then affine. Training mode
/// normalizes with batch statistics and updates running mean/var; eval mode
/// uses the running statistics. Zero variance is absorbed by eps.
Tensor batchnorm3d(const Tensor& x, BatchNormParams& params, bool training,
                   BatchNorm3dCache* cache = nullptr);
/// Move-in variant: the input buffer is recycled as the cached xhat (or as the
/// output when no cache is requested), which matters for the largest maps.
Tensor batchnorm3d(Tensor&& x, BatchNormParams& params, bool training,
                   BatchNorm3dCache* cache = nullptr);
/// Recovers the layer output gamma*xhat+beta from the cached xhat, so forward
/// activations do not have to stay resident for the backward pass.
Tensor batchnorm3d_output_from_xhat(const BatchNorm3dCache& cache, const BatchNormParams& params);

struct BatchNormGrads {
  Tensor d_input;
  Tensor d_gamma, d_beta;
};

BatchNormGrads batchnorm3d_backward(const Tensor& d_out, const BatchNormParams& params,
                                    const BatchNorm3dCache& cache);

// ---- losses ----------------------------------------------------------------

/// Mean over the batch of -(y log z + (1-y) log(1-z)); z clamped to
/// [1e-12, 1-1e-12] so the loss is always finite.
double bce_loss(const std::vector<double>& probs, const std::vector<double>& labels);
/// Gradient with respect to the logits feeding a sigmoid: (z - y) / batch.
std::vector<double> bce_loss_backward_logits(const std::vector<double>& probs,
                                             const std::vector<double>& labels);

double mse_loss(const std::vector<double>& pred, const std::vector<double>& target);
std::vector<double> mse_loss_backward(const std::vector<double>& pred,
                                      const std::vector<double>& target);

/// 1 - cos(v_temp, v_motion). Either norm below 1e-12 treats the cosine as 0.
/// Gradient flows only into v_temp; v_motion is data.
double cosine_consistency_loss(const Tensor& v_temp, const Tensor& v_motion);
Tensor cosine_consistency_loss_backward(const Tensor& v_temp, const Tensor& v_motion);

// ---- optimizer -------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Bias-corrected Adam. Weight decay enters as an additive gradient term
/// g <- g + wd * param before the moment updates.
struct AdamState {
  AdamConfig cfg;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
  int64_t step_count = 0;

  void step(const std::map<std::string, Tensor*>& params,
            const std::map<std::string, Tensor>& grads);
};

double sigmoid(double x);

}  // namespace kfg
