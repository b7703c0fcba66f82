#include <Eigen/Dense>
#include <cstring>
#include <stdexcept>

#include "kfg/kernels.hpp"

namespace kfg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

struct ConvDims {
  int ci, co;
  int64_t d, h, w;     // input extents (d == 1 for the 2-D case)
  int kd, kh, kw;
  int sd, sh, sw;
  int pd, ph, pw;
  int64_t od, oh, ow;  // output extents
  int64_t k() const { return static_cast<int64_t>(ci) * kd * kh * kw; }
};

ConvDims resolve(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                 const Tensor& bias, bool three_d) {
  spec.validate();
  int nd = three_d ? 3 : 2;
  if (spec.dims() != nd) {
    throw std::invalid_argument("conv spec has " + std::to_string(spec.dims()) +
                                " spatial dims, expected " + std::to_string(nd));
  }
  if (x.rank() != nd + 1) {
    throw std::invalid_argument("conv input rank " + std::to_string(x.rank()) + " for shape " +
                                x.shape_str());
  }
  if (x.dim(0) != spec.in_channels) {
    throw std::invalid_argument("conv input has " + std::to_string(x.dim(0)) +
                                " channels, spec expects " + std::to_string(spec.in_channels));
  }
  std::vector<int64_t> spatial(x.shape().begin() + 1, x.shape().end());
  std::vector<int64_t> out = spec.output_extents(spatial);

  ConvDims dm{};
  dm.ci = spec.in_channels;
  dm.co = spec.out_channels;
  if (three_d) {
    dm.d = spatial[0]; dm.h = spatial[1]; dm.w = spatial[2];
    dm.kd = spec.kernel[0]; dm.kh = spec.kernel[1]; dm.kw = spec.kernel[2];
    dm.sd = spec.stride[0]; dm.sh = spec.stride[1]; dm.sw = spec.stride[2];
    dm.pd = spec.padding[0]; dm.ph = spec.padding[1]; dm.pw = spec.padding[2];
    dm.od = out[0]; dm.oh = out[1]; dm.ow = out[2];
  } else {
    dm.d = 1; dm.h = spatial[0]; dm.w = spatial[1];
    dm.kd = 1; dm.kh = spec.kernel[0]; dm.kw = spec.kernel[1];
    dm.sd = 1; dm.sh = spec.stride[0]; dm.sw = spec.stride[1];
    dm.pd = 0; dm.ph = spec.padding[0]; dm.pw = spec.padding[1];
    dm.od = 1; dm.oh = out[0]; dm.ow = out[1];
  }
  if (weights.size() != static_cast<int64_t>(dm.co) * dm.k()) {
    throw std::invalid_argument("conv weights size " + std::to_string(weights.size()) +
                                " does not match spec (" + std::to_string(dm.co * dm.k()) + ")");
  }
  if (bias.size() != dm.co) {
    throw std::invalid_argument("conv bias size mismatch");
  }
  return dm;
}

/// Gathers the patch matrix for one output depth slice: rows are
/// (ci, kz, ky, kx), columns are (oy, ox). Out-of-bounds taps are zero.
void im2col_slice(const double* x, const ConvDims& dm, int64_t od_index, double* cols) {
  const int64_t plane = dm.h * dm.w;
  const int64_t ncols = dm.oh * dm.ow;
  int64_t row = 0;
  for (int ci = 0; ci < dm.ci; ++ci) {
    for (int kz = 0; kz < dm.kd; ++kz) {
      int64_t iz = od_index * dm.sd - dm.pd + kz;
      bool z_ok = iz >= 0 && iz < dm.d;
      const double* xin = x + (static_cast<int64_t>(ci) * dm.d + iz) * plane;
      for (int ky = 0; ky < dm.kh; ++ky) {
        for (int kx = 0; kx < dm.kw; ++kx, ++row) {
          double* dst = cols + row * ncols;
          if (!z_ok) {
            std::memset(dst, 0, sizeof(double) * static_cast<size_t>(ncols));
            continue;
          }
          for (int64_t oy = 0; oy < dm.oh; ++oy) {
            int64_t iy = oy * dm.sh - dm.ph + ky;
            double* drow = dst + oy * dm.ow;
            if (iy < 0 || iy >= dm.h) {
              std::memset(drow, 0, sizeof(double) * static_cast<size_t>(dm.ow));
              continue;
            }
            const double* xrow = xin + iy * dm.w;
            for (int64_t ox = 0; ox < dm.ow; ++ox) {
              int64_t ix = ox * dm.sw - dm.pw + kx;
              drow[ox] = (ix >= 0 && ix < dm.w) ? xrow[ix] : 0.0;
            }
          }
        }
      }
    }
  }
}

/// Scatter-adds a patch-gradient matrix back into the input gradient.
void col2im_slice(const double* cols, const ConvDims& dm, int64_t od_index, double* d_x) {
  const int64_t plane = dm.h * dm.w;
  const int64_t ncols = dm.oh * dm.ow;
  int64_t row = 0;
  for (int ci = 0; ci < dm.ci; ++ci) {
    for (int kz = 0; kz < dm.kd; ++kz) {
      int64_t iz = od_index * dm.sd - dm.pd + kz;
      if (iz < 0 || iz >= dm.d) {
        row += dm.kh * dm.kw;
        continue;
      }
      double* xin = d_x + (static_cast<int64_t>(ci) * dm.d + iz) * plane;
      for (int ky = 0; ky < dm.kh; ++ky) {
        for (int kx = 0; kx < dm.kw; ++kx, ++row) {
          const double* src = cols + row * ncols;
          for (int64_t oy = 0; oy < dm.oh; ++oy) {
            int64_t iy = oy * dm.sh - dm.ph + ky;
            if (iy < 0 || iy >= dm.h) continue;
            double* xrow = xin + iy * dm.w;
            const double* srow = src + oy * dm.ow;
            for (int64_t ox = 0; ox < dm.ow; ++ox) {
              int64_t ix = ox * dm.sw - dm.pw + kx;
              if (ix >= 0 && ix < dm.w) xrow[ix] += srow[ox];
            }
          }
        }
      }
    }
  }
}

/// One sample's forward pass into a preallocated output buffer.
void conv_forward_core(const double* x, const ConvDims& dm, const double* w, const double* b,
                       double* out, RowMat& cols) {
  const int64_t ncols = dm.oh * dm.ow;
  ConstMapMat wmat(w, dm.co, dm.k());
  Eigen::Map<const Eigen::VectorXd> bvec(b, dm.co);
  for (int64_t od = 0; od < dm.od; ++od) {
    im2col_slice(x, dm, od, cols.data());
    StridedMap oslice(out + od * ncols, dm.co, ncols, Eigen::OuterStride<>(dm.od * ncols));
    oslice.noalias() = wmat * cols;
    oslice.colwise() += bvec;
  }
}

/// One sample's backward pass; d_w/d_b accumulate, d_x is optional.
void conv_backward_core(const double* x, const ConvDims& dm, const double* w, const double* d_out,
                        double* d_x, double* d_w, double* d_b, RowMat& cols, RowMat& d_cols) {
  const int64_t ncols = dm.oh * dm.ow;
  const int64_t k = dm.k();
  MapMat dwmat(d_w, dm.co, k);
  ConstMapMat wmat(w, dm.co, k);
  Eigen::Map<Eigen::VectorXd> dbvec(d_b, dm.co);
  for (int64_t od = 0; od < dm.od; ++od) {
    ConstStridedMap gslice(d_out + od * ncols, dm.co, ncols,
                           Eigen::OuterStride<>(dm.od * ncols));
    im2col_slice(x, dm, od, cols.data());
    dwmat.noalias() += gslice * cols.transpose();
    dbvec += gslice.rowwise().sum();
    if (d_x) {
      d_cols.noalias() = wmat.transpose() * gslice;
      col2im_slice(d_cols.data(), dm, od, d_x);
    }
  }
}

Tensor conv_forward(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                    const Tensor& bias, bool three_d) {
  ConvDims dm = resolve(x, spec, weights, bias, three_d);
  std::vector<int64_t> out_shape;
  if (three_d) out_shape = {dm.co, dm.od, dm.oh, dm.ow};
  else out_shape = {dm.co, dm.oh, dm.ow};
  Tensor out(out_shape);
  RowMat cols(dm.k(), dm.oh * dm.ow);
  conv_forward_core(x.data(), dm, weights.data(), bias.data(), out.data(), cols);
  out.ensure_finite(three_d ? "conv3d" : "conv2d");
  return out;
}

LayerGrads conv_backward(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                         const Tensor& d_out, bool three_d) {
  Tensor bias_probe({spec.out_channels});
  ConvDims dm = resolve(x, spec, weights, bias_probe, three_d);
  if (d_out.size() != dm.co * dm.od * dm.oh * dm.ow) {
    throw std::invalid_argument("conv upstream gradient shape mismatch: " + d_out.shape_str());
  }
  LayerGrads grads;
  grads.d_input = Tensor(x.shape());
  Tensor d_w(weights.shape());
  Tensor d_b({dm.co});
  RowMat cols(dm.k(), dm.oh * dm.ow), d_cols(dm.k(), dm.oh * dm.ow);
  conv_backward_core(x.data(), dm, weights.data(), d_out.data(), grads.d_input.data(), d_w.data(),
                     d_b.data(), cols, d_cols);
  grads.d_params.emplace("weights", std::move(d_w));
  grads.d_params.emplace("bias", std::move(d_b));
  return grads;
}

}  // namespace

void ConvSpec::validate() const {
  size_t n = kernel.size();
  if (n != 2 && n != 3) throw std::invalid_argument("conv spec must be 2-D or 3-D");
  if (stride.size() != n || padding.size() != n) {
    throw std::invalid_argument("conv spec kernel/stride/padding lengths disagree");
  }
  for (size_t i = 0; i < n; ++i) {
    if (kernel[i] < 1 || stride[i] < 1 || padding[i] < 0) {
      throw std::invalid_argument("conv spec has degenerate kernel/stride/padding");
    }
  }
  if (in_channels < 1 || out_channels < 1) {
    throw std::invalid_argument("conv spec channel counts must be positive");
  }
}

std::vector<int64_t> ConvSpec::output_extents(const std::vector<int64_t>& input) const {
  validate();
  if (input.size() != kernel.size()) {
    throw std::invalid_argument("conv input dimensionality mismatch");
  }
  std::vector<int64_t> out(input.size());
  for (size_t i = 0; i < input.size(); ++i) {
    int64_t span = input[i] + 2 * padding[i] - kernel[i];
    if (span < 0) {
      throw std::invalid_argument("conv kernel exceeds padded input on axis " + std::to_string(i));
    }
    out[i] = span / stride[i] + 1;
  }
  return out;
}

int64_t ConvSpec::weight_count() const {
  int64_t k = in_channels;
  for (int e : kernel) k *= e;
  return k * out_channels;
}

ConvSpec ConvSpec::conv3d(int in_ch, int out_ch, std::array<int, 3> kernel,
                          std::array<int, 3> stride, std::array<int, 3> padding) {
  ConvSpec s;
  s.kernel.assign(kernel.begin(), kernel.end());
  s.stride.assign(stride.begin(), stride.end());
  s.padding.assign(padding.begin(), padding.end());
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  return s;
}

ConvSpec ConvSpec::conv2d(int in_ch, int out_ch, std::array<int, 2> kernel,
                          std::array<int, 2> stride, std::array<int, 2> padding) {
  ConvSpec s;
  s.kernel.assign(kernel.begin(), kernel.end());
  s.stride.assign(stride.begin(), stride.end());
  s.padding.assign(padding.begin(), padding.end());
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  return s;
}

Tensor conv3d(const Tensor& x, const ConvSpec& spec, const Tensor& weights, const Tensor& bias) {
  return conv_forward(x, spec, weights, bias, true);
}

LayerGrads conv3d_backward(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                           const Tensor& d_out) {
  return conv_backward(x, spec, weights, d_out, true);
}

Tensor conv2d(const Tensor& x, const ConvSpec& spec, const Tensor& weights, const Tensor& bias) {
  return conv_forward(x, spec, weights, bias, false);
}

LayerGrads conv2d_backward(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                           const Tensor& d_out) {
  return conv_backward(x, spec, weights, d_out, false);
}

namespace {
ConvDims resolve_batch(const Tensor& x, const ConvSpec& spec, const Tensor& weights) {
  if (x.rank() != 5) {
    throw std::invalid_argument("batched conv3d expects (N,C,D,H,W), got " + x.shape_str());
  }
  std::vector<int64_t> sample_shape(x.shape().begin() + 1, x.shape().end());
  Tensor probe(sample_shape);  // shape carrier for validation only
  Tensor bias_probe({spec.out_channels});
  return resolve(probe, spec, weights, bias_probe, true);
}
}  // namespace

Tensor conv3d_batch(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                    const Tensor& bias) {
  ConvDims dm = resolve_batch(x, spec, weights);
  if (bias.size() != dm.co) throw std::invalid_argument("conv bias size mismatch");
  const int64_t n = x.dim(0);
  const int64_t in_stride = static_cast<int64_t>(dm.ci) * dm.d * dm.h * dm.w;
  const int64_t out_stride = static_cast<int64_t>(dm.co) * dm.od * dm.oh * dm.ow;
  Tensor out({n, dm.co, dm.od, dm.oh, dm.ow});
  RowMat cols(dm.k(), dm.oh * dm.ow);
  for (int64_t s = 0; s < n; ++s) {
    conv_forward_core(x.data() + s * in_stride, dm, weights.data(), bias.data(),
                      out.data() + s * out_stride, cols);
  }
  out.ensure_finite("conv3d");
  return out;
}

LayerGrads conv3d_batch_backward(const Tensor& x, const ConvSpec& spec, const Tensor& weights,
                                 const Tensor& d_out, bool want_d_input) {
  ConvDims dm = resolve_batch(x, spec, weights);
  const int64_t n = x.dim(0);
  const int64_t in_stride = static_cast<int64_t>(dm.ci) * dm.d * dm.h * dm.w;
  const int64_t out_stride = static_cast<int64_t>(dm.co) * dm.od * dm.oh * dm.ow;
  if (d_out.size() != n * out_stride) {
    throw std::invalid_argument("batched conv3d upstream gradient mismatch: " + d_out.shape_str());
  }
  LayerGrads grads;
  if (want_d_input) grads.d_input = Tensor(x.shape());
  Tensor d_w(weights.shape());
  Tensor d_b({dm.co});
  RowMat cols(dm.k(), dm.oh * dm.ow), d_cols(dm.k(), dm.oh * dm.ow);
  for (int64_t s = 0; s < n; ++s) {
    conv_backward_core(x.data() + s * in_stride, dm, weights.data(), d_out.data() + s * out_stride,
                       want_d_input ? grads.d_input.data() + s * in_stride : nullptr, d_w.data(),
                       d_b.data(), cols, d_cols);
  }
  grads.d_params.emplace("weights", std::move(d_w));
  grads.d_params.emplace("bias", std::move(d_b));
  return grads;
}

}  // namespace kfg
