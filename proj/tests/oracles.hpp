#pragma once

// Test-only reference implementations, kept deliberately naive and separate
// from the library's kernels: direct summation for convolutions, exhaustive
// scans for pooling, and a hand-transcribed LSTM cell. These are the oracles
// the optimized paths are checked against.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "kfg/kernels.hpp"
#include "kfg/rng.hpp"
#include "kfg/tensor.hpp"

namespace oracle {

using kfg::ConvSpec;
using kfg::RngStream;
using kfg::Tensor;

inline Tensor random_tensor(std::vector<int64_t> shape, RngStream& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline Tensor conv3d_direct(const Tensor& x, const ConvSpec& spec, const Tensor& w,
                            const Tensor& b) {
  const int64_t ci = spec.in_channels, co = spec.out_channels;
  const int64_t d = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int kd = spec.kernel[0], kh = spec.kernel[1], kw = spec.kernel[2];
  const int sd = spec.stride[0], sh = spec.stride[1], sw = spec.stride[2];
  const int pd = spec.padding[0], ph = spec.padding[1], pw = spec.padding[2];
  const int64_t od = (d + 2 * pd - kd) / sd + 1;
  const int64_t oh = (h + 2 * ph - kh) / sh + 1;
  const int64_t ow = (wd + 2 * pw - kw) / sw + 1;
  Tensor out({co, od, oh, ow});
  for (int64_t o = 0; o < co; ++o)
    for (int64_t z = 0; z < od; ++z)
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t xx = 0; xx < ow; ++xx) {
          double acc = b[o];
          for (int64_t c = 0; c < ci; ++c)
            for (int az = 0; az < kd; ++az)
              for (int ay = 0; ay < kh; ++ay)
                for (int ax = 0; ax < kw; ++ax) {
                  int64_t iz = z * sd - pd + az;
                  int64_t iy = y * sh - ph + ay;
                  int64_t ix = xx * sw - pw + ax;
                  if (iz < 0 || iz >= d || iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                  acc += x[((c * d + iz) * h + iy) * wd + ix] *
                         w[(((o * ci + c) * kd + az) * kh + ay) * kw + ax];
                }
          out[((o * od + z) * oh + y) * ow + xx] = acc;
        }
  return out;
}

inline Tensor conv2d_direct(const Tensor& x, const ConvSpec& spec, const Tensor& w,
                            const Tensor& b) {
  const int64_t ci = spec.in_channels, co = spec.out_channels;
  const int64_t h = x.dim(1), wd = x.dim(2);
  const int kh = spec.kernel[0], kw = spec.kernel[1];
  const int sh = spec.stride[0], sw = spec.stride[1];
  const int ph = spec.padding[0], pw = spec.padding[1];
  const int64_t oh = (h + 2 * ph - kh) / sh + 1;
  const int64_t ow = (wd + 2 * pw - kw) / sw + 1;
  Tensor out({co, oh, ow});
  for (int64_t o = 0; o < co; ++o)
    for (int64_t y = 0; y < oh; ++y)
      for (int64_t xx = 0; xx < ow; ++xx) {
        double acc = b[o];
        for (int64_t c = 0; c < ci; ++c)
          for (int ay = 0; ay < kh; ++ay)
            for (int ax = 0; ax < kw; ++ax) {
              int64_t iy = y * sh - ph + ay;
              int64_t ix = xx * sw - pw + ax;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              acc += x[(c * h + iy) * wd + ix] * w[((o * ci + c) * kh + ay) * kw + ax];
            }
        out[(o * oh + y) * ow + xx] = acc;
      }
  return out;
}

inline Tensor maxpool3d_exhaustive(const Tensor& x, int window, int stride) {
  const int64_t c = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t od = (d - window) / stride + 1;
  const int64_t oh = (h - window) / stride + 1;
  const int64_t ow = (w - window) / stride + 1;
  Tensor out({c, od, oh, ow});
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t z = 0; z < od; ++z)
      for (int64_t y = 0; y < oh; ++y)
        for (int64_t xx = 0; xx < ow; ++xx) {
          double best = -std::numeric_limits<double>::infinity();
          for (int az = 0; az < window; ++az)
            for (int ay = 0; ay < window; ++ay)
              for (int ax = 0; ax < window; ++ax) {
                best = std::max(best, x[((ci * d + z * stride + az) * h + y * stride + ay) * w +
                                        xx * stride + ax]);
              }
          out[((ci * od + z) * oh + y) * ow + xx] = best;
        }
  return out;
}

/// Per-bin exhaustive max over the documented floor/ceil bin spans.
inline Tensor spp3d_exhaustive(const Tensor& x) {
  const int64_t c = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t flat = c * d * h * w;
  Tensor out({flat + c * 8 + c});
  for (int64_t i = 0; i < flat; ++i) out[i] = x[i];
  auto lo = [](int64_t i, int64_t e) { return i * e / 2; };
  auto hi = [](int64_t i, int64_t e) { return (i + 1) * e % 2 == 0 ? (i + 1) * e / 2 : (i + 1) * e / 2 + 1; };
  for (int64_t ci = 0; ci < c; ++ci) {
    double global = -std::numeric_limits<double>::infinity();
    for (int64_t bz = 0; bz < 2; ++bz)
      for (int64_t by = 0; by < 2; ++by)
        for (int64_t bx = 0; bx < 2; ++bx) {
          double best = -std::numeric_limits<double>::infinity();
          for (int64_t z = lo(bz, d); z < hi(bz, d); ++z)
            for (int64_t y = lo(by, h); y < hi(by, h); ++y)
              for (int64_t xx = lo(bx, w); xx < hi(bx, w); ++xx) {
                best = std::max(best, x[((ci * d + z) * h + y) * w + xx]);
              }
          out[flat + ci * 8 + (bz * 4 + by * 2 + bx)] = best;
          global = std::max(global, best);
        }
    out[flat + c * 8 + ci] = global;
  }
  return out;
}

/// One LSTM step written straight from the gate equations.
struct LstmCellOut {
  std::vector<double> h, c;
};
inline LstmCellOut lstm_cell_direct(const std::vector<double>& x, const kfg::LstmParams& p,
                                    const std::vector<double>& h_prev,
                                    const std::vector<double>& c_prev) {
  const int hidden = p.hidden();
  const int in = p.input_dim();
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  LstmCellOut out;
  out.h.resize(hidden);
  out.c.resize(hidden);
  for (int j = 0; j < hidden; ++j) {
    double zi = p.b[j], zf = p.b[hidden + j], zg = p.b[2 * hidden + j], zo = p.b[3 * hidden + j];
    for (int k = 0; k < in; ++k) {
      zi += p.w_x[(0 * hidden + j) * in + k] * x[static_cast<size_t>(k)];
      zf += p.w_x[(1 * hidden + j) * in + k] * x[static_cast<size_t>(k)];
      zg += p.w_x[(2 * hidden + j) * in + k] * x[static_cast<size_t>(k)];
      zo += p.w_x[(3 * hidden + j) * in + k] * x[static_cast<size_t>(k)];
    }
    for (int k = 0; k < hidden; ++k) {
      zi += p.w_h[(0 * hidden + j) * hidden + k] * h_prev[static_cast<size_t>(k)];
      zf += p.w_h[(1 * hidden + j) * hidden + k] * h_prev[static_cast<size_t>(k)];
      zg += p.w_h[(2 * hidden + j) * hidden + k] * h_prev[static_cast<size_t>(k)];
      zo += p.w_h[(3 * hidden + j) * hidden + k] * h_prev[static_cast<size_t>(k)];
    }
    double i_g = sig(zi), f_g = sig(zf), g_g = std::tanh(zg), o_g = sig(zo);
    out.c[static_cast<size_t>(j)] = f_g * c_prev[static_cast<size_t>(j)] + i_g * g_g;
    out.h[static_cast<size_t>(j)] = o_g * std::tanh(out.c[static_cast<size_t>(j)]);
  }
  return out;
}

/// Independent form of the clip-window shift rule: place the key-frame at
/// T/2, clamp the placement, replicate edges where the video runs out.
inline std::vector<int> window_slots_reference(int n, int k, int t) {
  std::vector<int> slots(static_cast<size_t>(t));
  if (n >= t) {
    int start = std::clamp(k - t / 2, 0, n - t);
    for (int i = 0; i < t; ++i) slots[static_cast<size_t>(i)] = start + i;
  } else {
    int p_start = std::clamp(t / 2 - k, 0, t - n);  // clip slot holding video frame 0
    for (int i = 0; i < t; ++i) {
      slots[static_cast<size_t>(i)] = std::clamp(i - p_start, 0, n - 1);
    }
  }
  return slots;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
