#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "kfg/kernels.hpp"

namespace kfg {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
}  // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---- max pooling ------------------------------------------------------------

Tensor maxpool3d(const Tensor& x, std::array<int, 3> window, std::array<int, 3> stride,
                 MaxPool3dCache* cache) {
  if (x.rank() != 4) throw std::invalid_argument("maxpool3d expects (C,D,H,W), got " + x.shape_str());
  const int64_t c = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
  for (int i = 0; i < 3; ++i) {
    if (window[i] < 1 || stride[i] < 1) throw std::invalid_argument("maxpool3d window/stride must be positive");
  }
  if (window[0] > d || window[1] > h || window[2] > w) {
    throw std::invalid_argument("maxpool3d window larger than input " + x.shape_str());
  }
  const int64_t od = (d - window[0]) / stride[0] + 1;
  const int64_t oh = (h - window[1]) / stride[1] + 1;
  const int64_t ow = (w - window[2]) / stride[2] + 1;

  Tensor out({c, od, oh, ow});
  std::vector<int64_t> argmax(static_cast<size_t>(out.size()));
  const double* in = x.data();
  double* o = out.data();
  int64_t oi = 0;
  for (int64_t ci = 0; ci < c; ++ci) {
    const double* plane = in + ci * d * h * w;
    for (int64_t zz = 0; zz < od; ++zz) {
      for (int64_t yy = 0; yy < oh; ++yy) {
        for (int64_t xx = 0; xx < ow; ++xx, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t best_idx = -1;
          for (int kz = 0; kz < window[0]; ++kz) {
            for (int ky = 0; ky < window[1]; ++ky) {
              for (int kx = 0; kx < window[2]; ++kx) {
                int64_t iz = zz * stride[0] + kz;
                int64_t iy = yy * stride[1] + ky;
                int64_t ix = xx * stride[2] + kx;
                int64_t idx = (iz * h + iy) * w + ix;
                double v = plane[idx];
                if (v > best) {  // strict: first row-major maximizer wins ties
                  best = v;
                  best_idx = ci * d * h * w + idx;
                }
              }
            }
          }
          o[oi] = best;
          argmax[static_cast<size_t>(oi)] = best_idx;
        }
      }
    }
  }
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->in_shape = x.shape();
  }
  out.ensure_finite("maxpool3d");
  return out;
}

Tensor maxpool3d_backward(const Tensor& d_out, const MaxPool3dCache& cache) {
  if (static_cast<size_t>(d_out.size()) != cache.argmax.size()) {
    throw std::invalid_argument("maxpool3d_backward gradient/cache size mismatch");
  }
  Tensor d_in(cache.in_shape);
  for (int64_t i = 0; i < d_out.size(); ++i) {
    d_in[cache.argmax[static_cast<size_t>(i)]] += d_out[i];
  }
  return d_in;
}

// ---- 3-D spatial pyramid pooling --------------------------------------------

namespace {
inline int64_t bin_lo(int64_t i, int64_t extent) { return i * extent / 2; }
inline int64_t bin_hi(int64_t i, int64_t extent) { return ((i + 1) * extent + 1) / 2; }
}  // namespace

Tensor spp3d(const Tensor& x, Spp3dCache* cache) {
  if (x.rank() != 4) throw std::invalid_argument("spp3d expects (C,D,H,W), got " + x.shape_str());
  const int64_t c = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (d < 2 || h < 2 || w < 2) {
    throw std::invalid_argument("spp3d needs every spatial extent >= 2, got " + x.shape_str());
  }
  const int64_t flat = c * d * h * w;
  Tensor out({flat + c * 8 + c});
  const double* in = x.data();
  double* o = out.data();
  std::copy(in, in + flat, o);

  std::vector<int64_t> argmax(static_cast<size_t>(c * 9));
  int64_t ai = 0;
  for (int64_t ci = 0; ci < c; ++ci) {
    const double* plane = in + ci * d * h * w;
    double global_best = -std::numeric_limits<double>::infinity();
    int64_t global_idx = -1;
    for (int64_t bz = 0; bz < 2; ++bz) {
      for (int64_t by = 0; by < 2; ++by) {
        for (int64_t bx = 0; bx < 2; ++bx) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t best_idx = -1;
          for (int64_t iz = bin_lo(bz, d); iz < bin_hi(bz, d); ++iz) {
            for (int64_t iy = bin_lo(by, h); iy < bin_hi(by, h); ++iy) {
              for (int64_t ix = bin_lo(bx, w); ix < bin_hi(bx, w); ++ix) {
                int64_t idx = (iz * h + iy) * w + ix;
                double v = plane[idx];
                if (v > best) {
                  best = v;
                  best_idx = ci * d * h * w + idx;
                }
              }
            }
          }
          o[flat + ci * 8 + ((bz * 2 + by) * 2 + bx)] = best;
          argmax[static_cast<size_t>(ai++)] = best_idx;
          if (best > global_best) {
            global_best = best;
            global_idx = best_idx;
          }
        }
      }
    }
    // Global max: bins cover the map, so reuse the per-bin winners. Ties break
    // to the earliest bin's winner, which is also the first row-major one for
    // the overlap-free case.
    o[flat + c * 8 + ci] = global_best;
    argmax[static_cast<size_t>(ai++)] = global_idx;
  }
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->in_shape = x.shape();
    cache->flat_len = flat;
  }
  out.ensure_finite("spp3d");
  return out;
}

Tensor spp3d_backward(const Tensor& d_out, const Spp3dCache& cache) {
  const int64_t c = cache.in_shape[0];
  if (d_out.size() != cache.flat_len + c * 9) {
    throw std::invalid_argument("spp3d_backward gradient length mismatch");
  }
  Tensor d_in(cache.in_shape);
  for (int64_t i = 0; i < cache.flat_len; ++i) d_in[i] = d_out[i];
  int64_t ai = 0;
  for (int64_t ci = 0; ci < c; ++ci) {
    for (int64_t b = 0; b < 8; ++b) {
      d_in[cache.argmax[static_cast<size_t>(ai)]] += d_out[cache.flat_len + ci * 8 + b];
      ++ai;
    }
    d_in[cache.argmax[static_cast<size_t>(ai)]] += d_out[cache.flat_len + c * 8 + ci];
    ++ai;
  }
  return d_in;
}

// ---- dense layers ------------------------------------------------------------

namespace {
void check_fc_shapes(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2) throw std::invalid_argument("fully_connected weights must be (out,in)");
  if (bias.rank() != 1 || bias.dim(0) != weights.dim(0)) {
    throw std::invalid_argument("fully_connected bias must be (out)");
  }
  int64_t in = (x.rank() == 1) ? x.dim(0) : x.dim(1);
  if (x.rank() > 2 || in != weights.dim(1)) {
    throw std::invalid_argument("fully_connected input " + x.shape_str() +
                                " incompatible with weights " + weights.shape_str());
  }
}
}  // namespace

Tensor fully_connected(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  check_fc_shapes(x, weights, bias);
  const int64_t out_dim = weights.dim(0), in_dim = weights.dim(1);
  const int64_t rows = (x.rank() == 1) ? 1 : x.dim(0);
  Tensor out(x.rank() == 1 ? std::vector<int64_t>{out_dim}
                           : std::vector<int64_t>{rows, out_dim});
  ConstMapMat xm(x.data(), rows, in_dim);
  ConstMapMat wm(weights.data(), out_dim, in_dim);
  MapMat om(out.data(), rows, out_dim);
  om.noalias() = xm * wm.transpose();
  om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), out_dim);
  out.ensure_finite("fully_connected");
  return out;
}

LayerGrads fully_connected_backward(const Tensor& x, const Tensor& weights, const Tensor& d_out) {
  const int64_t out_dim = weights.dim(0), in_dim = weights.dim(1);
  const int64_t rows = (x.rank() == 1) ? 1 : x.dim(0);
  if (d_out.size() != rows * out_dim) {
    throw std::invalid_argument("fully_connected_backward gradient shape mismatch");
  }
  LayerGrads g;
  g.d_input = Tensor(x.shape());
  Tensor d_w(weights.shape());
  Tensor d_b({out_dim});
  ConstMapMat xm(x.data(), rows, in_dim);
  ConstMapMat wm(weights.data(), out_dim, in_dim);
  ConstMapMat gm(d_out.data(), rows, out_dim);
  MapMat dxm(g.d_input.data(), rows, in_dim);
  MapMat dwm(d_w.data(), out_dim, in_dim);
  dxm.noalias() = gm * wm;
  dwm.noalias() = gm.transpose() * xm;
  Eigen::Map<Eigen::VectorXd>(d_b.data(), out_dim) = gm.colwise().sum();
  g.d_params.emplace("weights", std::move(d_w));
  g.d_params.emplace("bias", std::move(d_b));
  return g;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& x, const Tensor& d_out) {
  if (!x.same_shape(d_out)) throw std::invalid_argument("relu_backward shape mismatch");
  Tensor d_in(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) d_in[i] = x[i] > 0.0 ? d_out[i] : 0.0;
  return d_in;
}

Tensor dropout(const Tensor& x, double rate, bool training, RngStream& rng, DropoutCache* cache) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout rate must be in [0,1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) {
    if (cache) cache->keep.assign(static_cast<size_t>(x.size()), 1);
    return x;
  }
  const double scale = 1.0 / (1.0 - rate);
  Tensor out(x.shape());
  std::vector<uint8_t> keep(static_cast<size_t>(x.size()));
  for (int64_t i = 0; i < x.size(); ++i) {
    bool k = rng.uniform() >= rate;
    keep[static_cast<size_t>(i)] = k ? 1 : 0;
    out[i] = k ? x[i] * scale : 0.0;
  }
  if (cache) cache->keep = std::move(keep);
  return out;
}

Tensor dropout_backward(const Tensor& d_out, double rate, const DropoutCache& cache) {
  if (cache.keep.size() != static_cast<size_t>(d_out.size())) {
    throw std::invalid_argument("dropout_backward cache size mismatch");
  }
  if (rate == 0.0) return d_out;
  const double scale = 1.0 / (1.0 - rate);
  Tensor d_in(d_out.shape());
  for (int64_t i = 0; i < d_out.size(); ++i) {
    d_in[i] = cache.keep[static_cast<size_t>(i)] ? d_out[i] * scale : 0.0;
  }
  return d_in;
}

// ---- batch normalization -----------------------------------------------------

BatchNormParams BatchNormParams::init(int channels) {
  BatchNormParams p;
  p.gamma = Tensor::full({channels}, 1.0);
  p.beta = Tensor({channels});
  p.running_mean = Tensor({channels});
  p.running_var = Tensor::full({channels}, 1.0);
  return p;
}

namespace {
Tensor batchnorm3d_core(Tensor x, BatchNormParams& params, bool training,
                        BatchNorm3dCache* cache) {
  if (x.rank() != 5) throw std::invalid_argument("batchnorm3d expects (N,C,D,H,W), got " + x.shape_str());
  const int64_t n = x.dim(0), c = x.dim(1);
  const int64_t spatial = x.dim(2) * x.dim(3) * x.dim(4);
  if (c != params.gamma.dim(0)) throw std::invalid_argument("batchnorm3d channel mismatch");
  const int64_t m = n * spatial;  // samples per channel
  if (training && m < 2) {
    throw std::invalid_argument("batchnorm3d training mode needs N*D*H*W >= 2");
  }

  std::vector<double> mean(static_cast<size_t>(c), 0.0), var(static_cast<size_t>(c), 0.0);
  if (training) {
    for (int64_t ni = 0; ni < n; ++ni) {
      for (int64_t ci = 0; ci < c; ++ci) {
        const double* p = x.data() + (ni * c + ci) * spatial;
        double s = 0.0;
        for (int64_t i = 0; i < spatial; ++i) s += p[i];
        mean[static_cast<size_t>(ci)] += s;
      }
    }
    for (auto& v : mean) v /= static_cast<double>(m);
    for (int64_t ni = 0; ni < n; ++ni) {
      for (int64_t ci = 0; ci < c; ++ci) {
        const double* p = x.data() + (ni * c + ci) * spatial;
        double mu = mean[static_cast<size_t>(ci)], s = 0.0;
        for (int64_t i = 0; i < spatial; ++i) {
          double d = p[i] - mu;
          s += d * d;
        }
        var[static_cast<size_t>(ci)] += s;
      }
    }
    for (auto& v : var) v /= static_cast<double>(m);
    // Running estimates use the unbiased variance, normalization the biased one.
    for (int64_t ci = 0; ci < c; ++ci) {
      double unbiased = (m > 1) ? var[static_cast<size_t>(ci)] * static_cast<double>(m) /
                                      static_cast<double>(m - 1)
                                : var[static_cast<size_t>(ci)];
      params.running_mean[ci] =
          (1.0 - params.momentum) * params.running_mean[ci] + params.momentum * mean[static_cast<size_t>(ci)];
      params.running_var[ci] =
          (1.0 - params.momentum) * params.running_var[ci] + params.momentum * unbiased;
    }
  } else {
    for (int64_t ci = 0; ci < c; ++ci) {
      mean[static_cast<size_t>(ci)] = params.running_mean[ci];
      var[static_cast<size_t>(ci)] = params.running_var[ci];
    }
  }

  std::vector<double> inv_std(static_cast<size_t>(c));
  for (int64_t ci = 0; ci < c; ++ci) {
    inv_std[static_cast<size_t>(ci)] = 1.0 / std::sqrt(var[static_cast<size_t>(ci)] + params.eps);
  }

  if (!cache) {
    // Inference path: normalize in place, no xhat retained.
    for (int64_t ni = 0; ni < n; ++ni) {
      for (int64_t ci = 0; ci < c; ++ci) {
        double* p = x.data() + (ni * c + ci) * spatial;
        const double mu = mean[static_cast<size_t>(ci)];
        const double is = inv_std[static_cast<size_t>(ci)];
        const double gm = params.gamma[ci], bt = params.beta[ci];
        for (int64_t i = 0; i < spatial; ++i) p[i] = gm * (p[i] - mu) * is + bt;
      }
    }
    x.ensure_finite("batchnorm3d");
    return x;
  }

  // Training path: the input buffer becomes the cached xhat.
  Tensor out(x.shape());
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ci = 0; ci < c; ++ci) {
      double* ph = x.data() + (ni * c + ci) * spatial;
      double* po = out.data() + (ni * c + ci) * spatial;
      const double mu = mean[static_cast<size_t>(ci)];
      const double is = inv_std[static_cast<size_t>(ci)];
      const double gm = params.gamma[ci], bt = params.beta[ci];
      for (int64_t i = 0; i < spatial; ++i) {
        double h = (ph[i] - mu) * is;
        ph[i] = h;
        po[i] = gm * h + bt;
      }
    }
  }
  cache->xhat = std::move(x);
  cache->inv_std = std::move(inv_std);
  cache->training = training;
  out.ensure_finite("batchnorm3d");
  return out;
}
}  // namespace

Tensor batchnorm3d(const Tensor& x, BatchNormParams& params, bool training,
                   BatchNorm3dCache* cache) {
  return batchnorm3d_core(x, params, training, cache);
}

Tensor batchnorm3d(Tensor&& x, BatchNormParams& params, bool training, BatchNorm3dCache* cache) {
  return batchnorm3d_core(std::move(x), params, training, cache);
}

Tensor batchnorm3d_output_from_xhat(const BatchNorm3dCache& cache, const BatchNormParams& params) {
  const Tensor& xhat = cache.xhat;
  const int64_t n = xhat.dim(0), c = xhat.dim(1);
  const int64_t spatial = xhat.dim(2) * xhat.dim(3) * xhat.dim(4);
  Tensor out(xhat.shape());
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ci = 0; ci < c; ++ci) {
      const double* ph = xhat.data() + (ni * c + ci) * spatial;
      double* po = out.data() + (ni * c + ci) * spatial;
      const double gm = params.gamma[ci], bt = params.beta[ci];
      for (int64_t i = 0; i < spatial; ++i) po[i] = gm * ph[i] + bt;
    }
  }
  return out;
}

BatchNormGrads batchnorm3d_backward(const Tensor& d_out, const BatchNormParams& params,
                                    const BatchNorm3dCache& cache) {
  const Tensor& xhat = cache.xhat;
  if (!d_out.same_shape(xhat)) throw std::invalid_argument("batchnorm3d_backward shape mismatch");
  const int64_t n = d_out.dim(0), c = d_out.dim(1);
  const int64_t spatial = d_out.dim(2) * d_out.dim(3) * d_out.dim(4);
  const double m = static_cast<double>(n * spatial);

  BatchNormGrads g;
  g.d_input = Tensor(d_out.shape());
  g.d_gamma = Tensor({c});
  g.d_beta = Tensor({c});

  std::vector<double> sum_dy(static_cast<size_t>(c), 0.0), sum_dy_xhat(static_cast<size_t>(c), 0.0);
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ci = 0; ci < c; ++ci) {
      const double* dy = d_out.data() + (ni * c + ci) * spatial;
      const double* xh = xhat.data() + (ni * c + ci) * spatial;
      double s1 = 0.0, s2 = 0.0;
      for (int64_t i = 0; i < spatial; ++i) {
        s1 += dy[i];
        s2 += dy[i] * xh[i];
      }
      sum_dy[static_cast<size_t>(ci)] += s1;
      sum_dy_xhat[static_cast<size_t>(ci)] += s2;
    }
  }
  for (int64_t ci = 0; ci < c; ++ci) {
    g.d_beta[ci] = sum_dy[static_cast<size_t>(ci)];
    g.d_gamma[ci] = sum_dy_xhat[static_cast<size_t>(ci)];
  }
  for (int64_t ni = 0; ni < n; ++ni) {
    for (int64_t ci = 0; ci < c; ++ci) {
      const double* dy = d_out.data() + (ni * c + ci) * spatial;
      const double* xh = xhat.data() + (ni * c + ci) * spatial;
      double* dx = g.d_input.data() + (ni * c + ci) * spatial;
      const double gm = params.gamma[ci];
      const double is = cache.inv_std[static_cast<size_t>(ci)];
      if (cache.training) {
        const double mean_dy = sum_dy[static_cast<size_t>(ci)] / m;
        const double mean_dy_xhat = sum_dy_xhat[static_cast<size_t>(ci)] / m;
        for (int64_t i = 0; i < spatial; ++i) {
          dx[i] = gm * is * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
        }
      } else {
        for (int64_t i = 0; i < spatial; ++i) dx[i] = gm * is * dy[i];
      }
    }
  }
  return g;
}

}  // namespace kfg
