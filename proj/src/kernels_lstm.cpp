#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "kfg/kernels.hpp"

namespace kfg {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void check_lstm_shapes(const Tensor& inputs, const LstmParams& p, const Tensor& h0,
                       const Tensor& c0) {
  if (inputs.rank() != 2) throw std::invalid_argument("lstm inputs must be (F, input_dim)");
  const int hidden = p.hidden();
  if (p.b.dim(0) != 4 * hidden || p.w_x.dim(0) != 4 * hidden || p.w_h.dim(0) != 4 * hidden ||
      p.w_h.dim(1) != hidden) {
    throw std::invalid_argument("lstm parameter shapes disagree");
  }
  if (inputs.dim(1) != p.w_x.dim(1)) {
    throw std::invalid_argument("lstm input dim " + std::to_string(inputs.dim(1)) +
                                " does not match w_x " + p.w_x.shape_str());
  }
  if (h0.size() != hidden || c0.size() != hidden) {
    throw std::invalid_argument("lstm initial state size mismatch");
  }
}
}  // namespace

Tensor lstm_sequence(const Tensor& inputs, const LstmParams& params, const Tensor& h0,
                     const Tensor& c0, LstmCache* cache) {
  check_lstm_shapes(inputs, params, h0, c0);
  const int64_t f = inputs.dim(0);
  const int hidden = params.hidden();
  const int g4 = 4 * hidden;

  // Input contributions for every step in one product.
  Tensor pre(std::vector<int64_t>{f, g4});
  {
    ConstMapMat xm(inputs.data(), f, inputs.dim(1));
    ConstMapMat wx(params.w_x.data(), g4, inputs.dim(1));
    MapMat pm(pre.data(), f, g4);
    pm.noalias() = xm * wx.transpose();
    pm.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(params.b.data(), g4);
  }

  Tensor gates({f, g4});
  Tensor cells({f, hidden});
  Tensor tanh_c({f, hidden});
  Tensor hidden_out({f, hidden});

  ConstMapMat wh(params.w_h.data(), g4, hidden);
  Eigen::VectorXd h_prev = Eigen::Map<const Eigen::VectorXd>(h0.data(), hidden);
  Eigen::VectorXd c_prev = Eigen::Map<const Eigen::VectorXd>(c0.data(), hidden);
  Eigen::VectorXd z(g4);
  for (int64_t t = 0; t < f; ++t) {
    z.noalias() = wh * h_prev;
    z += Eigen::Map<const Eigen::VectorXd>(pre.data() + t * g4, g4);
    double* gt = gates.data() + t * g4;
    double* ct = cells.data() + t * hidden;
    double* tc = tanh_c.data() + t * hidden;
    double* ht = hidden_out.data() + t * hidden;
    for (int j = 0; j < hidden; ++j) {
      const double zi = z[j];
      const double zf = z[hidden + j];
      const double zg = z[2 * hidden + j];
      const double zo = z[3 * hidden + j];
      const double gi = sigmoid(zi);
      const double gf = sigmoid(zf);
      const double gg = std::tanh(zg);
      const double go = sigmoid(zo);
      gt[j] = gi;
      gt[hidden + j] = gf;
      gt[2 * hidden + j] = gg;
      gt[3 * hidden + j] = go;
      const double c_new = gf * c_prev[j] + gi * gg;
      ct[j] = c_new;
      const double tch = std::tanh(c_new);
      tc[j] = tch;
      ht[j] = go * tch;
    }
    h_prev = Eigen::Map<const Eigen::VectorXd>(ht, hidden);
    c_prev = Eigen::Map<const Eigen::VectorXd>(ct, hidden);
  }

  if (cache) {
    cache->gates = std::move(gates);
    cache->cells = std::move(cells);
    cache->tanh_c = std::move(tanh_c);
    cache->hidden = hidden_out;  // keep a copy; the caller gets the other
  }
  hidden_out.ensure_finite("lstm_sequence");
  return hidden_out;
}

LstmGrads lstm_sequence_backward(const Tensor& inputs, const LstmParams& params, const Tensor& h0,
                                 const Tensor& c0, const LstmCache& cache,
                                 const Tensor& d_hidden) {
  check_lstm_shapes(inputs, params, h0, c0);
  const int64_t f = inputs.dim(0);
  const int hidden = params.hidden();
  const int g4 = 4 * hidden;
  if (d_hidden.rank() != 2 || d_hidden.dim(0) != f || d_hidden.dim(1) != hidden) {
    throw std::invalid_argument("lstm upstream gradient must be (F, hidden)");
  }

  Tensor d_z_all({f, g4});  // pre-activation gate gradients, filled back to front
  Eigen::VectorXd dh_rec = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd dc_rec = Eigen::VectorXd::Zero(hidden);
  ConstMapMat wh(params.w_h.data(), g4, hidden);

  for (int64_t t = f - 1; t >= 0; --t) {
    const double* gt = cache.gates.data() + t * g4;
    const double* tc = cache.tanh_c.data() + t * hidden;
    const double* c_prev = (t == 0) ? c0.data() : cache.cells.data() + (t - 1) * hidden;
    double* dz = d_z_all.data() + t * g4;
    for (int j = 0; j < hidden; ++j) {
      const double gi = gt[j], gf = gt[hidden + j], gg = gt[2 * hidden + j], go = gt[3 * hidden + j];
      const double dht = d_hidden[t * hidden + j] + dh_rec[j];
      const double d_o = dht * tc[j];
      const double dct = dc_rec[j] + dht * go * (1.0 - tc[j] * tc[j]);
      const double d_i = dct * gg;
      const double d_g = dct * gi;
      const double d_f = dct * c_prev[j];
      dc_rec[j] = dct * gf;
      dz[j] = d_i * gi * (1.0 - gi);
      dz[hidden + j] = d_f * gf * (1.0 - gf);
      dz[2 * hidden + j] = d_g * (1.0 - gg * gg);
      dz[3 * hidden + j] = d_o * go * (1.0 - go);
    }
    dh_rec.noalias() = wh.transpose() * Eigen::Map<const Eigen::VectorXd>(dz, g4);
  }

  LstmGrads g;
  g.d_inputs = Tensor(inputs.shape());
  g.d_w_x = Tensor(params.w_x.shape());
  g.d_w_h = Tensor(params.w_h.shape());
  g.d_b = Tensor({g4});
  g.d_h0 = Tensor({hidden});
  g.d_c0 = Tensor({hidden});

  ConstMapMat dz_m(d_z_all.data(), f, g4);
  ConstMapMat xm(inputs.data(), f, inputs.dim(1));
  MapMat(g.d_inputs.data(), f, inputs.dim(1)).noalias() =
      dz_m * ConstMapMat(params.w_x.data(), g4, inputs.dim(1));
  MapMat(g.d_w_x.data(), g4, inputs.dim(1)).noalias() = dz_m.transpose() * xm;
  Eigen::Map<Eigen::VectorXd>(g.d_b.data(), g4) = dz_m.colwise().sum();

  // Rows of the "previous hidden" matrix: h0 then hidden[0..F-2].
  RowMat h_prev_m(f, hidden);
  h_prev_m.row(0) = Eigen::Map<const Eigen::RowVectorXd>(h0.data(), hidden);
  if (f > 1) {
    h_prev_m.bottomRows(f - 1) = ConstMapMat(cache.hidden.data(), f - 1, hidden);
  }
  MapMat(g.d_w_h.data(), g4, hidden).noalias() = dz_m.transpose() * h_prev_m;

  Eigen::Map<Eigen::VectorXd>(g.d_h0.data(), hidden) = dh_rec;
  Eigen::Map<Eigen::VectorXd>(g.d_c0.data(), hidden) = dc_rec;
  return g;
}

}  // namespace kfg
