#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kfg/grad_check.hpp"
#include "kfg/kernels.hpp"
#include "kfg/rng.hpp"
#include "kfg/tensor.hpp"
#include "oracles.hpp"

using namespace kfg;
using oracle::max_abs_diff;
using oracle::random_tensor;

TEST_CASE("tensor shape and data agree") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0, 3}), std::invalid_argument);
  t[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(t.ensure_finite("test"), std::runtime_error);
}

TEST_CASE("conv3d identity kernel reproduces the input") {
  RngStream rng(1, "t");
  Tensor x = random_tensor({1, 4, 5, 5}, rng);
  Tensor w({1, 1, 3, 3, 3});
  w[13] = 1.0;  // center tap
  Tensor b({1});
  ConvSpec spec = ConvSpec::conv3d(1, 1, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
  Tensor y = conv3d(x, spec, w, b);
  CHECK(y.shape() == x.shape());
  CHECK(max_abs_diff(x, y) == doctest::Approx(0.0));
}

TEST_CASE("conv3d strided output size matches the formula") {
  RngStream rng(2, "t");
  Tensor x = random_tensor({1, 32, 112, 112}, rng);
  ConvSpec spec = ConvSpec::conv3d(1, 1, {3, 3, 3}, {1, 2, 2}, {1, 1, 1});
  Tensor w = random_tensor({1, 1, 3, 3, 3}, rng);
  Tensor b({1});
  Tensor y = conv3d(x, spec, w, b);
  CHECK(y.shape() == std::vector<int64_t>{1, 32, 56, 56});
}

TEST_CASE("conv3d matches the direct-summation oracle") {
  RngStream rng(3, "t");
  ConvSpec spec = ConvSpec::conv3d(2, 3, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
  Tensor x = random_tensor({2, 4, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  CHECK(max_abs_diff(conv3d(x, spec, w, b), oracle::conv3d_direct(x, spec, w, b)) < 1e-12);
}

TEST_CASE("conv oracle equivalence on randomized shapes up to (3,3,6,6,6)") {
  RngStream rng(4, "t");
  for (int trial = 0; trial < 8; ++trial) {
    int ci = 1 + static_cast<int>(rng.uniform_int(3));
    int co = 1 + static_cast<int>(rng.uniform_int(3));
    int d = 3 + static_cast<int>(rng.uniform_int(4));
    int h = 3 + static_cast<int>(rng.uniform_int(4));
    int w = 3 + static_cast<int>(rng.uniform_int(4));
    int stride = 1 + static_cast<int>(rng.uniform_int(2));
    int pad = static_cast<int>(rng.uniform_int(2));
    ConvSpec spec = ConvSpec::conv3d(ci, co, {3, 3, 3}, {stride, stride, stride}, {pad, pad, pad});
    if (d + 2 * pad < 3 || h + 2 * pad < 3 || w + 2 * pad < 3) continue;
    Tensor x = random_tensor({ci, d, h, w}, rng);
    Tensor wt = random_tensor({co, ci, 3, 3, 3}, rng);
    Tensor b = random_tensor({co}, rng);
    CHECK(max_abs_diff(conv3d(x, spec, wt, b), oracle::conv3d_direct(x, spec, wt, b)) < 1e-12);
  }
}

TEST_CASE("conv2d size chain 14 -> 6 -> 2 -> 1") {
  RngStream rng(5, "t");
  Tensor x = random_tensor({1, 14, 14}, rng);
  ConvSpec s1 = ConvSpec::conv2d(1, 1, {3, 3}, {2, 2}, {0, 0});
  Tensor w1 = random_tensor({1, 1, 3, 3}, rng);
  Tensor b1({1});
  Tensor y1 = conv2d(x, s1, w1, b1);
  CHECK(y1.shape() == std::vector<int64_t>{1, 6, 6});
  Tensor y2 = conv2d(y1, s1, w1, b1);
  CHECK(y2.shape() == std::vector<int64_t>{1, 2, 2});
  ConvSpec s3 = ConvSpec::conv2d(1, 1, {2, 2}, {1, 1}, {0, 0});
  Tensor w3 = random_tensor({1, 1, 2, 2}, rng);
  Tensor y3 = conv2d(y2, s3, w3, b1);
  CHECK(y3.shape() == std::vector<int64_t>{1, 1, 1});
}

TEST_CASE("conv2d matches the direct-summation oracle") {
  RngStream rng(6, "t");
  ConvSpec spec = ConvSpec::conv2d(3, 2, {3, 3}, {2, 2}, {1, 1});
  Tensor x = random_tensor({3, 9, 8}, rng);
  Tensor w = random_tensor({2, 3, 3, 3}, rng);
  Tensor b = random_tensor({2}, rng);
  CHECK(max_abs_diff(conv2d(x, spec, w, b), oracle::conv2d_direct(x, spec, w, b)) < 1e-12);
}

TEST_CASE("conv rejects mismatched input channels") {
  RngStream rng(7, "t");
  ConvSpec spec = ConvSpec::conv3d(2, 1, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
  Tensor x = random_tensor({1, 4, 4, 4}, rng);
  Tensor w = random_tensor({1, 2, 3, 3, 3}, rng);
  Tensor b({1});
  CHECK_THROWS_AS(conv3d(x, spec, w, b), std::invalid_argument);
}

TEST_CASE("batchnorm3d is a fixed point on standardized input") {
  RngStream rng(8, "t");
  // Build an input that is exactly zero-mean, unit-variance per channel.
  Tensor x({2, 2, 2, 3, 3});
  const int64_t spatial = 2 * 3 * 3;
  for (int64_t c = 0; c < 2; ++c) {
    std::vector<double> vals(2 * spatial);
    for (auto& v : vals) v = rng.uniform(-1.0, 1.0);
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= vals.size();
    double inv = 1.0 / std::sqrt(var);
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = (vals[i] - mean) * inv;
    for (int64_t n = 0; n < 2; ++n)
      for (int64_t s = 0; s < spatial; ++s)
        x[(n * 2 + c) * spatial + s] = vals[static_cast<size_t>(n * spatial + s)];
  }
  BatchNormParams p = BatchNormParams::init(2);
  p.eps = 1e-10;  // the fixed-point identity holds up to an eps-induced shrink
  Tensor y = batchnorm3d(x, p, true);
  CHECK(max_abs_diff(x, y) < 1e-6);
}

TEST_CASE("batchnorm3d zero-variance input maps to beta") {
  Tensor x = Tensor::full({1, 1, 2, 2, 2}, 7.25);
  BatchNormParams p = BatchNormParams::init(1);
  p.beta[0] = 0.3;
  Tensor y = batchnorm3d(x, p, true);
  for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("batchnorm3d standardizes random input per channel") {
  RngStream rng(9, "t");
  Tensor x = random_tensor({3, 4, 2, 5, 5}, rng, -3.0, 5.0);
  BatchNormParams p = BatchNormParams::init(4);
  p.eps = 1e-10;
  Tensor y = batchnorm3d(x, p, true);
  const int64_t spatial = 2 * 5 * 5;
  for (int64_t c = 0; c < 4; ++c) {
    double mean = 0.0, var = 0.0;
    for (int64_t n = 0; n < 3; ++n)
      for (int64_t s = 0; s < spatial; ++s) mean += y[(n * 4 + c) * spatial + s];
    mean /= static_cast<double>(3 * spatial);
    for (int64_t n = 0; n < 3; ++n)
      for (int64_t s = 0; s < spatial; ++s) {
        double d = y[(n * 4 + c) * spatial + s] - mean;
        var += d * d;
      }
    var /= static_cast<double>(3 * spatial);
    CHECK(std::fabs(mean) < 1e-10);
    CHECK(std::fabs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("batchnorm3d eval mode uses running statistics") {
  RngStream rng(10, "t");
  Tensor x = random_tensor({2, 2, 2, 3, 3}, rng);
  BatchNormParams p = BatchNormParams::init(2);
  p.momentum = 1.0;  // running stats become the batch stats
  batchnorm3d(x, p, true);
  Tensor y_eval = batchnorm3d(x, p, false);
  // Eval normalization now uses the (unbiased-variance) stats of x itself.
  const int64_t spatial = 2 * 3 * 3;
  for (int64_t c = 0; c < 2; ++c) {
    double mean = 0.0;
    for (int64_t n = 0; n < 2; ++n)
      for (int64_t s = 0; s < spatial; ++s) mean += y_eval[(n * 2 + c) * spatial + s];
    mean /= static_cast<double>(2 * spatial);
    CHECK(std::fabs(mean) < 1e-10);
  }
  CHECK_THROWS_AS(batchnorm3d(Tensor({1, 2, 1, 1, 1}), p, true), std::invalid_argument);
}

TEST_CASE("maxpool3d constant input and size formula") {
  Tensor x = Tensor::full({1, 8, 14, 14}, 0.25);
  Tensor y = maxpool3d(x, {2, 2, 2}, {2, 2, 2});
  CHECK(y.shape() == std::vector<int64_t>{1, 4, 7, 7});
  for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.25);
}

TEST_CASE("maxpool3d matches the exhaustive oracle and routes ties first") {
  RngStream rng(11, "t");
  Tensor x = random_tensor({1, 4, 4, 4}, rng);
  Tensor y = maxpool3d(x, {2, 2, 2}, {2, 2, 2});
  CHECK(max_abs_diff(y, oracle::maxpool3d_exhaustive(x, 2, 2)) == 0.0);

  // All-equal window: the gradient goes to the first element in row-major order.
  Tensor flat = Tensor::full({1, 2, 2, 2}, 1.0);
  MaxPool3dCache cache;
  maxpool3d(flat, {2, 2, 2}, {2, 2, 2}, &cache);
  Tensor up({1, 1, 1, 1});
  up[0] = 3.5;
  Tensor d = maxpool3d_backward(up, cache);
  CHECK(d[0] == 3.5);
  for (int64_t i = 1; i < d.size(); ++i) CHECK(d[i] == 0.0);

  CHECK_THROWS_AS(maxpool3d(flat, {3, 3, 3}, {1, 1, 1}), std::invalid_argument);
}

TEST_CASE("spp3d output length and constant propagation") {
  Tensor x = Tensor::full({3, 2, 3, 3}, 0.6);
  Tensor y = spp3d(x);
  CHECK(y.size() == 3 * (2 * 3 * 3 + 8 + 1));
  for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.6);
  CHECK_THROWS_AS(spp3d(Tensor({2, 1, 3, 3})), std::invalid_argument);
}

TEST_CASE("spp3d matches the per-bin exhaustive oracle") {
  RngStream rng(12, "t");
  Tensor x = random_tensor({2, 2, 3, 3}, rng);
  CHECK(max_abs_diff(spp3d(x), oracle::spp3d_exhaustive(x)) == 0.0);
  Tensor x2 = random_tensor({3, 5, 4, 6}, rng);
  CHECK(max_abs_diff(spp3d(x2), oracle::spp3d_exhaustive(x2)) == 0.0);
}

TEST_CASE("fully_connected identity, bias, and dot-product oracle") {
  RngStream rng(13, "t");
  Tensor x = random_tensor({4}, rng);
  Tensor eye({4, 4});
  for (int i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  Tensor zero_b({4});
  CHECK(max_abs_diff(fully_connected(x, eye, zero_b), x) == 0.0);

  Tensor zero_w({3, 4});
  Tensor b = random_tensor({3}, rng);
  CHECK(max_abs_diff(fully_connected(x, zero_w, b), b) == 0.0);

  Tensor w = random_tensor({3, 4}, rng);
  Tensor y = fully_connected(x, w, b);
  for (int o = 0; o < 3; ++o) {
    double acc = b[o];
    for (int i = 0; i < 4; ++i) acc += w[o * 4 + i] * x[i];
    CHECK(std::fabs(y[o] - acc) < 1e-12);
  }
  CHECK_THROWS_AS(fully_connected(random_tensor({5}, rng), w, b), std::invalid_argument);
}

TEST_CASE("relu forward and subgradient") {
  Tensor x({3}, {-1.0, 0.0, 2.0});
  Tensor y = relu(x);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 2.0);

  Tensor pos({3}, {0.5, 1.0, 9.0});
  CHECK(max_abs_diff(relu(pos), pos) == 0.0);

  Tensor x2({2}, {-1.0, 2.0});
  Tensor up({2}, {5.0, 5.0});
  Tensor d = relu_backward(x2, up);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == 5.0);
}

TEST_CASE("dropout identity modes are bitwise") {
  RngStream rng(14, "t");
  Tensor x = random_tensor({64}, rng);
  RngStream d1(1, "drop");
  Tensor y0 = dropout(x, 0.0, true, d1);
  CHECK(max_abs_diff(x, y0) == 0.0);
  Tensor ye = dropout(x, 0.5, false, d1);
  CHECK(max_abs_diff(x, ye) == 0.0);
  CHECK_THROWS_AS(dropout(x, 1.0, true, d1), std::invalid_argument);
}

TEST_CASE("dropout Monte-Carlo expectation over 1e6 elements") {
  Tensor x = Tensor::full({1000000}, 1.0);
  RngStream rng(99, "drop");
  Tensor y = dropout(x, 0.5, true, rng);
  double mean = 0.0;
  for (int64_t i = 0; i < y.size(); ++i) mean += y[i];
  mean /= static_cast<double>(y.size());
  CHECK(std::fabs(mean - 1.0) < 0.01);
}

TEST_CASE("dropout is deterministic under a fixed stream") {
  RngStream rng(15, "t");
  Tensor x = random_tensor({128}, rng);
  RngStream a(7, "drop"), b(7, "drop");
  CHECK(max_abs_diff(dropout(x, 0.3, true, a), dropout(x, 0.3, true, b)) == 0.0);
}

TEST_CASE("lstm_sequence zero parameters give zero hidden outputs") {
  LstmParams p;
  p.w_x = Tensor({4 * 3, 2});
  p.w_h = Tensor({4 * 3, 3});
  p.b = Tensor({4 * 3});
  RngStream rng(16, "t");
  Tensor x = random_tensor({5, 2}, rng);
  Tensor h0({3}), c0({3});
  Tensor h = lstm_sequence(x, p, h0, c0);
  CHECK(h.shape() == std::vector<int64_t>{5, 3});
  // gates sit at sigmoid(0)=0.5 and the cell candidate at tanh(0)=0.
  CHECK(max_abs_diff(h, Tensor({5, 3})) == 0.0);
}

TEST_CASE("lstm_sequence single step equals the cell oracle") {
  RngStream rng(17, "t");
  const int in = 4, hidden = 3;
  LstmParams p;
  p.w_x = random_tensor({4 * hidden, in}, rng, -0.7, 0.7);
  p.w_h = random_tensor({4 * hidden, hidden}, rng, -0.7, 0.7);
  p.b = random_tensor({4 * hidden}, rng, -0.3, 0.3);
  Tensor x = random_tensor({1, in}, rng);
  Tensor h0 = random_tensor({hidden}, rng, -0.5, 0.5);
  Tensor c0 = random_tensor({hidden}, rng, -0.5, 0.5);
  Tensor h = lstm_sequence(x, p, h0, c0);
  auto cell = oracle::lstm_cell_direct({x.data(), x.data() + in}, p,
                                       {h0.data(), h0.data() + hidden},
                                       {c0.data(), c0.data() + hidden});
  for (int j = 0; j < hidden; ++j) CHECK(std::fabs(h[j] - cell.h[static_cast<size_t>(j)]) < 1e-12);
}

TEST_CASE("lstm_sequence multi-step equals iterated cell oracle") {
  RngStream rng(18, "t");
  const int in = 3, hidden = 4, f = 6;
  LstmParams p;
  p.w_x = random_tensor({4 * hidden, in}, rng, -0.6, 0.6);
  p.w_h = random_tensor({4 * hidden, hidden}, rng, -0.6, 0.6);
  p.b = random_tensor({4 * hidden}, rng, -0.2, 0.2);
  Tensor x = random_tensor({f, in}, rng);
  Tensor h0({hidden}), c0({hidden});
  Tensor h = lstm_sequence(x, p, h0, c0);
  std::vector<double> hp(hidden, 0.0), cp(hidden, 0.0);
  for (int t = 0; t < f; ++t) {
    auto cell = oracle::lstm_cell_direct({x.data() + t * in, x.data() + (t + 1) * in}, p, hp, cp);
    for (int j = 0; j < hidden; ++j) {
      CHECK(std::fabs(h[t * hidden + j] - cell.h[static_cast<size_t>(j)]) < 1e-12);
    }
    hp = cell.h;
    cp = cell.c;
  }
}

TEST_CASE("bce_loss analytic values") {
  CHECK(bce_loss({0.5}, {1.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss({1.0 - 1e-12}, {1.0}) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(bce_loss({0.9, 0.1}, {1.0, 0.0}) ==
        doctest::Approx(0.10536051565782628).epsilon(1e-12));
  // Clamping keeps the loss finite even at exactly 0/1.
  CHECK(std::isfinite(bce_loss({0.0, 1.0}, {1.0, 0.0})));
}

TEST_CASE("mse_loss values and oracle") {
  CHECK(mse_loss({0.2, 0.4}, {0.2, 0.4}) == 0.0);
  CHECK(mse_loss({1.0, 0.0}, {0.0, 1.0}) == 1.0);
  RngStream rng(19, "t");
  std::vector<double> a(10), b(10);
  for (auto& v : a) v = rng.uniform();
  for (auto& v : b) v = rng.uniform();
  double manual = 0.0;
  for (size_t i = 0; i < a.size(); ++i) manual += (a[i] - b[i]) * (a[i] - b[i]);
  manual /= static_cast<double>(a.size());
  CHECK(mse_loss(a, b) == doctest::Approx(manual).epsilon(1e-15));
}

TEST_CASE("cosine_consistency_loss geometry") {
  Tensor v({3}, {1.0, 2.0, 3.0});
  Tensor v2({3}, {2.0, 4.0, 6.0});
  CHECK(cosine_consistency_loss(v2, v) == doctest::Approx(0.0).epsilon(1e-12));
  Tensor a({2}, {1.0, 0.0}), b({2}, {0.0, 1.0});
  CHECK(cosine_consistency_loss(a, b) == doctest::Approx(1.0));
  Tensor neg({3}, {-1.0, -2.0, -3.0});
  CHECK(cosine_consistency_loss(neg, v) == doctest::Approx(2.0));
  Tensor tiny({3});
  CHECK(cosine_consistency_loss(tiny, v) == doctest::Approx(1.0));  // norm floor: cosine 0
  CHECK(max_abs_diff(cosine_consistency_loss_backward(tiny, v), Tensor({3})) == 0.0);
  CHECK_THROWS_AS(cosine_consistency_loss(a, v), std::invalid_argument);
}

TEST_CASE("adam first-step update and bookkeeping") {
  Tensor p({1});
  std::map<std::string, Tensor*> params{{"p", &p}};
  std::map<std::string, Tensor> grads;
  grads.emplace("p", Tensor({1}, {1.0}));
  AdamState opt;
  opt.cfg.lr = 1e-3;
  opt.step(params, grads);
  CHECK(p[0] == doctest::Approx(-9.99999990e-4).epsilon(1e-9));

  // Zero gradient, zero weight decay: parameters stay put.
  Tensor q({3}, {0.5, -0.5, 2.0});
  std::map<std::string, Tensor*> params2{{"q", &q}};
  std::map<std::string, Tensor> zero;
  zero.emplace("q", Tensor({3}));
  AdamState opt2;
  for (int i = 0; i < 5; ++i) opt2.step(params2, zero);
  CHECK(opt2.step_count == 5);
  CHECK(q[0] == 0.5);
  CHECK(q[1] == -0.5);
  CHECK(q[2] == 2.0);
}

TEST_CASE("adam weight decay enters as an additive gradient term") {
  Tensor p({1}, {2.0});
  std::map<std::string, Tensor*> params{{"p", &p}};
  std::map<std::string, Tensor> grads;
  grads.emplace("p", Tensor({1}, {0.0}));
  AdamState opt;
  opt.cfg.lr = 1e-3;
  opt.cfg.weight_decay = 0.5;
  opt.step(params, grads);
  // g = 0 + 0.5*2 = 1, same trajectory as the unit-gradient case.
  CHECK(p[0] == doctest::Approx(2.0 - 9.99999990e-4).epsilon(1e-9));
}

TEST_CASE("grad_check examples at spec tolerances") {
  RngStream rng(20, "t");
  {
    Tensor x = random_tensor({6}, rng);
    Tensor w = random_tensor({4, 6}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor up = random_tensor({4}, rng);
    auto loss = [&] {
      Tensor y = fully_connected(x, w, b);
      double s = 0.0;
      for (int64_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
      return s;
    };
    LayerGrads g = fully_connected_backward(x, w, up);
    std::map<std::string, Tensor> analytic;
    analytic.emplace("w", g.d_params.at("weights"));
    analytic.emplace("b", g.d_params.at("bias"));
    auto report = grad_check(loss, {{"w", &w}, {"b", &b}}, analytic, 1e-5);
    CHECK(report.max_rel_err < 1e-6);
  }
  {
    Tensor x = random_tensor({12}, rng, 0.1, 1.0);
    for (int64_t i = 0; i < x.size(); ++i)
      if (rng.bernoulli(0.5)) x[i] = -x[i];
    Tensor up = random_tensor({12}, rng);
    auto loss = [&] {
      Tensor y = relu(x);
      double s = 0.0;
      for (int64_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
      return s;
    };
    std::map<std::string, Tensor> analytic;
    analytic.emplace("x", relu_backward(x, up));
    auto report = grad_check(loss, {{"x", &x}}, analytic, 1e-5);
    CHECK(report.max_rel_err < 1e-6);
  }
  {
    ConvSpec spec = ConvSpec::conv3d(2, 2, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor w = random_tensor({2, 2, 3, 3, 3}, rng);
    Tensor b = random_tensor({2}, rng);
    Tensor probe = conv3d(x, spec, w, b);
    Tensor up = random_tensor(probe.shape(), rng);
    auto loss = [&] {
      Tensor y = conv3d(x, spec, w, b);
      double s = 0.0;
      for (int64_t i = 0; i < y.size(); ++i) s += y[i] * up[i];
      return s;
    };
    LayerGrads g = conv3d_backward(x, spec, w, up);
    std::map<std::string, Tensor> analytic;
    analytic.emplace("x", g.d_input);
    analytic.emplace("w", g.d_params.at("weights"));
    analytic.emplace("b", g.d_params.at("bias"));
    auto report = grad_check(loss, {{"x", &x}, {"w", &w}, {"b", &b}}, analytic, 1e-5);
    CHECK(report.max_rel_err < 1e-5);
  }
}

TEST_CASE("kernels are deterministic under a fixed seed") {
  RngStream a(21, "t"), b(21, "t");
  Tensor xa = random_tensor({2, 4, 5, 5}, a);
  Tensor xb = random_tensor({2, 4, 5, 5}, b);
  CHECK(max_abs_diff(xa, xb) == 0.0);
  ConvSpec spec = ConvSpec::conv3d(2, 2, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
  Tensor w = random_tensor({2, 2, 3, 3, 3}, a);
  Tensor wb = random_tensor({2, 2, 3, 3, 3}, b);
  Tensor bias({2});
  CHECK(max_abs_diff(conv3d(xa, spec, w, bias), conv3d(xb, spec, wb, bias)) == 0.0);
}
