#include "kfg/gradsuite.hpp"

#include <cmath>
#include <ostream>

#include "kfg/classifier.hpp"
#include "kfg/grad_check.hpp"
#include "kfg/kernels.hpp"
#include "kfg/localizer.hpp"

namespace kfg {

namespace {

constexpr double kH = 1e-5;

Tensor random_tensor(std::vector<int64_t> shape, RngStream& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Values bounded away from 0 so ReLU subgradients are unambiguous under h.
Tensor random_tensor_off_zero(std::vector<int64_t> shape, RngStream& rng) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) {
    double v = rng.uniform(0.05, 1.0);
    t[i] = rng.bernoulli(0.5) ? v : -v;
  }
  return t;
}

double weighted_sum(const Tensor& t, const Tensor& w) {
  double s = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) s += t[i] * w[i];
  return s;
}

struct Suite {
  GradSuiteResult result;
  std::ostream* log;

  void record(const std::string& name, const GradCheckReport& report) {
    result.lines.push_back({name, report.max_rel_err, report.coords_checked});
    if (log) {
      (*log) << (report.pass(result.tolerance) ? "pass" : "FAIL") << "  " << name
             << "  max_rel_err " << report.max_rel_err << "  (" << report.coords_checked
             << " coords)\n";
    }
  }
};

void check_fully_connected(Suite& s, uint64_t seed) {
  RngStream rng(seed, "grad/fc");
  Tensor x = random_tensor({3, 7}, rng);
  Tensor w = random_tensor({5, 7}, rng);
  Tensor b = random_tensor({5}, rng);
  Tensor up = random_tensor({3, 5}, rng);
  auto loss = [&] { return weighted_sum(fully_connected(x, w, b), up); };
  LayerGrads g = fully_connected_backward(x, w, up);
  std::map<std::string, Tensor*> params{{"x", &x}, {"weights", &w}, {"bias", &b}};
  std::map<std::string, Tensor> analytic;
  analytic.emplace("x", g.d_input);
  analytic.emplace("weights", g.d_params.at("weights"));
  analytic.emplace("bias", g.d_params.at("bias"));
  s.record("fully_connected seed " + std::to_string(seed), grad_check(loss, params, analytic, kH));
}

void check_relu(Suite& s, uint64_t seed) {
  RngStream rng(seed, "grad/relu");
  Tensor x = random_tensor_off_zero({40}, rng);
  Tensor up = random_tensor({40}, rng);
  auto loss = [&] { return weighted_sum(relu(x), up); };
  std::map<std::string, Tensor> analytic;
  analytic.emplace("x", relu_backward(x, up));
  s.record("relu seed " + std::to_string(seed), grad_check(loss, {{"x", &x}}, analytic, kH));
}

void check_conv2d(Suite& s, uint64_t seed) {
  RngStream rng(seed, "grad/conv2d");
  ConvSpec spec = ConvSpec::conv2d(2, 3, {3, 3}, {2, 2}, {1, 1});
  Tensor x = random_tensor({2, 7, 7}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  Tensor probe = conv2d(x, spec, w, b);
  Tensor up = random_tensor(probe.shape(), rng);
  auto loss = [&] { return weighted_sum(conv2d(x, spec, w, b), up); };
  LayerGrads g = conv2d_backward(x, spec, w, up);
  std::map<std::string, Tensor*> params{{"x", &x}, {"weights", &w}, {"bias", &b}};
  std::map<std::string, Tensor> analytic;
  analytic.emplace("x", g.d_input);
  analytic.emplace("weights", g.d_params.at("weights"));
  analytic.emplace("bias", g.d_params.at("bias"));
  s.record("conv2d seed " + std::to_string(seed), grad_check(loss, params, analytic, kH));
}

void check_conv3d(Suite& s, uint64_t seed) {
  RngStream rng(seed, "grad/conv3d");
  ConvSpec spec = ConvSpec::conv3d(2, 3, {3, 3, 3}, {1, 2, 2}, {1, 1, 1});
  Tensor x = random_tensor({2, 4, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  Tensor probe = conv3d(x, spec, w, b);
  Tensor up = random_tensor(probe.shape(), rng);
  auto loss = [&] { return weighted_sum(conv3d(x, spec, w, b), up); };
  LayerGrads g = conv3d_backward(x, spec, w, up);
  std::map<std::string, Tensor*> params{{"x", &x}, {"weights", &w}, {"bias", &b}};
  std::map<std::string, Tensor> analytic;
  analytic.emplace("x", g.d_input);
  analytic.emplace("weights", g.d_params.at("weights"));
  analytic.emplace("bias", g.d_params.at("bias"));
  s.record("conv3d seed " + std::to_string(seed), grad_check(loss, params, analytic, kH));
}

void check_maxpool3d(Suite& s, uint64_t seed) {
  RngStream rng(seed, "grad/maxpool");
  Tensor x = random_tensor({2, 4, 4, 4}, rng);
  MaxPool3dCache cache;
  Tensor probe = maxpool3d(x, {2, 2, 2}, {2, 2, 2}, &cache);
  Tensor up = random_tensor(probe.shape(), rng);
  auto loss = [&] { return weighted_sum(maxpool3d(x, {2, 2, 2}, {2, 2, 2}), up); };
  std::map<std::string, Tensor> analytic;
  analytic.emplace("x", maxpool3d_backward(up, cache));
  s.record("maxpool3d seed " + std::to_string(seed), grad_check(loss, {{"x", &x}}, analytic, kH));
}

void check_spp3d(Suite& s, uint64_t seed) {
  RngStream rng(seed, "grad/spp");
  Tensor x = random_tensor({2, 3, 4, 4}, rng);
  Spp3dCache cache;
  Tensor probe = spp3d(x, &cache);
  Tensor up = random_tensor(probe.shape(), rng);
  auto loss = [&] { return weighted_sum(spp3d(x), up); };
  std::map<std::string, Tensor> analytic;
  analytic.emplace("x", spp3d_backward(up, cache));
  s.record("spp3d seed " + std::to_string(seed), grad_check(loss, {{"x", &x}}, analytic, kH));
}

void check_batchnorm(Suite& s, uint64_t seed) {
  RngStream rng(seed, "grad/bn");
  Tensor x = random_tensor({2, 3, 2, 3, 3}, rng);
  BatchNormParams base = BatchNormParams::init(3);
  Tensor gamma = random_tensor({3}, rng, 0.5, 1.5);
  Tensor beta = random_tensor({3}, rng, -0.5, 0.5);
  Tensor up = random_tensor(x.shape(), rng);
  auto loss = [&] {
    BatchNormParams p = base;  // running stats are scratch
    p.gamma = gamma;
    p.beta = beta;
    return weighted_sum(batchnorm3d(x, p, true), up);
  };
  BatchNormParams p = base;
  p.gamma = gamma;
  p.beta = beta;
  BatchNorm3dCache cache;
  batchnorm3d(x, p, true, &cache);
  BatchNormGrads g = batchnorm3d_backward(up, p, cache);
  std::map<std::string, Tensor*> params{{"x", &x}, {"gamma", &gamma}, {"beta", &beta}};
  std::map<std::string, Tensor> analytic;
  analytic.emplace("x", g.d_input);
  analytic.emplace("gamma", g.d_gamma);
  analytic.emplace("beta", g.d_beta);
  s.record("batchnorm3d seed " + std::to_string(seed), grad_check(loss, params, analytic, kH));
}

void check_dropout(Suite& s, uint64_t seed) {
  RngStream rng(seed, "grad/dropout");
  Tensor x = random_tensor({50}, rng);
  Tensor up = random_tensor({50}, rng);
  const double rate = 0.5;
  DropoutCache cache;
  RngStream mask_rng = rng.fork("mask");
  dropout(x, rate, true, mask_rng, &cache);
  // The loss replays the frozen mask so finite differences see a fixed map.
  auto loss = [&] {
    double t = 0.0;
    const double scale = 1.0 / (1.0 - rate);
    for (int64_t i = 0; i < x.size(); ++i) {
      t += (cache.keep[static_cast<size_t>(i)] ? x[i] * scale : 0.0) * up[i];
    }
    return t;
  };
  std::map<std::string, Tensor> analytic;
  analytic.emplace("x", dropout_backward(up, rate, cache));
  s.record("dropout seed " + std::to_string(seed), grad_check(loss, {{"x", &x}}, analytic, kH));
}

void check_lstm(Suite& s, uint64_t seed) {
  RngStream rng(seed, "grad/lstm");
  const int f = 3, in = 4, hidden = 5;
  LstmParams p;
  p.w_x = random_tensor({4 * hidden, in}, rng, -0.5, 0.5);
  p.w_h = random_tensor({4 * hidden, hidden}, rng, -0.5, 0.5);
  p.b = random_tensor({4 * hidden}, rng, -0.5, 0.5);
  Tensor x = random_tensor({f, in}, rng);
  Tensor h0 = random_tensor({hidden}, rng, -0.5, 0.5);
  Tensor c0 = random_tensor({hidden}, rng, -0.5, 0.5);
  Tensor up = random_tensor({f, hidden}, rng);
  auto loss = [&] { return weighted_sum(lstm_sequence(x, p, h0, c0), up); };
  LstmCache cache;
  lstm_sequence(x, p, h0, c0, &cache);
  LstmGrads g = lstm_sequence_backward(x, p, h0, c0, cache, up);
  std::map<std::string, Tensor*> params{{"x", &x},     {"w_x", &p.w_x}, {"w_h", &p.w_h},
                                        {"b", &p.b},   {"h0", &h0},     {"c0", &c0}};
  std::map<std::string, Tensor> analytic;
  analytic.emplace("x", g.d_inputs);
  analytic.emplace("w_x", g.d_w_x);
  analytic.emplace("w_h", g.d_w_h);
  analytic.emplace("b", g.d_b);
  analytic.emplace("h0", g.d_h0);
  analytic.emplace("c0", g.d_c0);
  s.record("lstm_sequence seed " + std::to_string(seed), grad_check(loss, params, analytic, kH));
}

void check_losses(Suite& s, uint64_t seed) {
  RngStream rng(seed, "grad/losses");
  {  // BCE through a preceding sigmoid
    const int n = 6;
    Tensor logits = random_tensor({n}, rng, -2.0, 2.0);
    std::vector<double> labels(n);
    for (auto& y : labels) y = rng.bernoulli(0.5) ? 1.0 : 0.0;
    auto probs = [&] {
      std::vector<double> z(n);
      for (int i = 0; i < n; ++i) z[static_cast<size_t>(i)] = sigmoid(logits[i]);
      return z;
    };
    auto loss = [&] { return bce_loss(probs(), labels); };
    std::vector<double> d = bce_loss_backward_logits(probs(), labels);
    Tensor analytic_t({n}, std::move(d));
    std::map<std::string, Tensor> analytic;
    analytic.emplace("logits", std::move(analytic_t));
    s.record("bce_loss seed " + std::to_string(seed),
             grad_check(loss, {{"logits", &logits}}, analytic, kH));
  }
  {  // MSE
    const int n = 8;
    Tensor pred = random_tensor({n}, rng);
    std::vector<double> target(n);
    for (auto& t : target) t = rng.uniform();
    auto loss = [&] {
      return mse_loss(std::vector<double>(pred.data(), pred.data() + n), target);
    };
    Tensor analytic_t({n}, mse_loss_backward(std::vector<double>(pred.data(), pred.data() + n),
                                             target));
    std::map<std::string, Tensor> analytic;
    analytic.emplace("pred", std::move(analytic_t));
    s.record("mse_loss seed " + std::to_string(seed),
             grad_check(loss, {{"pred", &pred}}, analytic, kH));
  }
  {  // cosine consistency, gradient w.r.t. v_temp only
    const int n = 8;
    Tensor v_temp = random_tensor({n}, rng, 0.2, 2.0);
    Tensor v_motion = random_tensor({n}, rng, 0.2, 1.0);
    auto loss = [&] { return cosine_consistency_loss(v_temp, v_motion); };
    std::map<std::string, Tensor> analytic;
    analytic.emplace("v_temp", cosine_consistency_loss_backward(v_temp, v_motion));
    s.record("cosine_consistency_loss seed " + std::to_string(seed),
             grad_check(loss, {{"v_temp", &v_temp}}, analytic, kH));
  }
}

VideoSample toy_video(uint64_t seed) {
  RngStream rng(seed, "grad/video");
  VideoSample v;
  v.id = "toy";
  v.width = 24;
  v.height = 20;
  v.n_frames = 4;
  v.key_frame_index = 2;
  v.label = 1;
  v.pixels.assign(static_cast<size_t>(v.n_frames) * v.height * v.width, 0);
  for (int i = 0; i < v.n_frames; ++i) {
    int x1 = 2 + i, y1 = 3, x2 = 14 + i, y2 = 15;
    v.rois.emplace_back(Roi{x1, y1, x2, y2});
    std::vector<float> feat(kFeatureDim);
    for (auto& f : feat) f = static_cast<float>(rng.uniform());
    v.features.emplace_back(std::move(feat));
  }
  return v;
}

void check_localizer_model(Suite& s, uint64_t seed) {
  VideoSample video = toy_video(seed);
  ScoreSequence labels = {0.3, 0.6, 1.0, 0.5};
  RngStream init_rng(seed, "grad/localizer_init");
  LocalizerModel model = LocalizerModel::init(LocalizerConfig{}, init_rng);

  auto loss = [&] {
    std::map<std::string, Tensor> scratch;
    return localizer_loss_and_grads(model, video, labels, 0.0, scratch);
  };
  std::map<std::string, Tensor> analytic;
  localizer_loss_and_grads(model, video, labels, 1.0, analytic);
  RngStream coord_rng(seed, "grad/localizer_coords");
  s.record("localizer model seed " + std::to_string(seed),
           grad_check(loss, model.parameters(), analytic, kH, 64, &coord_rng));
}

void check_classifier_model(Suite& s, uint64_t seed) {
  // Reduced geometry with the canonical layer pattern: 4 conv+BN blocks,
  // pooling after blocks 3 and 4, attention on the first pooled map, SPP head.
  ClassifierConfig cfg;
  cfg.t = 8;
  cfg.input_hw = 32;
  cfg.widths = {2, 3, 4, 4};
  cfg.strides = {{{1, 1, 1}, {1, 2, 2}, {1, 2, 2}, {1, 1, 1}}};
  cfg.attention_plan = {{2, 2, 2}, {2, 2, 1}, {1, 1, 1}};
  cfg.head_hidden = 8;

  RngStream rng(seed, "grad/classifier");
  RngStream init_rng = rng.fork("init");
  ClassifierModel model = ClassifierModel::init(cfg, init_rng);

  Tensor clip = random_tensor({1, 1, cfg.t, cfg.input_hw, cfg.input_hw}, rng, 0.0, 1.0);
  Tensor v_motion = random_tensor({model.trace.t_w}, rng, 0.3, 1.0);
  const double label = 1.0;

  auto loss = [&] {
    ClassifierOutput out = classifier_forward(model, clip, true, nullptr, nullptr);
    Tensor vt({model.trace.t_w}, std::vector<double>(out.v_temp[0]));
    return bce_loss({out.probs[0]}, {label}) + cosine_consistency_loss(vt, v_motion);
  };

  ClassifierCache cache;
  ClassifierOutput out = classifier_forward(model, clip, true, nullptr, &cache);
  std::vector<double> d_logits = bce_loss_backward_logits(out.probs, {label});
  Tensor vt({model.trace.t_w}, std::vector<double>(out.v_temp[0]));
  Tensor d_vt = cosine_consistency_loss_backward(vt, v_motion);
  std::vector<std::vector<double>> d_v_temp{{d_vt.data(), d_vt.data() + d_vt.size()}};
  std::map<std::string, Tensor> analytic = classifier_backward(model, cache, d_logits, d_v_temp);

  s.record("classifier model (reduced) seed " + std::to_string(seed),
           grad_check(loss, model.parameters(), analytic, kH));
}

}  // namespace

bool GradSuiteResult::all_pass() const {
  for (const auto& line : lines) {
    if (!(line.max_rel_err < tolerance)) return false;
  }
  return !lines.empty();
}

double GradSuiteResult::worst() const {
  double w = 0.0;
  for (const auto& line : lines) w = std::max(w, line.max_rel_err);
  return w;
}

GradSuiteResult run_gradient_suite(std::ostream* log, int seeds) {
  Suite s;
  s.log = log;
  for (int i = 0; i < seeds; ++i) {
    uint64_t seed = 1000 + static_cast<uint64_t>(i);
    check_fully_connected(s, seed);
    check_relu(s, seed);
    check_conv2d(s, seed);
    check_conv3d(s, seed);
    check_maxpool3d(s, seed);
    check_spp3d(s, seed);
    check_batchnorm(s, seed);
    check_dropout(s, seed);
    check_lstm(s, seed);
    check_losses(s, seed);
    check_localizer_model(s, seed);
    check_classifier_model(s, seed);
  }
  if (log) {
    (*log) << (s.result.all_pass() ? "gradient suite: all checks passed"
                                   : "gradient suite: FAILURES above")
           << " (worst max_rel_err " << s.result.worst() << ")\n";
  }
  return s.result;
}

}  // namespace kfg
