#include "kfg/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kfg {

namespace {

void init_uniform(Tensor& t, int64_t fan_in, int64_t fan_out, RngStream& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

int64_t volume(const std::vector<int64_t>& shape, size_t from = 0) {
  int64_t v = 1;
  for (size_t i = from; i < shape.size(); ++i) v *= shape[i];
  return v;
}

/// Copies sample `s` of a (N, rest...) batch into its own tensor.
Tensor take_sample(const Tensor& batch, int64_t s) {
  std::vector<int64_t> shape(batch.shape().begin() + 1, batch.shape().end());
  int64_t stride = volume(shape);
  Tensor out(shape);
  std::copy(batch.data() + s * stride, batch.data() + (s + 1) * stride, out.data());
  return out;
}

void put_sample(Tensor& batch, int64_t s, const Tensor& sample) {
  int64_t stride = sample.size();
  std::copy(sample.data(), sample.data() + stride, batch.data() + s * stride);
}

/// Copies temporal slice d of one sample of a (N,C,Tw,h,w) map into (C,h,w).
Tensor take_slice(const Tensor& batch, int64_t s, int64_t d) {
  const int64_t c = batch.dim(1), tw = batch.dim(2), plane = batch.dim(3) * batch.dim(4);
  Tensor out({c, batch.dim(3), batch.dim(4)});
  for (int64_t ci = 0; ci < c; ++ci) {
    const double* src = batch.data() + (((s * c + ci) * tw) + d) * plane;
    std::copy(src, src + plane, out.data() + ci * plane);
  }
  return out;
}

void add_slice(Tensor& batch, int64_t s, int64_t d, const Tensor& grad) {
  const int64_t c = batch.dim(1), tw = batch.dim(2), plane = batch.dim(3) * batch.dim(4);
  for (int64_t ci = 0; ci < c; ++ci) {
    double* dst = batch.data() + (((s * c + ci) * tw) + d) * plane;
    const double* src = grad.data() + ci * plane;
    for (int64_t i = 0; i < plane; ++i) dst[i] += src[i];
  }
}

void add_into(std::map<std::string, Tensor>& grads, const std::string& name, Tensor g) {
  auto [it, fresh] = grads.try_emplace(name, std::move(g));
  if (!fresh) {
    Tensor& acc = it->second;
    for (int64_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  }
}

}  // namespace

ClassifierModel ClassifierModel::init(const ClassifierConfig& cfg, RngStream& init_rng) {
  ClassifierModel m;
  m.cfg = cfg;
  if (cfg.t < 1 || cfg.input_hw < 1) throw std::invalid_argument("classifier: degenerate input");

  std::vector<int64_t> cur = {cfg.t, cfg.input_hw, cfg.input_hw};
  int in_ch = 1;
  for (int l = 0; l < 4; ++l) {
    m.conv_spec[static_cast<size_t>(l)] =
        ConvSpec::conv3d(in_ch, cfg.widths[static_cast<size_t>(l)], {3, 3, 3},
                         cfg.strides[static_cast<size_t>(l)], {1, 1, 1});
    cur = m.conv_spec[static_cast<size_t>(l)].output_extents(cur);
    m.trace.conv_out[static_cast<size_t>(l)] = {cfg.widths[static_cast<size_t>(l)], cur[0], cur[1], cur[2]};
    in_ch = cfg.widths[static_cast<size_t>(l)];

    auto pool_after = [&](std::vector<int64_t>& spatial) {
      for (auto& e : spatial) {
        if (e < 2) throw std::invalid_argument("classifier: pooling window exceeds feature map");
        e = e / 2;
      }
    };
    if (l == 2) {
      pool_after(cur);
      m.trace.pool1_out = {in_ch, cur[0], cur[1], cur[2]};
    }
    if (l == 3) {
      pool_after(cur);
      m.trace.pool2_out = {in_ch, cur[0], cur[1], cur[2]};
    }
  }
  m.trace.t_w = static_cast<int>(m.trace.pool1_out[1]);

  if (cfg.use_attention) {
    if (cfg.attention_plan.empty()) throw std::invalid_argument("classifier: empty attention plan");
    int64_t hw = m.trace.pool1_out[2];
    if (m.trace.pool1_out[3] != hw) {
      throw std::invalid_argument("classifier: attention expects square slices");
    }
    m.trace.attn_spatial = {hw};
    int ch = static_cast<int>(m.trace.pool1_out[0]);
    for (const auto& plan : cfg.attention_plan) {
      ConvSpec spec = ConvSpec::conv2d(ch, plan.out_ch, {plan.kernel, plan.kernel},
                                       {plan.stride, plan.stride}, {0, 0});
      auto out = spec.output_extents({hw, hw});
      hw = out[0];
      m.trace.attn_spatial.push_back(hw);
      m.attn_spec.push_back(spec);
      ch = plan.out_ch;
    }
    if (hw != 1 || ch != 1) {
      throw std::invalid_argument("classifier: attention plan must end at 1 channel, 1x1");
    }
  }

  if (cfg.use_spp) {
    const auto& p2 = m.trace.pool2_out;
    if (p2[1] < 2 || p2[2] < 2 || p2[3] < 2) {
      throw std::invalid_argument("classifier: SPP needs every pooled extent >= 2");
    }
    m.trace.head_in = p2[0] * (p2[1] * p2[2] * p2[3] + 8 + 1);
  } else {
    m.trace.head_in = volume(m.trace.pool2_out);
  }

  for (int l = 0; l < 4; ++l) {
    const ConvSpec& spec = m.conv_spec[static_cast<size_t>(l)];
    m.conv_w[static_cast<size_t>(l)] =
        Tensor({spec.out_channels, spec.in_channels, 3, 3, 3});
    m.conv_b[static_cast<size_t>(l)] = Tensor({spec.out_channels});
    init_uniform(m.conv_w[static_cast<size_t>(l)], spec.in_channels * 27, spec.out_channels * 27,
                 init_rng);
    m.bn[static_cast<size_t>(l)] = BatchNormParams::init(spec.out_channels);
  }
  if (cfg.use_attention) {
    for (const auto& spec : m.attn_spec) {
      int k = spec.kernel[0];
      Tensor w({spec.out_channels, spec.in_channels, k, k});
      init_uniform(w, spec.in_channels * k * k, spec.out_channels * k * k, init_rng);
      m.attn_w.push_back(std::move(w));
      m.attn_b.push_back(Tensor({spec.out_channels}));
    }
  }
  m.fc1_w = Tensor({cfg.head_hidden, m.trace.head_in});
  m.fc1_b = Tensor({cfg.head_hidden});
  m.fc2_w = Tensor({1, cfg.head_hidden});
  m.fc2_b = Tensor({1});
  init_uniform(m.fc1_w, m.trace.head_in, cfg.head_hidden, init_rng);
  init_uniform(m.fc2_w, cfg.head_hidden, 1, init_rng);
  return m;
}

std::map<std::string, Tensor*> ClassifierModel::parameters() {
  std::map<std::string, Tensor*> p;
  for (int l = 0; l < 4; ++l) {
    std::string base = "conv" + std::to_string(l + 1);
    p[base + ".weights"] = &conv_w[static_cast<size_t>(l)];
    p[base + ".bias"] = &conv_b[static_cast<size_t>(l)];
    std::string bnb = "bn" + std::to_string(l + 1);
    p[bnb + ".gamma"] = &bn[static_cast<size_t>(l)].gamma;
    p[bnb + ".beta"] = &bn[static_cast<size_t>(l)].beta;
  }
  for (size_t l = 0; l < attn_w.size(); ++l) {
    std::string base = "attn" + std::to_string(l + 1);
    p[base + ".weights"] = &attn_w[l];
    p[base + ".bias"] = &attn_b[l];
  }
  p["fc1.weights"] = &fc1_w;
  p["fc1.bias"] = &fc1_b;
  p["fc2.weights"] = &fc2_w;
  p["fc2.bias"] = &fc2_b;
  return p;
}

std::map<std::string, Tensor*> ClassifierModel::buffers() {
  std::map<std::string, Tensor*> b;
  for (int l = 0; l < 4; ++l) {
    std::string bnb = "bn" + std::to_string(l + 1);
    b[bnb + ".running_mean"] = &bn[static_cast<size_t>(l)].running_mean;
    b[bnb + ".running_var"] = &bn[static_cast<size_t>(l)].running_var;
  }
  return b;
}

ClassifierOutput classifier_forward(ClassifierModel& model, const Tensor& clips, bool training,
                                    RngStream* dropout_rng, ClassifierCache* cache) {
  if (clips.rank() != 5 || clips.dim(1) != 1 || clips.dim(2) != model.cfg.t ||
      clips.dim(3) != model.cfg.input_hw || clips.dim(4) != model.cfg.input_hw) {
    throw std::invalid_argument("classifier input must be (N,1," + std::to_string(model.cfg.t) +
                                "," + std::to_string(model.cfg.input_hw) + "," +
                                std::to_string(model.cfg.input_hw) + "), got " + clips.shape_str());
  }
  const int64_t n = clips.dim(0);
  if (cache) cache->input = clips;

  // Blocks 1-3: conv + BN, pooling after the third.
  Tensor cur = conv3d_batch(clips, model.conv_spec[0], model.conv_w[0], model.conv_b[0]);
  cur = batchnorm3d(std::move(cur), model.bn[0], training, cache ? &cache->bn[0] : nullptr);
  cur = conv3d_batch(cur, model.conv_spec[1], model.conv_w[1], model.conv_b[1]);
  cur = batchnorm3d(std::move(cur), model.bn[1], training, cache ? &cache->bn[1] : nullptr);
  cur = conv3d_batch(cur, model.conv_spec[2], model.conv_w[2], model.conv_b[2]);
  cur = batchnorm3d(std::move(cur), model.bn[2], training, cache ? &cache->bn[2] : nullptr);

  const auto& p1s = model.trace.pool1_out;
  Tensor pool1_out({n, p1s[0], p1s[1], p1s[2], p1s[3]});
  std::vector<MaxPool3dCache> pool1_caches(cache ? static_cast<size_t>(n) : 0);
  for (int64_t s = 0; s < n; ++s) {
    Tensor sample = take_sample(cur, s);
    Tensor pooled = maxpool3d(sample, {2, 2, 2}, {2, 2, 2},
                              cache ? &pool1_caches[static_cast<size_t>(s)] : nullptr);
    put_sample(pool1_out, s, pooled);
  }
  cur = Tensor();  // free the conv3 activation

  // Motion-attention branch per temporal slice.
  const int t_w = model.trace.t_w;
  std::vector<std::vector<double>> v_temp;
  std::vector<std::vector<double>> attn_logits;
  std::vector<std::vector<Tensor>> attn_acts;
  Tensor conv4_in;
  if (model.cfg.use_attention) {
    v_temp.assign(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(t_w)));
    attn_logits.assign(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(t_w)));
    if (cache) attn_acts.assign(static_cast<size_t>(n), {});
    conv4_in = Tensor(pool1_out.shape());
    const int64_t plane = p1s[2] * p1s[3];
    for (int64_t s = 0; s < n; ++s) {
      for (int d = 0; d < t_w; ++d) {
        Tensor act = take_slice(pool1_out, s, d);
        for (size_t l = 0; l < model.attn_spec.size(); ++l) {
          if (cache) attn_acts[static_cast<size_t>(s)].push_back(act);
          act = conv2d(act, model.attn_spec[l], model.attn_w[l], model.attn_b[l]);
        }
        double logit = act[0];
        double w = 2.0 * sigmoid(logit);
        attn_logits[static_cast<size_t>(s)][static_cast<size_t>(d)] = logit;
        v_temp[static_cast<size_t>(s)][static_cast<size_t>(d)] = w;
        for (int64_t ci = 0; ci < p1s[0]; ++ci) {
          const double* src = pool1_out.data() + (((s * p1s[0] + ci) * t_w) + d) * plane;
          double* dst = conv4_in.data() + (((s * p1s[0] + ci) * t_w) + d) * plane;
          for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] * w;
        }
      }
    }
  }
  const Tensor& block4_in = model.cfg.use_attention ? conv4_in : pool1_out;

  Tensor z4 = conv3d_batch(block4_in, model.conv_spec[3], model.conv_w[3], model.conv_b[3]);
  conv4_in = Tensor();
  Tensor a4 = batchnorm3d(std::move(z4), model.bn[3], training, cache ? &cache->bn[3] : nullptr);

  const auto& p2s = model.trace.pool2_out;
  Tensor head_in({n, model.trace.head_in});
  std::vector<MaxPool3dCache> pool2_caches(cache ? static_cast<size_t>(n) : 0);
  std::vector<Spp3dCache> spp_caches(cache && model.cfg.use_spp ? static_cast<size_t>(n) : 0);
  for (int64_t s = 0; s < n; ++s) {
    Tensor sample = take_sample(a4, s);
    Tensor pooled = maxpool3d(sample, {2, 2, 2}, {2, 2, 2},
                              cache ? &pool2_caches[static_cast<size_t>(s)] : nullptr);
    if (model.cfg.use_spp) {
      Tensor feat = spp3d(pooled, cache ? &spp_caches[static_cast<size_t>(s)] : nullptr);
      std::copy(feat.data(), feat.data() + feat.size(), head_in.data() + s * model.trace.head_in);
    } else {
      std::copy(pooled.data(), pooled.data() + pooled.size(),
                head_in.data() + s * model.trace.head_in);
    }
  }
  a4 = Tensor();
  (void)p2s;

  Tensor fc1_pre = fully_connected(head_in, model.fc1_w, model.fc1_b);
  Tensor hidden = relu(fc1_pre);
  DropoutCache drop_cache;
  const bool dropout_active = training && dropout_rng && model.cfg.dropout_rate > 0.0;
  Tensor dropped;
  if (dropout_active) {
    dropped = dropout(hidden, model.cfg.dropout_rate, true, *dropout_rng, &drop_cache);
  } else {
    dropped = std::move(hidden);
  }
  Tensor logits = fully_connected(dropped, model.fc2_w, model.fc2_b);

  ClassifierOutput out;
  out.probs.resize(static_cast<size_t>(n));
  for (int64_t s = 0; s < n; ++s) out.probs[static_cast<size_t>(s)] = sigmoid(logits[s]);
  out.v_temp = v_temp;

  if (cache) {
    cache->pool1 = std::move(pool1_caches);
    cache->pool2 = std::move(pool2_caches);
    cache->pool1_out = std::move(pool1_out);
    cache->attn_acts = std::move(attn_acts);
    cache->attn_logits = std::move(attn_logits);
    cache->v_temp = std::move(v_temp);
    cache->spp = std::move(spp_caches);
    cache->head_in = std::move(head_in);
    cache->fc1_pre = std::move(fc1_pre);
    cache->drop = std::move(drop_cache);
    cache->dropout_active = dropout_active;
    cache->dropped = std::move(dropped);
    cache->probs = out.probs;
  }
  return out;
}

std::map<std::string, Tensor> classifier_backward(
    const ClassifierModel& model, const ClassifierCache& cache,
    const std::vector<double>& d_logits, const std::vector<std::vector<double>>& d_v_temp) {
  const int64_t n = cache.input.dim(0);
  if (d_logits.size() != static_cast<size_t>(n)) {
    throw std::invalid_argument("classifier_backward: one logit gradient per sample");
  }
  if (model.cfg.use_attention && d_v_temp.size() != static_cast<size_t>(n)) {
    throw std::invalid_argument("classifier_backward: one v_temp gradient per sample");
  }
  std::map<std::string, Tensor> grads;

  // Head.
  Tensor d_logit_t({n, 1});
  for (int64_t s = 0; s < n; ++s) d_logit_t[s] = d_logits[static_cast<size_t>(s)];
  LayerGrads g2 = fully_connected_backward(cache.dropped, model.fc2_w, d_logit_t);
  add_into(grads, "fc2.weights", std::move(g2.d_params.at("weights")));
  add_into(grads, "fc2.bias", std::move(g2.d_params.at("bias")));
  Tensor d_hidden = cache.dropout_active
                        ? dropout_backward(g2.d_input, model.cfg.dropout_rate, cache.drop)
                        : std::move(g2.d_input);
  Tensor d_fc1_pre = relu_backward(cache.fc1_pre, d_hidden);
  LayerGrads g1 = fully_connected_backward(cache.head_in, model.fc1_w, d_fc1_pre);
  add_into(grads, "fc1.weights", std::move(g1.d_params.at("weights")));
  add_into(grads, "fc1.bias", std::move(g1.d_params.at("bias")));

  // SPP / flatten and second pooling, per sample.
  const auto& p2s = model.trace.pool2_out;
  Tensor d_a4({n, p2s[0], model.trace.conv_out[3][1], model.trace.conv_out[3][2],
               model.trace.conv_out[3][3]});
  for (int64_t s = 0; s < n; ++s) {
    Tensor d_feat({model.trace.head_in});
    std::copy(g1.d_input.data() + s * model.trace.head_in,
              g1.d_input.data() + (s + 1) * model.trace.head_in, d_feat.data());
    Tensor d_pooled;
    if (model.cfg.use_spp) {
      d_pooled = spp3d_backward(d_feat, cache.spp[static_cast<size_t>(s)]);
    } else {
      d_pooled = Tensor({p2s[0], p2s[1], p2s[2], p2s[3]}, std::move(d_feat.values()));
    }
    Tensor d_sample = maxpool3d_backward(d_pooled, cache.pool2[static_cast<size_t>(s)]);
    put_sample(d_a4, s, d_sample);
  }
  g1.d_input = Tensor();

  // Block 4 back through BN and conv; its input is recomputed, not cached.
  BatchNormGrads bg4 = batchnorm3d_backward(d_a4, model.bn[3], cache.bn[3]);
  add_into(grads, "bn4.gamma", std::move(bg4.d_gamma));
  add_into(grads, "bn4.beta", std::move(bg4.d_beta));
  d_a4 = Tensor();
  Tensor block4_in;
  if (model.cfg.use_attention) {
    block4_in = Tensor(cache.pool1_out.shape());
    const int64_t c = cache.pool1_out.dim(1);
    const int t_w = model.trace.t_w;
    const int64_t plane = cache.pool1_out.dim(3) * cache.pool1_out.dim(4);
    for (int64_t s = 0; s < n; ++s) {
      for (int d = 0; d < t_w; ++d) {
        double w = cache.v_temp[static_cast<size_t>(s)][static_cast<size_t>(d)];
        for (int64_t ci = 0; ci < c; ++ci) {
          const double* src = cache.pool1_out.data() + (((s * c + ci) * t_w) + d) * plane;
          double* dst = block4_in.data() + (((s * c + ci) * t_w) + d) * plane;
          for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] * w;
        }
      }
    }
  }
  LayerGrads g4 = conv3d_batch_backward(model.cfg.use_attention ? block4_in : cache.pool1_out,
                                        model.conv_spec[3], model.conv_w[3], bg4.d_input);
  add_into(grads, "conv4.weights", std::move(g4.d_params.at("weights")));
  add_into(grads, "conv4.bias", std::move(g4.d_params.at("bias")));
  block4_in = Tensor();
  bg4.d_input = Tensor();

  // Attention junction: product rule plus the branch gradients.
  Tensor d_pool1(cache.pool1_out.shape());
  if (model.cfg.use_attention) {
    const int64_t c = cache.pool1_out.dim(1);
    const int t_w = model.trace.t_w;
    const int64_t plane = cache.pool1_out.dim(3) * cache.pool1_out.dim(4);
    const size_t n_layers = model.attn_spec.size();
    for (int64_t s = 0; s < n; ++s) {
      for (int d = 0; d < t_w; ++d) {
        const double w = cache.v_temp[static_cast<size_t>(s)][static_cast<size_t>(d)];
        double d_w = d_v_temp[static_cast<size_t>(s)][static_cast<size_t>(d)];
        for (int64_t ci = 0; ci < c; ++ci) {
          const double* dp1a = g4.d_input.data() + (((s * c + ci) * t_w) + d) * plane;
          const double* p1 = cache.pool1_out.data() + (((s * c + ci) * t_w) + d) * plane;
          double* dp1 = d_pool1.data() + (((s * c + ci) * t_w) + d) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            dp1[i] = dp1a[i] * w;
            d_w += dp1a[i] * p1[i];
          }
        }
        // v_temp = 2*sigmoid(logit)
        double sig = 0.5 * w;
        double d_logit = d_w * 2.0 * sig * (1.0 - sig);
        Tensor d_act({1, 1, 1});
        d_act[0] = d_logit;
        for (size_t l = n_layers; l-- > 0;) {
          const Tensor& act_in =
              cache.attn_acts[static_cast<size_t>(s)][static_cast<size_t>(d) * n_layers + l];
          LayerGrads ga = conv2d_backward(act_in, model.attn_spec[l], model.attn_w[l], d_act);
          std::string base = "attn" + std::to_string(l + 1);
          add_into(grads, base + ".weights", std::move(ga.d_params.at("weights")));
          add_into(grads, base + ".bias", std::move(ga.d_params.at("bias")));
          d_act = std::move(ga.d_input);
        }
        add_slice(d_pool1, s, d, d_act);
      }
    }
  } else {
    d_pool1 = std::move(g4.d_input);
  }
  g4.d_input = Tensor();

  // First pooling back to block 3.
  const auto& c3 = model.trace.conv_out[2];
  Tensor d_a3({n, c3[0], c3[1], c3[2], c3[3]});
  for (int64_t s = 0; s < n; ++s) {
    Tensor d_sample = maxpool3d_backward(take_sample(d_pool1, s), cache.pool1[static_cast<size_t>(s)]);
    put_sample(d_a3, s, d_sample);
  }
  d_pool1 = Tensor();

  BatchNormGrads bg3 = batchnorm3d_backward(d_a3, model.bn[2], cache.bn[2]);
  add_into(grads, "bn3.gamma", std::move(bg3.d_gamma));
  add_into(grads, "bn3.beta", std::move(bg3.d_beta));
  d_a3 = Tensor();
  {
    Tensor a2 = batchnorm3d_output_from_xhat(cache.bn[1], model.bn[1]);
    LayerGrads g3 = conv3d_batch_backward(a2, model.conv_spec[2], model.conv_w[2], bg3.d_input);
    add_into(grads, "conv3.weights", std::move(g3.d_params.at("weights")));
    add_into(grads, "conv3.bias", std::move(g3.d_params.at("bias")));
    bg3.d_input = Tensor();
    a2 = Tensor();

    BatchNormGrads bg2 = batchnorm3d_backward(g3.d_input, model.bn[1], cache.bn[1]);
    add_into(grads, "bn2.gamma", std::move(bg2.d_gamma));
    add_into(grads, "bn2.beta", std::move(bg2.d_beta));
    g3.d_input = Tensor();

    Tensor a1 = batchnorm3d_output_from_xhat(cache.bn[0], model.bn[0]);
    LayerGrads g2c = conv3d_batch_backward(a1, model.conv_spec[1], model.conv_w[1], bg2.d_input);
    add_into(grads, "conv2.weights", std::move(g2c.d_params.at("weights")));
    add_into(grads, "conv2.bias", std::move(g2c.d_params.at("bias")));
    bg2.d_input = Tensor();
    a1 = Tensor();

    BatchNormGrads bg1 = batchnorm3d_backward(g2c.d_input, model.bn[0], cache.bn[0]);
    add_into(grads, "bn1.gamma", std::move(bg1.d_gamma));
    add_into(grads, "bn1.beta", std::move(bg1.d_beta));
    g2c.d_input = Tensor();

    LayerGrads g1c = conv3d_batch_backward(cache.input, model.conv_spec[0], model.conv_w[0],
                                           bg1.d_input, /*want_d_input=*/false);
    add_into(grads, "conv1.weights", std::move(g1c.d_params.at("weights")));
    add_into(grads, "conv1.bias", std::move(g1c.d_params.at("bias")));
  }
  return grads;
}

LossRecord compute_losses(double prob, int label, const Tensor& v_temp, const Tensor& v_motion) {
  LossRecord rec;
  rec.l_cls = bce_loss({prob}, {static_cast<double>(label)});
  rec.l_motion = v_temp.size() > 0 ? cosine_consistency_loss(v_temp, v_motion) : 0.0;
  rec.total = rec.l_cls + rec.l_motion;
  return rec;
}

}  // namespace kfg
