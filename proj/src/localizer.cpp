#include "kfg/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kfg {

namespace {

void init_uniform(Tensor& t, int fan_in, int fan_out, RngStream& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
}

void accumulate(std::map<std::string, Tensor>& grads, const std::string& name, const Tensor& g,
                double scale) {
  auto [it, fresh] = grads.try_emplace(name, Tensor(g.shape()));
  if (!fresh && !it->second.same_shape(g)) {
    throw std::invalid_argument("gradient shape drift for " + name);
  }
  for (int64_t i = 0; i < g.size(); ++i) it->second[i] += scale * g[i];
}

}  // namespace

NoduleDescriptor build_descriptor(const VideoSample& video, int frame_index) {
  const auto& roi = video.rois.at(static_cast<size_t>(frame_index));
  const auto& feat = video.features.at(static_cast<size_t>(frame_index));
  if (!roi || !feat) {
    throw std::runtime_error("video '" + video.id + "': frame " + std::to_string(frame_index) +
                             " has no detection");
  }
  NoduleDescriptor d;
  d.appearance.assign(feat->begin(), feat->end());
  double w = video.width, h = video.height;
  double temporal = video.n_frames > 1
                        ? static_cast<double>(frame_index) / static_cast<double>(video.n_frames - 1)
                        : 0.0;
  d.spatiotemporal = {roi->x1 / w, roi->y1 / h, roi->x2 / w, roi->y2 / h, temporal};
  return d;
}

LocalizerModel LocalizerModel::init(const LocalizerConfig& cfg, RngStream& init_rng) {
  LocalizerModel m;
  m.cfg = cfg;
  const int e = cfg.embed_dim, hid = cfg.hidden, in = 2 * e;
  m.w_app = Tensor({e, cfg.feature_dim});
  m.b_app = Tensor({e});
  m.w_st = Tensor({e, 5});
  m.b_st = Tensor({e});
  m.lstm.w_x = Tensor({4 * hid, in});
  m.lstm.w_h = Tensor({4 * hid, hid});
  m.lstm.b = Tensor({4 * hid});
  m.w_h1 = Tensor({cfg.head_hidden, hid});
  m.b_h1 = Tensor({cfg.head_hidden});
  m.w_h2 = Tensor({1, cfg.head_hidden});
  m.b_h2 = Tensor({1});

  init_uniform(m.w_app, cfg.feature_dim, e, init_rng);
  init_uniform(m.w_st, 5, e, init_rng);
  init_uniform(m.lstm.w_x, in, hid, init_rng);
  init_uniform(m.lstm.w_h, hid, hid, init_rng);
  init_uniform(m.w_h1, hid, cfg.head_hidden, init_rng);
  init_uniform(m.w_h2, cfg.head_hidden, 1, init_rng);
  return m;
}

std::map<std::string, Tensor*> LocalizerModel::parameters() {
  return {
      {"fc_app.weights", &w_app}, {"fc_app.bias", &b_app},
      {"fc_st.weights", &w_st},   {"fc_st.bias", &b_st},
      {"lstm.w_x", &lstm.w_x},    {"lstm.w_h", &lstm.w_h}, {"lstm.b", &lstm.b},
      {"head1.weights", &w_h1},   {"head1.bias", &b_h1},
      {"head2.weights", &w_h2},   {"head2.bias", &b_h2},
  };
}

ScoreSequence localizer_forward(const LocalizerModel& model, const VideoSample& video,
                                LocalizerCache* cache) {
  std::vector<int> detected = video.detected_frames();
  if (detected.empty()) {
    throw std::runtime_error("video '" + video.id + "': no detections to localize over");
  }
  const int f = static_cast<int>(detected.size());
  const int e = model.cfg.embed_dim;

  Tensor x_app({f, model.cfg.feature_dim});
  Tensor x_st({f, 5});
  for (int r = 0; r < f; ++r) {
    NoduleDescriptor d = build_descriptor(video, detected[static_cast<size_t>(r)]);
    std::copy(d.appearance.begin(), d.appearance.end(),
              x_app.data() + static_cast<int64_t>(r) * model.cfg.feature_dim);
    std::copy(d.spatiotemporal.begin(), d.spatiotemporal.end(),
              x_st.data() + static_cast<int64_t>(r) * 5);
  }

  Tensor app_pre = fully_connected(x_app, model.w_app, model.b_app);
  Tensor st_pre = fully_connected(x_st, model.w_st, model.b_st);
  Tensor app_emb = relu(app_pre);
  Tensor st_emb = relu(st_pre);

  Tensor lstm_in({f, 2 * e});
  for (int r = 0; r < f; ++r) {
    std::copy(app_emb.data() + static_cast<int64_t>(r) * e,
              app_emb.data() + static_cast<int64_t>(r + 1) * e,
              lstm_in.data() + static_cast<int64_t>(r) * 2 * e);
    std::copy(st_emb.data() + static_cast<int64_t>(r) * e,
              st_emb.data() + static_cast<int64_t>(r + 1) * e,
              lstm_in.data() + static_cast<int64_t>(r) * 2 * e + e);
  }

  Tensor h0({model.cfg.hidden}), c0({model.cfg.hidden});
  LstmCache lstm_cache;
  Tensor h_out = lstm_sequence(lstm_in, model.lstm, h0, c0, &lstm_cache);

  Tensor head1_pre = fully_connected(h_out, model.w_h1, model.b_h1);
  Tensor head1 = relu(head1_pre);
  Tensor logits = fully_connected(head1, model.w_h2, model.b_h2);

  std::vector<double> scores(static_cast<size_t>(f));
  for (int r = 0; r < f; ++r) scores[static_cast<size_t>(r)] = sigmoid(logits[r]);

  ScoreSequence seq(static_cast<size_t>(video.n_frames), 0.0);
  for (int r = 0; r < f; ++r) seq[static_cast<size_t>(detected[static_cast<size_t>(r)])] = scores[static_cast<size_t>(r)];

  if (cache) {
    cache->detected = std::move(detected);
    cache->x_app = std::move(x_app);
    cache->x_st = std::move(x_st);
    cache->app_pre = std::move(app_pre);
    cache->st_pre = std::move(st_pre);
    cache->lstm_in = std::move(lstm_in);
    cache->lstm = std::move(lstm_cache);
    cache->h_out = std::move(h_out);
    cache->head1_pre = std::move(head1_pre);
    cache->logits = std::move(logits);
    cache->scores = std::move(scores);
  }
  return seq;
}

std::map<std::string, Tensor> localizer_backward(const LocalizerModel& model,
                                                 const LocalizerCache& cache,
                                                 const std::vector<double>& d_scores) {
  const int f = static_cast<int>(cache.detected.size());
  const int e = model.cfg.embed_dim;
  if (d_scores.size() != static_cast<size_t>(f)) {
    throw std::invalid_argument("localizer_backward: upstream gradient per detected frame");
  }

  Tensor d_logits({f, 1});
  for (int r = 0; r < f; ++r) {
    double z = cache.scores[static_cast<size_t>(r)];
    d_logits[r] = d_scores[static_cast<size_t>(r)] * z * (1.0 - z);
  }

  std::map<std::string, Tensor> grads;
  Tensor head1 = relu(cache.head1_pre);
  LayerGrads g2 = fully_connected_backward(head1, model.w_h2, d_logits);
  grads.emplace("head2.weights", std::move(g2.d_params.at("weights")));
  grads.emplace("head2.bias", std::move(g2.d_params.at("bias")));

  Tensor d_head1_pre = relu_backward(cache.head1_pre, g2.d_input);
  LayerGrads g1 = fully_connected_backward(cache.h_out, model.w_h1, d_head1_pre);
  grads.emplace("head1.weights", std::move(g1.d_params.at("weights")));
  grads.emplace("head1.bias", std::move(g1.d_params.at("bias")));

  Tensor h0({model.cfg.hidden}), c0({model.cfg.hidden});
  LstmGrads gl = lstm_sequence_backward(cache.lstm_in, model.lstm, h0, c0, cache.lstm, g1.d_input);
  grads.emplace("lstm.w_x", std::move(gl.d_w_x));
  grads.emplace("lstm.w_h", std::move(gl.d_w_h));
  grads.emplace("lstm.b", std::move(gl.d_b));

  Tensor d_app_emb({f, e}), d_st_emb({f, e});
  for (int r = 0; r < f; ++r) {
    std::copy(gl.d_inputs.data() + static_cast<int64_t>(r) * 2 * e,
              gl.d_inputs.data() + static_cast<int64_t>(r) * 2 * e + e,
              d_app_emb.data() + static_cast<int64_t>(r) * e);
    std::copy(gl.d_inputs.data() + static_cast<int64_t>(r) * 2 * e + e,
              gl.d_inputs.data() + static_cast<int64_t>(r + 1) * 2 * e,
              d_st_emb.data() + static_cast<int64_t>(r) * e);
  }

  Tensor d_app_pre = relu_backward(cache.app_pre, d_app_emb);
  LayerGrads ga = fully_connected_backward(cache.x_app, model.w_app, d_app_pre);
  grads.emplace("fc_app.weights", std::move(ga.d_params.at("weights")));
  grads.emplace("fc_app.bias", std::move(ga.d_params.at("bias")));

  Tensor d_st_pre = relu_backward(cache.st_pre, d_st_emb);
  LayerGrads gs = fully_connected_backward(cache.x_st, model.w_st, d_st_pre);
  grads.emplace("fc_st.weights", std::move(gs.d_params.at("weights")));
  grads.emplace("fc_st.bias", std::move(gs.d_params.at("bias")));
  return grads;
}

double localizer_loss_and_grads(const LocalizerModel& model, const VideoSample& video,
                                const ScoreSequence& labels, double grad_scale,
                                std::map<std::string, Tensor>& grads) {
  if (labels.size() != static_cast<size_t>(video.n_frames)) {
    throw std::invalid_argument("label sequence length mismatch for video '" + video.id + "'");
  }
  LocalizerCache cache;
  localizer_forward(model, video, &cache);
  const int f = static_cast<int>(cache.detected.size());

  std::vector<double> pred(static_cast<size_t>(f)), target(static_cast<size_t>(f));
  for (int r = 0; r < f; ++r) {
    pred[static_cast<size_t>(r)] = cache.scores[static_cast<size_t>(r)];
    target[static_cast<size_t>(r)] = labels[static_cast<size_t>(cache.detected[static_cast<size_t>(r)])];
  }
  double loss = mse_loss(pred, target);
  std::vector<double> d_scores = mse_loss_backward(pred, target);
  auto video_grads = localizer_backward(model, cache, d_scores);
  for (const auto& [name, g] : video_grads) accumulate(grads, name, g, grad_scale);
  return loss;
}

int predict_keyframe(const LocalizerModel& model, const VideoSample& video) {
  ScoreSequence scores = localizer_forward(model, video);
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
    if (scores[static_cast<size_t>(i)] > scores[static_cast<size_t>(best)]) best = i;
  }
  return best;
}

double accuracy_at_tolerance(const std::vector<int>& predictions, const std::vector<int>& labels,
                             int d) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw std::invalid_argument("accuracy_at_tolerance: prediction/label size mismatch");
  }
  if (d < 0) throw std::invalid_argument("accuracy_at_tolerance: tolerance must be >= 0");
  int hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (std::abs(predictions[i] - labels[i]) <= d) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::vector<double> train_localizer(LocalizerModel& model, const std::vector<VideoSample>& videos,
                                    const LocalizerTrainConfig& cfg, AdamState* opt_out) {
  if (videos.empty()) throw std::invalid_argument("train_localizer: empty dataset");
  if (cfg.batch < 1 || cfg.epochs < 1) throw std::invalid_argument("train_localizer: bad config");

  std::vector<ScoreSequence> labels;
  labels.reserve(videos.size());
  for (const auto& v : videos) labels.push_back(generate_score_labels(v));

  AdamState opt;
  opt.cfg.lr = cfg.lr;
  auto params = model.parameters();

  RngStream order_rng(cfg.seed, "localizer_train");
  std::vector<size_t> order(videos.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(order_rng.uniform_int(static_cast<int64_t>(i)));
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    size_t cursor = 0;
    while (cursor < order.size()) {
      size_t batch_end = std::min(order.size(), cursor + static_cast<size_t>(cfg.batch));
      double inv_batch = 1.0 / static_cast<double>(batch_end - cursor);
      std::map<std::string, Tensor> grads;
      for (size_t idx = cursor; idx < batch_end; ++idx) {
        size_t v = order[idx];
        epoch_loss += localizer_loss_and_grads(model, videos[v], labels[v], inv_batch, grads);
      }
      opt.step(params, grads);
      if (cfg.round_params_f32) {
        for (auto& [name, t] : params) t->round_to_f32();
      }
      cursor = batch_end;
    }
    epoch_losses.push_back(epoch_loss / static_cast<double>(videos.size()));
  }
  if (opt_out) *opt_out = opt;
  return epoch_losses;
}

}  // namespace kfg
