#include "kfg/similarity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace kfg {

double iou(const Roi& a, const Roi& b) {
  int64_t ix = std::max(0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  int64_t iy = std::max(0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  int64_t inter = ix * iy;
  int64_t uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

std::vector<double> feature_similarity(const VideoSample& video) {
  const int k = video.key_frame_index;
  const auto& key_feat = video.features[static_cast<size_t>(k)];
  if (!key_feat) throw std::runtime_error("video '" + video.id + "': key-frame has no feature");

  std::vector<double> dist(static_cast<size_t>(video.n_frames), -1.0);
  double max_dist = 0.0;
  for (int i = 0; i < video.n_frames; ++i) {
    const auto& f = video.features[static_cast<size_t>(i)];
    if (!f) continue;
    double s = 0.0;
    for (int j = 0; j < kFeatureDim; ++j) {
      double d = static_cast<double>((*f)[j]) - static_cast<double>((*key_feat)[j]);
      s += d * d;
    }
    dist[static_cast<size_t>(i)] = std::sqrt(s);
    max_dist = std::max(max_dist, dist[static_cast<size_t>(i)]);
  }

  std::vector<double> sim(static_cast<size_t>(video.n_frames), 0.0);
  for (int i = 0; i < video.n_frames; ++i) {
    double d = dist[static_cast<size_t>(i)];
    if (d < 0.0) continue;                       // no detection
    sim[static_cast<size_t>(i)] = (max_dist == 0.0) ? 1.0 : 1.0 - d / max_dist;
  }
  return sim;
}

std::vector<double> index_similarity(int n_frames, int key_frame) {
  if (n_frames <= 0 || key_frame < 0 || key_frame >= n_frames) {
    throw std::invalid_argument("index_similarity: key frame outside video");
  }
  double max_d = std::max({1, key_frame, n_frames - 1 - key_frame});
  std::vector<double> sim(static_cast<size_t>(n_frames));
  for (int i = 0; i < n_frames; ++i) {
    sim[static_cast<size_t>(i)] = 1.0 - std::abs(i - key_frame) / max_d;
  }
  return sim;
}

ScoreSequence generate_score_labels(const VideoSample& video) {
  const int k = video.key_frame_index;
  const auto& key_roi = video.rois[static_cast<size_t>(k)];
  if (!key_roi) throw std::runtime_error("video '" + video.id + "': key-frame has no ROI");

  std::vector<double> feat_sim = feature_similarity(video);  // throws if key feature missing
  std::vector<double> idx_sim = index_similarity(video.n_frames, k);

  ScoreSequence labels(static_cast<size_t>(video.n_frames), 0.0);
  for (int i = 0; i < video.n_frames; ++i) {
    const auto& roi = video.rois[static_cast<size_t>(i)];
    double iou_sim = roi ? iou(*roi, *key_roi) : 0.0;
    labels[static_cast<size_t>(i)] =
        (feat_sim[static_cast<size_t>(i)] + idx_sim[static_cast<size_t>(i)] + iou_sim) / 3.0;
  }
  labels[static_cast<size_t>(k)] = 1.0;  // stated as its own rule, overriding the mean
  return labels;
}

double ssim(const Frame& a, const Frame& b) {
  if (a.height != b.height || a.width != b.width || a.px.empty()) {
    throw std::invalid_argument("ssim: frame geometry mismatch");
  }
  const double n = static_cast<double>(a.px.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < a.px.size(); ++i) {
    ma += a.px[i];
    mb += b.px[i];
  }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (size_t i = 0; i < a.px.size(); ++i) {
    double da = a.px[i] - ma, db = b.px[i] - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  va /= n;
  vb /= n;
  cov /= n;
  constexpr double c1 = 0.01 * 0.01;  // (K1 L)^2, L = 1
  constexpr double c2 = 0.03 * 0.03;
  double value = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
  return std::clamp(value, 0.0, 1.0);
}

double hist_similarity(const Frame& a, const Frame& b) {
  if (a.px.empty() || b.px.empty()) throw std::invalid_argument("hist_similarity: empty frame");
  std::array<double, 256> ha{}, hb{};
  auto accumulate = [](const Frame& f, std::array<double, 256>& h) {
    for (double v : f.px) {
      int bin = static_cast<int>(v * 256.0);
      bin = std::clamp(bin, 0, 255);
      h[static_cast<size_t>(bin)] += 1.0;
    }
    for (double& x : h) x /= static_cast<double>(f.px.size());
  };
  accumulate(a, ha);
  accumulate(b, hb);
  double s = 0.0;
  for (size_t i = 0; i < 256; ++i) s += std::min(ha[i], hb[i]);
  return s;
}

std::vector<double> motion_index_range(const VideoSample& video, int begin, int end) {
  if (video.n_frames < 2) {
    throw std::invalid_argument("motion_index: video '" + video.id + "' has no neighbors");
  }
  if (begin < 0 || end > video.n_frames || begin >= end) {
    throw std::out_of_range("motion_index_range: bad range");
  }
  // Frames are decoded once per call; neighbors reach at most 2 outside the
  // range. Pair similarities are shared between the two frames of a pair.
  const int n = video.n_frames;
  int lo = std::max(0, begin - 2), hi = std::min(n, end + 2);
  std::vector<Frame> frames;
  frames.reserve(static_cast<size_t>(hi - lo));
  for (int i = lo; i < hi; ++i) frames.push_back(video.frame(i));

  auto pairwise = [&](int i, int j) {
    const Frame& fi = frames[static_cast<size_t>(i - lo)];
    const Frame& fj = frames[static_cast<size_t>(j - lo)];
    return 0.5 * (ssim(fi, fj) + hist_similarity(fi, fj));
  };
  // sim[d-1][p] holds pairwise(p, p+d) for p in [lo, hi-d).
  std::vector<std::vector<double>> sim(2);
  for (int d = 1; d <= 2; ++d) {
    sim[static_cast<size_t>(d - 1)].resize(static_cast<size_t>(std::max(0, hi - d - lo)));
    for (int p = lo; p + d < hi; ++p) {
      sim[static_cast<size_t>(d - 1)][static_cast<size_t>(p - lo)] = pairwise(p, p + d);
    }
  }

  std::vector<double> m(static_cast<size_t>(end - begin), 0.0);
  for (int i = begin; i < end; ++i) {
    double total = 0.0;
    int count = 0;
    for (int off : {-2, -1, 1, 2}) {
      int j = i + off;
      if (j < 0 || j >= n) continue;
      int d = std::abs(off);
      int p = std::min(i, j);
      total += sim[static_cast<size_t>(d - 1)][static_cast<size_t>(p - lo)];
      ++count;
    }
    m[static_cast<size_t>(i - begin)] = total / static_cast<double>(count);
  }
  return m;
}

std::vector<double> motion_index(const VideoSample& video) {
  return motion_index_range(video, 0, video.n_frames);
}

std::vector<double> motion_vector(const std::vector<double>& m, int t_w) {
  const int t = static_cast<int>(m.size());
  if (t_w <= 0) throw std::invalid_argument("motion_vector: T_w must be positive");
  if (t < t_w) throw std::invalid_argument("motion_vector: fewer frames than windows");
  std::vector<double> v(static_cast<size_t>(t_w), 0.0);
  for (int w = 0; w < t_w; ++w) {
    int64_t lo = static_cast<int64_t>(w) * t / t_w;
    int64_t hi = static_cast<int64_t>(w + 1) * t / t_w;
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += m[static_cast<size_t>(i)];
    v[static_cast<size_t>(w)] = s / static_cast<double>(hi - lo);
  }
  return v;
}

}  // namespace kfg
