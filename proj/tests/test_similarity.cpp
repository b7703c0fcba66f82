#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kfg/similarity.hpp"
#include "kfg/rng.hpp"

using namespace kfg;

namespace {

Frame make_frame(int h, int w, std::vector<double> px) {
  Frame f;
  f.height = h;
  f.width = w;
  f.px = std::move(px);
  return f;
}

/// A small fully-annotated video without pixel data (similarity math only).
VideoSample annotated_video(int n, int key, RngStream& rng) {
  VideoSample v;
  v.id = "test";
  v.width = 64;
  v.height = 64;
  v.n_frames = n;
  v.key_frame_index = key;
  v.label = 0;
  v.pixels.assign(static_cast<size_t>(n) * 64 * 64, 0);
  for (int i = 0; i < n; ++i) {
    v.rois.emplace_back(Roi{8, 8, 40, 40});
    std::vector<float> feat(kFeatureDim);
    for (auto& f : feat) f = static_cast<float>(rng.uniform());
    v.features.emplace_back(std::move(feat));
  }
  return v;
}

}  // namespace

TEST_CASE("iou analytic cases") {
  Roi a{0, 0, 2, 2};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, Roi{5, 5, 7, 7}) == 0.0);
  CHECK(iou(a, Roi{1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  // Symmetry
  CHECK(iou(Roi{1, 1, 3, 3}, a) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("feature_similarity normalizes by the per-video max distance") {
  RngStream rng(1, "sim");
  VideoSample v = annotated_video(3, 0, rng);
  // All features equal the key-frame's: every distance 0, every similarity 1.
  for (int i = 0; i < 3; ++i) v.features[static_cast<size_t>(i)] = v.features[0];
  auto sim = feature_similarity(v);
  for (double s : sim) CHECK(s == doctest::Approx(1.0));

  // Distances 0, 1, 2 -> similarities 1, 0.5, 0.
  VideoSample w = annotated_video(3, 0, rng);
  std::vector<float> base(kFeatureDim, 0.0f);
  std::vector<float> one(kFeatureDim, 0.0f);
  one[0] = 1.0f;
  std::vector<float> two(kFeatureDim, 0.0f);
  two[0] = 2.0f;
  w.features[0] = base;
  w.features[1] = one;
  w.features[2] = two;
  auto s = feature_similarity(w);
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(s[1] == doctest::Approx(0.5));
  CHECK(s[2] == doctest::Approx(0.0));
}

TEST_CASE("feature_similarity gives 0 to undetected frames") {
  RngStream rng(2, "sim");
  VideoSample v = annotated_video(4, 1, rng);
  v.rois[3] = std::nullopt;
  v.features[3] = std::nullopt;
  auto s = feature_similarity(v);
  CHECK(s[3] == 0.0);
  CHECK(s[1] == doctest::Approx(1.0));  // key frame distance 0
}

TEST_CASE("index_similarity formula") {
  auto s = index_similarity(101, 50);
  CHECK(s[50] == doctest::Approx(1.0));
  CHECK(s[0] == doctest::Approx(0.0));
  CHECK(s[100] == doctest::Approx(0.0));
  CHECK(s[25] == doctest::Approx(0.5));
  auto single = index_similarity(1, 0);
  CHECK(single[0] == doctest::Approx(1.0));
}

TEST_CASE("generate_score_labels pins the key-frame to exactly 1") {
  RngStream rng(3, "sim");
  VideoSample v = annotated_video(12, 5, rng);
  auto labels = generate_score_labels(v);
  CHECK(labels[5] == 1.0);
  for (double l : labels) {
    CHECK(l >= 0.0);
    CHECK(l <= 1.0);
  }
}

TEST_CASE("generate_score_labels hand case: mean(1, 0, 1) = 2/3") {
  RngStream rng(4, "sim");
  VideoSample v = annotated_video(3, 1, rng);
  // Frame 0: identical feature and ROI to the key-frame. N=3, k=1 means
  // max_j |j-k| = 1, so index similarity at i=0 is 0.
  v.features[0] = v.features[1];
  v.features[2] = std::vector<float>(kFeatureDim, 0.9f);  // some nonzero distance
  auto labels = generate_score_labels(v);
  CHECK(labels[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(labels[1] == 1.0);
}

TEST_CASE("generate_score_labels rejects a key-frame without annotation") {
  RngStream rng(5, "sim");
  VideoSample v = annotated_video(4, 2, rng);
  v.rois[2] = std::nullopt;
  CHECK_THROWS_AS(generate_score_labels(v), std::runtime_error);
}

TEST_CASE("ssim identity, symmetry, and the constant-frames value") {
  RngStream rng(6, "sim");
  std::vector<double> px(64);
  for (auto& p : px) p = rng.uniform();
  Frame a = make_frame(8, 8, px);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  Frame zero = make_frame(4, 4, std::vector<double>(16, 0.0));
  Frame one = make_frame(4, 4, std::vector<double>(16, 1.0));
  const double c1 = 1e-4;
  CHECK(ssim(zero, one) == doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-12));

  std::vector<double> qx(64);
  for (auto& p : qx) p = rng.uniform();
  Frame b = make_frame(8, 8, qx);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-15));
  CHECK(ssim(a, b) >= 0.0);
  CHECK(ssim(a, b) <= 1.0);
}

TEST_CASE("hist_similarity intersection cases") {
  Frame a = make_frame(2, 2, {0.1, 0.1, 0.1, 0.1});
  CHECK(hist_similarity(a, a) == doctest::Approx(1.0));
  Frame b = make_frame(2, 2, {0.9, 0.9, 0.9, 0.9});
  CHECK(hist_similarity(a, b) == doctest::Approx(0.0));
  // Half the mass overlaps: a is all in one bin, c splits between that bin
  // and a far one.
  Frame c = make_frame(2, 2, {0.1, 0.1, 0.9, 0.9});
  CHECK(hist_similarity(a, c) == doctest::Approx(0.5));
  CHECK(hist_similarity(c, a) == doctest::Approx(0.5));
}

TEST_CASE("similarity outputs stay in [0,1] on random frame pairs") {
  RngStream rng(7, "sim");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> pa(36), pb(36);
    for (auto& p : pa) p = rng.uniform();
    for (auto& p : pb) p = rng.uniform();
    Frame a = make_frame(6, 6, pa), b = make_frame(6, 6, pb);
    double s = ssim(a, b), h = hist_similarity(a, b);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(h >= 0.0);
    CHECK(h <= 1.0);
    CHECK(s == doctest::Approx(ssim(b, a)).epsilon(1e-15));
    CHECK(h == doctest::Approx(hist_similarity(b, a)).epsilon(1e-15));
  }
}

namespace {
VideoSample pixel_video(const std::vector<std::vector<double>>& frames, int h, int w) {
  VideoSample v;
  v.id = "px";
  v.width = w;
  v.height = h;
  v.n_frames = static_cast<int>(frames.size());
  v.key_frame_index = 0;
  for (const auto& f : frames) {
    for (double p : f) v.pixels.push_back(static_cast<uint8_t>(p * 255.0 + 0.5));
  }
  v.rois.assign(frames.size(), Roi{0, 0, w, h});
  v.features.assign(frames.size(), std::vector<float>(kFeatureDim, 0.0f));
  return v;
}
}  // namespace

TEST_CASE("motion_index on a static video is all ones") {
  std::vector<double> f(16, 0.5);
  VideoSample v = pixel_video({f, f, f, f, f}, 4, 4);
  auto m = motion_index(v);
  REQUIRE(m.size() == 5);
  for (double mi : m) CHECK(mi == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("motion_index three-frame hand evaluation") {
  // Frames of two pixels; 8-bit storage keeps these values exact.
  // f0 = [0.2, 0.8], f1 = [0.4, 0.4], f2 = [0.8, 0.2]  (0.2*255 etc. rounded)
  std::vector<double> f0 = {51.0 / 255.0, 204.0 / 255.0};
  std::vector<double> f1 = {102.0 / 255.0, 102.0 / 255.0};
  std::vector<double> f2 = {204.0 / 255.0, 51.0 / 255.0};
  VideoSample v = pixel_video({f0, f1, f2}, 1, 2);

  // Hand evaluation of the definition. Means, variances, covariances over two
  // pixels; C1 = 1e-4, C2 = 9e-4; histogram intersection over 256 bins.
  auto hand_ssim = [](double a0, double a1, double b0, double b1) {
    double ma = (a0 + a1) / 2, mb = (b0 + b1) / 2;
    double va = ((a0 - ma) * (a0 - ma) + (a1 - ma) * (a1 - ma)) / 2;
    double vb = ((b0 - mb) * (b0 - mb) + (b1 - mb) * (b1 - mb)) / 2;
    double cov = ((a0 - ma) * (b0 - mb) + (a1 - ma) * (b1 - mb)) / 2;
    double s = ((2 * ma * mb + 1e-4) * (2 * cov + 9e-4)) /
               ((ma * ma + mb * mb + 1e-4) * (va + vb + 9e-4));
    return std::clamp(s, 0.0, 1.0);
  };
  double s01 = hand_ssim(f0[0], f0[1], f1[0], f1[1]);
  double s02 = hand_ssim(f0[0], f0[1], f2[0], f2[1]);
  double s12 = hand_ssim(f1[0], f1[1], f2[0], f2[1]);
  // Histograms: f0 and f2 occupy bins {51, 204} with half mass each -> 1.0;
  // f1 sits entirely in bin 102 -> no overlap with either.
  double h01 = 0.0, h02 = 1.0, h12 = 0.0;
  double p01 = 0.5 * (s01 + h01), p02 = 0.5 * (s02 + h02), p12 = 0.5 * (s12 + h12);
  std::vector<double> expected = {(p01 + p02) / 2, (p01 + p12) / 2, (p02 + p12) / 2};

  auto m = motion_index(v);
  REQUIRE(m.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(m[static_cast<size_t>(i)] ==
          doctest::Approx(expected[static_cast<size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("motion_index boundary frames shrink the neighbor set") {
  RngStream rng(8, "sim");
  std::vector<std::vector<double>> frames;
  for (int i = 0; i < 6; ++i) {
    std::vector<double> f(25);
    for (auto& p : f) p = rng.uniform();
    frames.push_back(std::move(f));
  }
  VideoSample v = pixel_video(frames, 5, 5);
  auto m = motion_index(v);
  // Frame 0 averages only pairs (0,1) and (0,2); recompute directly.
  Frame fr0 = v.frame(0), fr1 = v.frame(1), fr2 = v.frame(2);
  double p01 = 0.5 * (ssim(fr0, fr1) + hist_similarity(fr0, fr1));
  double p02 = 0.5 * (ssim(fr0, fr2) + hist_similarity(fr0, fr2));
  CHECK(m[0] == doctest::Approx((p01 + p02) / 2).epsilon(1e-12));

  VideoSample single = pixel_video({frames[0]}, 5, 5);
  CHECK_THROWS_AS(motion_index(single), std::invalid_argument);
}

TEST_CASE("motion_vector partitions the clip exactly") {
  std::vector<double> m(32, 0.5);
  auto v = motion_vector(m, 8);
  REQUIRE(v.size() == 8);
  for (double x : v) CHECK(x == doctest::Approx(0.5));

  std::vector<double> m2 = {1.0, 1.0, 0.0, 0.0};
  auto v2 = motion_vector(m2, 2);
  CHECK(v2[0] == doctest::Approx(1.0));
  CHECK(v2[1] == doctest::Approx(0.0));

  // Uneven split still covers every frame exactly once.
  std::vector<double> m3(10, 1.0);
  auto v3 = motion_vector(m3, 3);
  int covered = 0;
  for (int w = 0; w < 3; ++w) {
    int lo = w * 10 / 3, hi = (w + 1) * 10 / 3;
    covered += hi - lo;
  }
  CHECK(covered == 10);
  CHECK_THROWS_AS(motion_vector(std::vector<double>(3, 0.1), 8), std::invalid_argument);
}
