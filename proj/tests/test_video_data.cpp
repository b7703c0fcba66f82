#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "kfg/clip.hpp"
#include "kfg/dataset.hpp"
#include "kfg/folds.hpp"
#include "kfg/similarity.hpp"
#include "kfg/synth.hpp"
#include "oracles.hpp"

using namespace kfg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("kfg_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SynthConfig tiny_config() {
  SynthConfig c;
  c.n_videos = 4;
  c.n_frames = 40;
  c.frame_h = 128;
  c.frame_w = 128;
  c.clip_len = 32;
  return c;
}

}  // namespace

TEST_CASE("dataset write-then-load round trip is bit-identical") {
  SynthConfig c = tiny_config();
  auto videos = generate_synthetic(c, 11);
  fs::path dir = temp_dir("roundtrip");
  write_dataset(dir, videos);
  auto loaded = load_dataset(dir / "manifest.json");
  REQUIRE(loaded.size() == videos.size());
  for (size_t i = 0; i < videos.size(); ++i) {
    CHECK(loaded[i].id == videos[i].id);
    CHECK(loaded[i].pixels == videos[i].pixels);
    CHECK(loaded[i].key_frame_index == videos[i].key_frame_index);
    CHECK(loaded[i].label == videos[i].label);
    REQUIRE(loaded[i].rois.size() == videos[i].rois.size());
    for (size_t f = 0; f < videos[i].rois.size(); ++f) {
      CHECK(loaded[i].rois[f].has_value() == videos[i].rois[f].has_value());
      if (videos[i].rois[f]) CHECK(*loaded[i].rois[f] == *videos[i].rois[f]);
      if (videos[i].features[f]) {
        CHECK(*loaded[i].features[f] == *videos[i].features[f]);  // f32 exact round trip
      }
    }
  }
  // Writing the same data again produces identical bytes.
  fs::path dir2 = temp_dir("roundtrip2");
  write_dataset(dir2, videos);
  for (const auto& e : fs::directory_iterator(dir)) {
    CHECK(slurp(e.path()) == slurp(dir2 / e.path().filename()));
  }
}

TEST_CASE("load_dataset reports invariant violations with the video id") {
  SynthConfig c = tiny_config();
  c.n_videos = 1;
  auto videos = generate_synthetic(c, 3);
  fs::path dir = temp_dir("badmanifest");
  write_dataset(dir, videos);

  // Corrupt the manifest: key_frame_index == N is out of range.
  std::ifstream in(dir / "manifest.json");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::string needle = "\"key_frame_index\": " + std::to_string(videos[0].key_frame_index);
  auto pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, needle.size(), "\"key_frame_index\": " + std::to_string(c.n_frames));
  std::ofstream(dir / "manifest.json", std::ios::trunc) << text;

  try {
    load_dataset(dir / "manifest.json");
    FAIL("expected a validation error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(videos[0].id) != std::string::npos);
    CHECK(std::string(e.what()).find("key_frame_index") != std::string::npos);
  }
}

TEST_CASE("empty manifest loads an empty dataset") {
  fs::path dir = temp_dir("empty");
  std::ofstream(dir / "manifest.json") << "[]\n";
  CHECK(load_dataset(dir / "manifest.json").empty());
}

TEST_CASE("frame container detects truncation with a byte offset") {
  SynthConfig c = tiny_config();
  c.n_videos = 1;
  auto videos = generate_synthetic(c, 5);
  fs::path dir = temp_dir("trunc");
  write_dataset(dir, videos);
  fs::path frames = dir / (videos[0].id + ".kfgv");
  fs::resize_file(frames, fs::file_size(frames) / 2);
  try {
    load_dataset(dir / "manifest.json");
    FAIL("expected a truncation error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("truncated at byte offset") != std::string::npos);
  }
}

TEST_CASE("generator is byte-identical under a fixed seed") {
  SynthConfig c = tiny_config();
  fs::path a = temp_dir("gen_a"), b = temp_dir("gen_b");
  generate_synthetic_to_dir(c, 7, a);
  generate_synthetic_to_dir(c, 7, b);
  for (const auto& e : fs::directory_iterator(a)) {
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  fs::path d = temp_dir("gen_d");
  generate_synthetic_to_dir(c, 8, d);
  bool any_diff = false;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().filename() == "manifest.json") continue;
    if (slurp(e.path()) != slurp(d / e.path().filename())) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("generator matches the requested class balance exactly") {
  SynthConfig c = tiny_config();
  c.n_videos = 10;
  c.class_balance = 0.3;
  auto videos = generate_synthetic(c, 2);
  int malignant = 0;
  for (const auto& v : videos) malignant += v.label;
  CHECK(malignant == 3);
}

TEST_CASE("generator rejects N < T") {
  SynthConfig c = tiny_config();
  c.n_frames = 16;
  CHECK_THROWS_AS(generate_synthetic(c, 1), std::invalid_argument);
}

TEST_CASE("generated motion index peaks at the key-frame") {
  SynthConfig c;
  c.n_videos = 20;
  c.n_frames = 64;
  c.frame_h = 160;
  c.frame_w = 160;
  auto videos = generate_synthetic(c, 21);
  int strict_max_at_key = 0, within3 = 0;
  for (const auto& v : videos) {
    auto m = motion_index(v);
    int argmax = 0;
    for (int i = 1; i < static_cast<int>(m.size()); ++i) {
      if (m[static_cast<size_t>(i)] > m[static_cast<size_t>(argmax)]) argmax = i;
    }
    if (argmax == v.key_frame_index) ++strict_max_at_key;
    if (std::abs(argmax - v.key_frame_index) <= 3) ++within3;
  }
  CHECK(strict_max_at_key >= 18);  // >= 90%
  CHECK(within3 >= 18);
}

TEST_CASE("crop_and_resize identity and constant patches") {
  RngStream rng(1, "vd");
  Frame f;
  f.height = 140;
  f.width = 150;
  f.px.resize(static_cast<size_t>(f.height) * f.width);
  for (auto& p : f.px) p = rng.uniform();
  Tensor same = crop_and_resize(f, Roi{10, 12, 122, 124});
  CHECK(same.shape() == std::vector<int64_t>{112, 112});
  for (int y = 0; y < 112; ++y)
    for (int x = 0; x < 112; ++x) {
      CHECK(same[y * 112 + x] == f.at(12 + y, 10 + x));
    }

  Frame c;
  c.height = 60;
  c.width = 60;
  c.px.assign(3600, 0.42);
  Tensor patch = crop_and_resize(c, Roi{5, 5, 25, 30});
  for (int64_t i = 0; i < patch.size(); ++i) CHECK(patch[i] == doctest::Approx(0.42));
  CHECK_THROWS_AS(crop_and_resize(c, Roi{50, 50, 70, 70}), std::invalid_argument);
}

TEST_CASE("resize_bilinear matches hand-computed weights on a 2x2 checkerboard") {
  Tensor img({2, 2}, {1.0, 0.0, 0.0, 1.0});
  Tensor up = resize_bilinear(img, 4, 4);
  // Half-pixel mapping: sample positions {0, 0.25, 0.75, 1} per axis, so the
  // value is (1-py)(1-px) + py*px for the checkerboard.
  const double pos[4] = {0.0, 0.25, 0.75, 1.0};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      double expect = (1 - pos[y]) * (1 - pos[x]) + pos[y] * pos[x];
      CHECK(up[y * 4 + x] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("keyframe window arithmetic examples") {
  auto s1 = keyframe_window_slots(96, 48, 32);
  CHECK(s1.front() == 32);
  CHECK(s1.back() == 63);
  auto s2 = keyframe_window_slots(96, 5, 32);
  CHECK(s2.front() == 0);
  CHECK(s2.back() == 31);
  auto s3 = keyframe_window_slots(20, 10, 32);
  int real = 0;
  for (size_t i = 1; i < s3.size(); ++i) real += s3[i] != s3[i - 1] ? 1 : 0;
  CHECK(real == 19);  // 20 distinct real frames, rest replicated
}

TEST_CASE("keyframe window matches the reference shift rule exhaustively") {
  const int t = 32;
  for (int n = 1; n <= 64; ++n) {
    for (int k = 0; k < n; ++k) {
      auto got = keyframe_window_slots(n, k, t);
      auto ref = oracle::window_slots_reference(n, k, t);
      REQUIRE(got.size() == ref.size());
      bool contains_key = false;
      for (size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i] == ref[i]);
        if (got[i] == k) contains_key = true;
        CHECK(got[i] >= 0);
        CHECK(got[i] < n);
      }
      CHECK(contains_key);
    }
  }
}

TEST_CASE("clips have canonical shape and range regardless of geometry") {
  SynthConfig c = tiny_config();
  c.n_videos = 2;
  auto videos = generate_synthetic(c, 9);
  for (const auto& v : videos) {
    Clip clip = extract_keyframe_window(v, 32);
    CHECK(clip.voxels.shape() == std::vector<int64_t>{1, 32, 112, 112});
    for (int64_t i = 0; i < clip.voxels.size(); ++i) {
      CHECK(clip.voxels[i] >= 0.0);
      CHECK(clip.voxels[i] <= 1.0);
    }
    auto [lo, hi] = clip.source_range();
    CHECK(lo >= 0);
    CHECK(hi <= v.n_frames);
    Clip uni = extract_uniform_window(v, 32);
    CHECK(uni.voxels.shape() == std::vector<int64_t>{1, 32, 112, 112});
  }
}

TEST_CASE("augment identity, double flip, and clamping") {
  SynthConfig c = tiny_config();
  c.n_videos = 1;
  auto videos = generate_synthetic(c, 13);
  Clip clip = extract_keyframe_window(videos[0], 32);

  Clip noop = apply_augment(clip, false, 0.0);
  CHECK(oracle::max_abs_diff(noop.voxels, clip.voxels) == 0.0);

  Clip twice = apply_augment(apply_augment(clip, true, 0.0), true, 0.0);
  CHECK(oracle::max_abs_diff(twice.voxels, clip.voxels) == 0.0);

  Clip bright = apply_augment(clip, false, 0.1);
  for (int64_t i = 0; i < bright.voxels.size(); ++i) {
    CHECK(bright.voxels[i] <= 1.0);
    if (clip.voxels[i] >= 0.95) CHECK(bright.voxels[i] == doctest::Approx(1.0));
  }

  RngStream rng(5, "aug");
  Clip random_aug = augment(clip, rng);
  CHECK(random_aug.voxels.shape() == clip.voxels.shape());
}

TEST_CASE("kfold assignments are disjoint, exhaustive, and stratified") {
  std::vector<std::pair<std::string, int>> ids;
  for (int i = 0; i < 10; ++i) ids.emplace_back("v" + std::to_string(i), i < 6 ? 0 : 1);

  FoldSplit s5 = kfold_split(ids, 5, 3);
  auto folds = s5.fold_members();
  size_t total = 0;
  for (const auto& f : folds) {
    CHECK(f.size() == 2);
    total += f.size();
  }
  CHECK(total == 10);

  // 6 benign + 4 malignant, k=2: each fold gets 3 benign + 2 malignant.
  FoldSplit s2 = kfold_split(ids, 2, 3);
  for (const auto& fold : s2.fold_members()) {
    int benign = 0, malignant = 0;
    for (const auto& id : fold) {
      int label = std::stoi(id.substr(1)) < 6 ? 0 : 1;
      (label == 0 ? benign : malignant) += 1;
    }
    CHECK(benign == 3);
    CHECK(malignant == 2);
  }

  // Determinism + coverage across sizes.
  for (int n : {7, 23, 40}) {
    std::vector<std::pair<std::string, int>> many;
    for (int i = 0; i < n; ++i) many.emplace_back("x" + std::to_string(i), i % 2);
    FoldSplit a = kfold_split(many, 5, 11);
    FoldSplit b = kfold_split(many, 5, 11);
    CHECK(a.assignments == b.assignments);
    size_t count = 0;
    std::vector<size_t> sizes(5, 0);
    for (const auto& [id, fold] : a.assignments) {
      ++count;
      sizes[static_cast<size_t>(fold)] += 1;
    }
    CHECK(count == static_cast<size_t>(n));
    auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*mx - *mn <= 1);
  }
  CHECK_THROWS_AS(kfold_split(ids, 11, 0), std::invalid_argument);
}
