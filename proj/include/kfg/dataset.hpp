#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kfg/tensor.hpp"

namespace kfg {

/// Axis-aligned pixel box, inclusive-exclusive: 0 <= x1 < x2 <= W.
struct Roi {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  int64_t area() const { return static_cast<int64_t>(width()) * height(); }
  bool valid_for(int frame_w, int frame_h) const {
    return 0 <= x1 && x1 < x2 && x2 <= frame_w && 0 <= y1 && y1 < y2 && y2 <= frame_h;
  }
  bool operator==(const Roi&) const = default;
};

/// One grayscale frame with values scaled to [0,1].
struct Frame {
  int height = 0, width = 0;
  std::vector<double> px;  // row-major, height*width
  double at(int y, int x) const { return px[static_cast<size_t>(y) * width + x]; }
};

constexpr int kFeatureDim = 256;

/// A labelled ultrasound video: 8-bit frames, the per-frame nodule detection
/// track (ROI plus a feature vector where the detector fired), the annotated
/// key-frame index and the benign/malignant label.
struct VideoSample {
  std::string id;
  int width = 0, height = 0, n_frames = 0;
  std::vector<uint8_t> pixels;  // n_frames * height * width
  std::vector<std::optional<Roi>> rois;
  std::vector<std::optional<std::vector<float>>> features;
  int key_frame_index = 0;
  int label = 0;  // 0 = benign, 1 = malignant

  const uint8_t* frame_bytes(int i) const {
    return pixels.data() + static_cast<size_t>(i) * height * width;
  }
  Frame frame(int i) const;
  bool has_detection(int i) const { return rois[static_cast<size_t>(i)].has_value(); }
  std::vector<int> detected_frames() const;

  /// Checks every invariant; throws with the video id and frame index.
  void validate() const;
};

// ---- on-disk containers ------------------------------------------------------
//
// Frame container (.kfgv):   magic "KFGV", version u16, width u16, height u16,
//                            n_frames u32, then n_frames*H*W raw bytes.
// Feature container (.kfgf): magic "KFGF", version u16, n_entries u32, then
//                            n_entries of (frame u32, 256 x f32). All integers
//                            and floats little-endian.
// Manifest: UTF-8 JSON; per video {id, frames_file, width, height, n_frames,
//           key_frame_index, label, rois: [[frame,x1,y1,x2,y2],...],
//           features_file (optional)}.

constexpr uint16_t kContainerVersion = 1;

void write_frames_file(const std::filesystem::path& path, const VideoSample& video);
void read_frames_file(const std::filesystem::path& path, VideoSample& into);
/// Reads a contiguous frame range [begin, end) without loading the whole file.
std::vector<uint8_t> read_frames_range(const std::filesystem::path& path, int begin, int end,
                                       int expected_w, int expected_h);

void write_features_file(const std::filesystem::path& path, const VideoSample& video);
void read_features_file(const std::filesystem::path& path, VideoSample& into);

void write_dataset(const std::filesystem::path& dir, const std::vector<VideoSample>& videos);
std::vector<VideoSample> load_dataset(const std::filesystem::path& manifest_path);

/// Manifest rows without pixel data, for streaming pipelines.
struct ManifestEntry {
  std::string id;
  std::filesystem::path frames_file;
  std::optional<std::filesystem::path> features_file;
  int width = 0, height = 0, n_frames = 0;
  int key_frame_index = 0;
  int label = 0;
  std::vector<std::optional<Roi>> rois;
};
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& manifest_path);
/// Loads one video (frames + features) described by a manifest entry.
VideoSample load_video(const ManifestEntry& entry);
/// Loads everything but the pixel data (features, ROIs, annotations); enough
/// for the similarity/localizer stage, which never touches pixels.
VideoSample load_video_metadata(const ManifestEntry& entry);

}  // namespace kfg
