#pragma once

#include <utility>
#include <vector>

#include "kfg/dataset.hpp"
#include "kfg/rng.hpp"
#include "kfg/tensor.hpp"

namespace kfg {

constexpr int kClipSize = 112;

/// A model-ready sub-video: T cropped frames as a (1, T, 112, 112) tensor plus
/// the video frame index each slot came from.
struct Clip {
  Tensor voxels;
  std::vector<int> source_frames;  // per slot, clamped into [0, N)
  int length() const { return static_cast<int>(source_frames.size()); }
  /// Real frames covered, as a half-open range [begin, end).
  std::pair<int, int> source_range() const;
};

/// Bilinear resize with half-pixel centers and edge clamping. img: (h, w).
Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

/// Crops `roi` out of the frame and resizes it to 112x112. Values stay in [0,1].
Tensor crop_and_resize(const Frame& frame, const Roi& roi);

/// Source frame per clip slot for the key-frame-centered window: the window
/// shifts to stay inside [0, N) and edge-replicates only when N < T.
std::vector<int> keyframe_window_slots(int n_frames, int key_frame, int t);
/// Source frame per slot for the uniform-sampling baseline.
std::vector<int> uniform_window_slots(int n_frames, int t);

/// T consecutive frames with the key-frame centered; per-frame crop uses that
/// frame's ROI when present, else the ROI at `center` (the video's key-frame
/// by default).
Clip extract_keyframe_window(const VideoSample& video, int t = 32);

/// Ablation baseline: T frames sampled evenly over the whole video.
Clip extract_uniform_window(const VideoSample& video, int t = 32);

/// Builds a clip from explicit slots with an explicit fallback-ROI frame.
Clip extract_window_at(const VideoSample& video, const std::vector<int>& slots,
                       int fallback_roi_frame);

/// Training augmentation: horizontal flip with probability 0.5, then an
/// intensity shift drawn from U(-0.1, 0.1), clamped back to [0,1].
Clip augment(const Clip& clip, RngStream& rng);
/// The deterministic core of `augment`; (flip=false, shift=0) is the identity.
Clip apply_augment(const Clip& clip, bool flip, double shift);

}  // namespace kfg
