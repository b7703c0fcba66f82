#include "kfg/clip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kfg {

std::pair<int, int> Clip::source_range() const {
  auto [lo, hi] = std::minmax_element(source_frames.begin(), source_frames.end());
  return {*lo, *hi + 1};
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
  if (img.rank() != 2) throw std::invalid_argument("resize_bilinear expects (h,w)");
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear output must be positive");
  const int64_t h = img.dim(0), w = img.dim(1);
  Tensor out({out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    int64_t y0 = static_cast<int64_t>(fy);
    int64_t y1 = std::min(y0 + 1, h - 1);
    double wy = fy - static_cast<double>(y0);
    for (int ox = 0; ox < out_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      int64_t x0 = static_cast<int64_t>(fx);
      int64_t x1 = std::min(x0 + 1, w - 1);
      double wx = fx - static_cast<double>(x0);
      double top = img[y0 * w + x0] * (1.0 - wx) + img[y0 * w + x1] * wx;
      double bot = img[y1 * w + x0] * (1.0 - wx) + img[y1 * w + x1] * wx;
      out[static_cast<int64_t>(oy) * out_w + ox] = top * (1.0 - wy) + bot * wy;
    }
  }
  return out;
}

Tensor crop_and_resize(const Frame& frame, const Roi& roi) {
  if (!roi.valid_for(frame.width, frame.height)) {
    throw std::invalid_argument("crop_and_resize: ROI outside frame");
  }
  Tensor patch({roi.height(), roi.width()});
  for (int y = roi.y1; y < roi.y2; ++y) {
    for (int x = roi.x1; x < roi.x2; ++x) {
      patch[static_cast<int64_t>(y - roi.y1) * roi.width() + (x - roi.x1)] = frame.at(y, x);
    }
  }
  if (roi.height() == kClipSize && roi.width() == kClipSize) return patch;
  return resize_bilinear(patch, kClipSize, kClipSize);
}

std::vector<int> keyframe_window_slots(int n_frames, int key_frame, int t) {
  if (t < 1) throw std::invalid_argument("clip length must be positive");
  if (n_frames < 1 || key_frame < 0 || key_frame >= n_frames) {
    throw std::invalid_argument("keyframe_window_slots: key frame outside video");
  }
  // Shift keeps T frames inside the video; replication only happens for N < T.
  int start = key_frame - t / 2;
  int lo = std::min(0, n_frames - t), hi = std::max(0, n_frames - t);
  start = std::clamp(start, lo, hi);
  std::vector<int> slots(static_cast<size_t>(t));
  for (int slot = 0; slot < t; ++slot) {
    slots[static_cast<size_t>(slot)] = std::clamp(start + slot, 0, n_frames - 1);
  }
  return slots;
}

std::vector<int> uniform_window_slots(int n_frames, int t) {
  if (t < 1) throw std::invalid_argument("clip length must be positive");
  if (n_frames < 1) throw std::invalid_argument("uniform_window_slots: empty video");
  std::vector<int> slots(static_cast<size_t>(t));
  for (int slot = 0; slot < t; ++slot) {
    slots[static_cast<size_t>(slot)] =
        std::min(n_frames - 1, static_cast<int>(static_cast<int64_t>(slot) * n_frames / t));
  }
  return slots;
}

Clip extract_window_at(const VideoSample& video, const std::vector<int>& slots,
                       int fallback_roi_frame) {
  const auto& fallback = video.rois.at(static_cast<size_t>(fallback_roi_frame));
  if (!fallback) {
    throw std::runtime_error("video '" + video.id + "': fallback frame " +
                             std::to_string(fallback_roi_frame) + " has no ROI");
  }
  const int t = static_cast<int>(slots.size());
  Clip clip;
  clip.voxels = Tensor({1, t, kClipSize, kClipSize});
  clip.source_frames = slots;
  int last_decoded = -1;
  Tensor patch;
  for (int slot = 0; slot < t; ++slot) {
    int src = slots[static_cast<size_t>(slot)];
    if (src != last_decoded) {
      Frame f = video.frame(src);
      const auto& roi = video.rois[static_cast<size_t>(src)];
      patch = crop_and_resize(f, roi ? *roi : *fallback);
      last_decoded = src;
    }
    std::copy(patch.data(), patch.data() + kClipSize * kClipSize,
              clip.voxels.data() + static_cast<int64_t>(slot) * kClipSize * kClipSize);
  }
  return clip;
}

Clip extract_keyframe_window(const VideoSample& video, int t) {
  return extract_window_at(video, keyframe_window_slots(video.n_frames, video.key_frame_index, t),
                           video.key_frame_index);
}

Clip extract_uniform_window(const VideoSample& video, int t) {
  return extract_window_at(video, uniform_window_slots(video.n_frames, t),
                           video.key_frame_index);
}

Clip apply_augment(const Clip& clip, bool flip, double shift) {
  Clip out;
  out.source_frames = clip.source_frames;
  out.voxels = clip.voxels;
  const int t = clip.length();
  double* v = out.voxels.data();
  if (flip) {
    for (int slot = 0; slot < t; ++slot) {
      double* plane = v + static_cast<int64_t>(slot) * kClipSize * kClipSize;
      for (int y = 0; y < kClipSize; ++y) {
        std::reverse(plane + static_cast<int64_t>(y) * kClipSize,
                     plane + static_cast<int64_t>(y + 1) * kClipSize);
      }
    }
  }
  if (shift != 0.0) {
    for (int64_t i = 0; i < out.voxels.size(); ++i) {
      v[i] = std::clamp(v[i] + shift, 0.0, 1.0);
    }
  }
  return out;
}

Clip augment(const Clip& clip, RngStream& rng) {
  const bool flip = rng.bernoulli(0.5);
  const double shift = rng.uniform(-0.1, 0.1);
  return apply_augment(clip, flip, shift);
}

}  // namespace kfg
