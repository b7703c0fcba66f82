#pragma once

#include <vector>

#include "kfg/dataset.hpp"

namespace kfg {

/// Per-frame key-frame-likelihood scores in [0,1]. For generated labels the
/// key-frame's entry is exactly 1.
using ScoreSequence = std::vector<double>;

/// Motion description of one video: raw per-frame index M_i plus the windowed
/// vector the attention branch is trained against.
struct MotionVector {
  std::vector<double> per_frame;  // M_i
  std::vector<double> windowed;   // V_motion, length T_w
};

/// Intersection over union of two boxes; disjoint boxes give 0.
double iou(const Roi& a, const Roi& b);

/// Per-frame appearance similarity against the key-frame: Euclidean feature
/// distances normalized by the per-video maximum and flipped to [0,1]. Frames
/// without features score 0; if every distance is 0, every detected frame
/// scores 1.
std::vector<double> feature_similarity(const VideoSample& video);

/// s_i = 1 - |i - k| / max(1, max_j |j - k|).
std::vector<double> index_similarity(int n_frames, int key_frame);

/// The mean of feature, index and IOU similarity per frame, with the
/// key-frame forced to exactly 1. Frames without a ROI contribute IOU 0.
ScoreSequence generate_score_labels(const VideoSample& video);

/// Single-window SSIM over the whole frame, constants C1=(0.01)^2,
/// C2=(0.03)^2 for unit dynamic range, clamped to [0,1].
double ssim(const Frame& a, const Frame& b);

/// Intersection of 256-bin normalized intensity histograms, in [0,1].
double hist_similarity(const Frame& a, const Frame& b);

/// Motion index M_i: mean over available neighbors j in {i-2,i-1,i+1,i+2} of
/// (ssim(i,j) + hist_similarity(i,j)) / 2. Needs at least 2 frames.
std::vector<double> motion_index(const VideoSample& video);
/// Same, restricted to frames [begin, end) of the video (M is still computed
/// against true neighbors inside the full video).
std::vector<double> motion_index_range(const VideoSample& video, int begin, int end);

/// Averages M over T_w contiguous windows; window w spans
/// [floor(w*T/T_w), floor((w+1)*T/T_w)). Requires |M| >= T_w.
std::vector<double> motion_vector(const std::vector<double>& m, int t_w);

}  // namespace kfg
