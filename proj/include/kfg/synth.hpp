#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "kfg/dataset.hpp"

namespace kfg {

/// Knobs for the synthetic ultrasound-video generator. Each video is a
/// speckle-texture background scanned by a virtual probe whose translation
/// slows to a near-stop at the key-frame, with one elliptical nodule whose
/// size, edge sharpness and contrast peak there. Benign nodules are dark with
/// smooth boundaries and low-frequency interior shading; malignant ones have
/// harmonically perturbed boundaries, bright high-frequency interior speckle
/// and punctate bright foci.
struct SynthConfig {
  int n_videos = 20;
  int n_frames = 96;
  int frame_h = 256;
  int frame_w = 256;
  double class_balance = 0.5;  // fraction of malignant videos, matched exactly
  int clip_len = 32;           // videos shorter than this are a configuration error
  double detection_dropout = 0.03;  // chance a non-key frame loses its detection

  // Probe-motion model: per-frame step magnitude in pixels, interpolating
  // between far and near values with a Gaussian dip of width sigma at the
  // key-frame.
  double step_far = 3.0;
  double step_near = 0.15;
  double motion_dip_sigma = 3.0;

  void validate() const;
};

std::vector<VideoSample> generate_synthetic(const SynthConfig& config, uint64_t seed);

/// Generates and writes the dataset (manifest + containers) under `dir`.
void generate_synthetic_to_dir(const SynthConfig& config, uint64_t seed,
                               const std::filesystem::path& dir);

}  // namespace kfg
