#include "kfg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kfg/clip.hpp"
#include "kfg/rng.hpp"

namespace kfg {

namespace {

constexpr int kPad = 40;          // texture margin the probe may wander into
constexpr int kWalkBound = kPad - 6;
constexpr double kTau = 6.283185307179586;

struct Grid {
  int h = 0, w = 0;
  std::vector<double> v;
  double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
};

/// Speckle with a short correlation length: uniform noise smoothed by two
/// passes of a separable [1,2,1]/4 kernel, plus a mild depth gradient.
Grid make_texture(int h, int w, RngStream& rng) {
  Grid g{h, w, std::vector<double>(static_cast<size_t>(h) * w)};
  for (auto& p : g.v) {
    double u = rng.uniform();
    p = 0.22 + 0.30 * u * u;  // skewed toward dark, like tissue echo
  }
  std::vector<double> tmp(g.v.size());
  for (int pass = 0; pass < 2; ++pass) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
        tmp[static_cast<size_t>(y) * w + x] = 0.25 * g.at(y, xm) + 0.5 * g.at(y, x) + 0.25 * g.at(y, xp);
      }
    }
    for (int x = 0; x < w; ++x) {
      for (int y = 0; y < h; ++y) {
        int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
        g.at(y, x) = 0.25 * tmp[static_cast<size_t>(ym) * w + x] +
                     0.5 * tmp[static_cast<size_t>(y) * w + x] +
                     0.25 * tmp[static_cast<size_t>(yp) * w + x];
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    double depth = 0.06 * (static_cast<double>(y) / h);
    for (int x = 0; x < w; ++x) g.at(y, x) += depth;
  }
  return g;
}

double sample_bilinear(const Grid& g, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(g.h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(g.w - 1));
  int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
  int y1 = std::min(y0 + 1, g.h - 1), x1 = std::min(x0 + 1, g.w - 1);
  double fy = y - y0, fx = x - x0;
  double top = g.at(y0, x0) * (1.0 - fx) + g.at(y0, x1) * fx;
  double bot = g.at(y1, x0) * (1.0 - fx) + g.at(y1, x1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

struct NoduleStyle {
  double rx, ry;                     // base half-radii in pixels
  double boundary_amp = 0.0;         // harmonic boundary perturbation (malignant)
  double harmonics[3] = {0, 0, 0};   // weights for angular orders 3, 5, 7
  double phases[3] = {0, 0, 0};
  Grid interior;                     // high-frequency interior pattern (malignant)
  std::vector<std::pair<double, double>> foci;  // punctate bright spots, nodule-relative
  int label = 0;
};

NoduleStyle make_style(int label, RngStream& rng) {
  NoduleStyle s;
  s.label = label;
  s.rx = rng.uniform(16.0, 26.0);
  s.ry = s.rx * rng.uniform(0.72, 1.08);
  if (label == 1) {
    s.boundary_amp = rng.uniform(0.16, 0.24);
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
      s.harmonics[i] = rng.uniform(0.4, 1.0);
      total += s.harmonics[i];
      s.phases[i] = rng.uniform(0.0, kTau);
    }
    for (double& a : s.harmonics) a /= total;
    s.interior = Grid{64, 64, std::vector<double>(64 * 64)};
    for (auto& p : s.interior.v) p = rng.uniform();
    int n_foci = 4 + static_cast<int>(rng.uniform_int(4));
    for (int i = 0; i < n_foci; ++i) {
      double ang = rng.uniform(0.0, kTau);
      double rad = rng.uniform(0.15, 0.75);
      s.foci.emplace_back(rad * std::cos(ang), rad * std::sin(ang));
    }
  }
  return s;
}

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

void SynthConfig::validate() const {
  if (n_videos < 1) throw std::invalid_argument("synthetic config: n_videos must be >= 1");
  if (n_frames < clip_len) {
    throw std::invalid_argument("synthetic config: n_frames " + std::to_string(n_frames) +
                                " < clip length " + std::to_string(clip_len));
  }
  if (frame_h < 128 || frame_w < 128) {
    throw std::invalid_argument("synthetic config: frame size must be at least 128x128");
  }
  if (class_balance < 0.0 || class_balance > 1.0) {
    throw std::invalid_argument("synthetic config: class_balance outside [0,1]");
  }
  if (detection_dropout < 0.0 || detection_dropout >= 1.0) {
    throw std::invalid_argument("synthetic config: detection_dropout outside [0,1)");
  }
}

std::vector<VideoSample> generate_synthetic(const SynthConfig& config, uint64_t seed) {
  config.validate();
  RngStream data_rng(seed, "data");

  // Exact class histogram: round(n * balance) malignant, order shuffled.
  const int n_mal = static_cast<int>(std::lround(config.n_videos * config.class_balance));
  std::vector<int> labels(static_cast<size_t>(config.n_videos), 0);
  std::fill(labels.begin(), labels.begin() + n_mal, 1);
  {
    RngStream shuffle_rng = data_rng.fork("labels");
    for (size_t i = labels.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(shuffle_rng.uniform_int(static_cast<int64_t>(i)));
      std::swap(labels[i - 1], labels[j]);
    }
  }

  const int h = config.frame_h, w = config.frame_w, n = config.n_frames;
  std::vector<VideoSample> videos;
  videos.reserve(static_cast<size_t>(config.n_videos));

  for (int vi = 0; vi < config.n_videos; ++vi) {
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "v%04d", vi);
    RngStream rng = data_rng.fork(idbuf);

    VideoSample video;
    video.id = idbuf;
    video.width = w;
    video.height = h;
    video.n_frames = n;
    video.label = labels[static_cast<size_t>(vi)];
    video.key_frame_index = 6 + static_cast<int>(rng.uniform_int(std::max(1, n - 12)));
    video.pixels.resize(static_cast<size_t>(n) * h * w);
    video.rois.assign(static_cast<size_t>(n), std::nullopt);
    video.features.assign(static_cast<size_t>(n), std::nullopt);
    const int k = video.key_frame_index;

    Grid texture = make_texture(h + 2 * kPad, w + 2 * kPad, rng);
    NoduleStyle style = make_style(video.label, rng);

    // Probe path: smooth heading, step magnitude dipping at the key-frame.
    std::vector<double> off_x(static_cast<size_t>(n)), off_y(static_cast<size_t>(n));
    double heading = rng.uniform(0.0, kTau);
    double px = 0.0, py = 0.0;
    for (int i = 0; i < n; ++i) {
      off_x[static_cast<size_t>(i)] = px;
      off_y[static_cast<size_t>(i)] = py;
      double di = static_cast<double>(i - k);
      double dip = std::exp(-di * di / (2.0 * config.motion_dip_sigma * config.motion_dip_sigma));
      double mag = (config.step_far * (1.0 - dip) + config.step_near * dip) * rng.uniform(0.7, 1.3);
      heading += rng.normal() * 0.5;
      px += mag * std::cos(heading);
      py += mag * std::sin(heading);
      // Reflect off the walk bound so the window never leaves the texture.
      if (px > kWalkBound) { px = 2 * kWalkBound - px; heading = kTau / 2 - heading; }
      if (px < -kWalkBound) { px = -2 * kWalkBound - px; heading = kTau / 2 - heading; }
      if (py > kWalkBound) { py = 2 * kWalkBound - py; heading = -heading; }
      if (py < -kWalkBound) { py = -2 * kWalkBound - py; heading = -heading; }
    }

    // Nodule is fixed in tissue; its frame position follows the probe inversely.
    const double tex_cy = kPad + h / 2.0 + rng.uniform(-22.0, 22.0);
    const double tex_cx = kPad + w / 2.0 + rng.uniform(-22.0, 22.0);

    RngStream noise_rng = rng.fork("sensor");
    RngStream dropout_rng = rng.fork("dropout");
    RngStream feat_rng = rng.fork("features");

    std::vector<double> frame(static_cast<size_t>(h) * w);
    for (int i = 0; i < n; ++i) {
      const double oy = off_y[static_cast<size_t>(i)], ox = off_x[static_cast<size_t>(i)];
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          frame[static_cast<size_t>(y) * w + x] =
              sample_bilinear(texture, kPad + oy + y, kPad + ox + x);
        }
      }

      double di = static_cast<double>(i - k);
      double g_size = std::exp(-di * di / (2.0 * 6.0 * 6.0));
      double g_sharp = std::exp(-di * di / (2.0 * 4.0 * 4.0));
      double scale = 1.0 + 0.30 * g_size;
      double edge = 1.0 + 2.0 * (1.0 - g_sharp);   // soft edge width in pixels
      double contrast = 0.70 + 0.30 * g_sharp;
      double rx = style.rx * scale, ry = style.ry * scale;
      double cy = tex_cy - kPad - oy, cx = tex_cx - kPad - ox;

      double bound_y = ry * (1.0 + style.boundary_amp) + 3.0 * edge + 2.0;
      double bound_x = rx * (1.0 + style.boundary_amp) + 3.0 * edge + 2.0;
      int y_lo = std::max(0, static_cast<int>(cy - bound_y));
      int y_hi = std::min(h - 1, static_cast<int>(cy + bound_y));
      int x_lo = std::max(0, static_cast<int>(cx - bound_x));
      int x_hi = std::min(w - 1, static_cast<int>(cx + bound_x));

      int bb_x1 = w, bb_y1 = h, bb_x2 = -1, bb_y2 = -1;
      const double r_avg = 0.5 * (rx + ry);
      for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
          double ny = (y - cy) / ry, nx = (x - cx) / rx;
          double rho = std::sqrt(nx * nx + ny * ny);
          if (style.boundary_amp > 0.0) {
            double theta = std::atan2(ny, nx);
            double mod = 0.0;
            static constexpr int orders[3] = {3, 5, 7};
            for (int j = 0; j < 3; ++j) {
              mod += style.harmonics[j] * std::sin(orders[j] * theta + style.phases[j]);
            }
            rho /= 1.0 + style.boundary_amp * mod;
          }
          double alpha = smoothstep((1.0 - rho) * r_avg / edge);
          if (alpha <= 0.0) continue;
          double interior;
          if (style.label == 0) {
            interior = 0.15 + 0.10 * (1.0 - rho * rho);  // dark, smooth shading
          } else {
            int iy = static_cast<int>(y - cy) & 63, ix = static_cast<int>(x - cx) & 63;
            interior = 0.38 + 0.26 * style.interior.at(iy, ix);
            for (const auto& [fy, fx] : style.foci) {
              double dyf = (y - cy) - fy * ry, dxf = (x - cx) - fx * rx;
              if (dyf * dyf + dxf * dxf < 2.6) interior = 0.92;
            }
          }
          double& p = frame[static_cast<size_t>(y) * w + x];
          double blend = alpha * contrast;
          p = p * (1.0 - blend) + interior * blend;
          if (alpha >= 0.5) {
            bb_x1 = std::min(bb_x1, x);
            bb_y1 = std::min(bb_y1, y);
            bb_x2 = std::max(bb_x2, x);
            bb_y2 = std::max(bb_y2, y);
          }
        }
      }

      uint8_t* dst = video.pixels.data() + static_cast<size_t>(i) * h * w;
      for (size_t p = 0; p < frame.size(); ++p) {
        double v = frame[p] + noise_rng.uniform(-0.008, 0.008);
        dst[p] = static_cast<uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
      }

      if (bb_x2 < 0) {
        throw std::runtime_error("synthetic generator: nodule left the frame in " + video.id);
      }
      bool keep = (i == k) || !dropout_rng.bernoulli(config.detection_dropout);
      if (keep) {
        video.rois[static_cast<size_t>(i)] = Roi{bb_x1, bb_y1, bb_x2 + 1, bb_y2 + 1};
      }
    }

    // FC7 surrogate: the 16x16 bilinear downsample of the detected patch plus
    // seeded noise, so feature similarity tracks appearance.
    for (int i = 0; i < n; ++i) {
      const auto& roi = video.rois[static_cast<size_t>(i)];
      if (!roi) continue;
      Frame f = video.frame(i);
      Tensor patch({roi->height(), roi->width()});
      for (int y = roi->y1; y < roi->y2; ++y) {
        for (int x = roi->x1; x < roi->x2; ++x) {
          patch[static_cast<int64_t>(y - roi->y1) * roi->width() + (x - roi->x1)] = f.at(y, x);
        }
      }
      Tensor small = resize_bilinear(patch, 16, 16);
      std::vector<float> feat(kFeatureDim);
      for (int j = 0; j < kFeatureDim; ++j) {
        feat[static_cast<size_t>(j)] =
            static_cast<float>(std::clamp(small[j] + 0.01 * feat_rng.normal(), 0.0, 1.0));
      }
      video.features[static_cast<size_t>(i)] = std::move(feat);
    }

    video.validate();
    videos.push_back(std::move(video));
  }
  return videos;
}

void generate_synthetic_to_dir(const SynthConfig& config, uint64_t seed,
                               const std::filesystem::path& dir) {
  write_dataset(dir, generate_synthetic(config, seed));
}

}  // namespace kfg
