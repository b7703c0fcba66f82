#include "kfg/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "kfg/binary_io.hpp"

namespace kfg {

namespace fs = std::filesystem;
using nlohmann::json;

Frame VideoSample::frame(int i) const {
  if (i < 0 || i >= n_frames) {
    throw std::out_of_range("frame index " + std::to_string(i) + " out of range for " + id);
  }
  Frame f;
  f.height = height;
  f.width = width;
  f.px.resize(static_cast<size_t>(height) * width);
  const uint8_t* src = frame_bytes(i);
  for (size_t p = 0; p < f.px.size(); ++p) f.px[p] = src[p] / 255.0;
  return f;
}

std::vector<int> VideoSample::detected_frames() const {
  std::vector<int> out;
  for (int i = 0; i < n_frames; ++i) {
    if (rois[static_cast<size_t>(i)].has_value()) out.push_back(i);
  }
  return out;
}

void VideoSample::validate() const {
  auto fail = [this](const std::string& what) {
    throw std::runtime_error("video '" + id + "': " + what);
  };
  if (width <= 0 || height <= 0 || n_frames <= 0) fail("degenerate geometry");
  if (pixels.size() != static_cast<size_t>(n_frames) * height * width) fail("pixel buffer size mismatch");
  if (rois.size() != static_cast<size_t>(n_frames)) fail("roi track length mismatch");
  if (features.size() != static_cast<size_t>(n_frames)) fail("feature track length mismatch");
  if (key_frame_index < 0 || key_frame_index >= n_frames) {
    fail("key_frame_index " + std::to_string(key_frame_index) + " outside [0," +
         std::to_string(n_frames) + ")");
  }
  if (label != 0 && label != 1) fail("label must be 0 or 1");
  if (!rois[static_cast<size_t>(key_frame_index)].has_value()) {
    fail("key-frame " + std::to_string(key_frame_index) + " has no ROI");
  }
  for (int i = 0; i < n_frames; ++i) {
    const auto& roi = rois[static_cast<size_t>(i)];
    const auto& feat = features[static_cast<size_t>(i)];
    if (roi.has_value() != feat.has_value()) {
      fail("frame " + std::to_string(i) + ": roi/feature presence flags disagree");
    }
    if (roi && !roi->valid_for(width, height)) fail("frame " + std::to_string(i) + ": ROI out of bounds");
    if (feat && feat->size() != kFeatureDim) fail("frame " + std::to_string(i) + ": feature length");
  }
}

using Reader = BinaryReader;

void write_frames_file(const fs::path& path, const VideoSample& video) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("KFGV", 4);
  put_u16(os, kContainerVersion);
  put_u16(os, static_cast<uint16_t>(video.width));
  put_u16(os, static_cast<uint16_t>(video.height));
  put_u32(os, static_cast<uint32_t>(video.n_frames));
  os.write(reinterpret_cast<const char*>(video.pixels.data()),
           static_cast<std::streamsize>(video.pixels.size()));
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

void read_frames_file(const fs::path& path, VideoSample& into) {
  Reader r(path);
  r.expect_magic("KFGV");
  uint16_t version = r.u16();
  if (version != kContainerVersion) {
    throw std::runtime_error(path.string() + ": frame container version " +
                             std::to_string(version) + ", expected " +
                             std::to_string(kContainerVersion));
  }
  into.width = r.u16();
  into.height = r.u16();
  into.n_frames = static_cast<int>(r.u32());
  size_t total = static_cast<size_t>(into.width) * into.height * into.n_frames;
  into.pixels.resize(total);
  r.read(into.pixels.data(), total);
}

std::vector<uint8_t> read_frames_range(const fs::path& path, int begin, int end, int expected_w,
                                       int expected_h) {
  Reader r(path);
  r.expect_magic("KFGV");
  uint16_t version = r.u16();
  if (version != kContainerVersion) {
    throw std::runtime_error(path.string() + ": unsupported frame container version");
  }
  int w = r.u16(), h = r.u16();
  int n = static_cast<int>(r.u32());
  if (w != expected_w || h != expected_h) {
    throw std::runtime_error(path.string() + ": header geometry disagrees with manifest");
  }
  if (begin < 0 || end > n || begin >= end) {
    throw std::out_of_range(path.string() + ": frame range [" + std::to_string(begin) + "," +
                            std::to_string(end) + ") outside [0," + std::to_string(n) + ")");
  }
  size_t frame_sz = static_cast<size_t>(w) * h;
  r.seek(12 + frame_sz * static_cast<size_t>(begin));
  std::vector<uint8_t> out(frame_sz * static_cast<size_t>(end - begin));
  r.read(out.data(), out.size());
  return out;
}

void write_features_file(const fs::path& path, const VideoSample& video) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write("KFGF", 4);
  put_u16(os, kContainerVersion);
  uint32_t n = 0;
  for (const auto& f : video.features) n += f.has_value() ? 1 : 0;
  put_u32(os, n);
  for (int i = 0; i < video.n_frames; ++i) {
    const auto& f = video.features[static_cast<size_t>(i)];
    if (!f) continue;
    put_u32(os, static_cast<uint32_t>(i));
    for (float v : *f) put_f32(os, v);
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

void read_features_file(const fs::path& path, VideoSample& into) {
  Reader r(path);
  r.expect_magic("KFGF");
  uint16_t version = r.u16();
  if (version != kContainerVersion) {
    throw std::runtime_error(path.string() + ": feature container version " +
                             std::to_string(version) + ", expected " +
                             std::to_string(kContainerVersion));
  }
  uint32_t n = r.u32();
  for (uint32_t e = 0; e < n; ++e) {
    uint32_t frame = r.u32();
    if (frame >= static_cast<uint32_t>(into.n_frames)) {
      throw std::runtime_error(path.string() + ": feature entry for frame " +
                               std::to_string(frame) + " beyond video length");
    }
    std::vector<float> vec(kFeatureDim);
    for (auto& v : vec) v = r.f32();
    into.features[frame] = std::move(vec);
  }
}

// ---- manifest ------------------------------------------------------------------

void write_dataset(const fs::path& dir, const std::vector<VideoSample>& videos) {
  fs::create_directories(dir);
  json manifest = json::array();
  for (const auto& v : videos) {
    v.validate();
    std::string frames_name = v.id + ".kfgv";
    std::string features_name = v.id + ".kfgf";
    write_frames_file(dir / frames_name, v);
    bool any_features = std::any_of(v.features.begin(), v.features.end(),
                                    [](const auto& f) { return f.has_value(); });
    json rois = json::array();
    for (int i = 0; i < v.n_frames; ++i) {
      const auto& r = v.rois[static_cast<size_t>(i)];
      if (r) rois.push_back({i, r->x1, r->y1, r->x2, r->y2});
    }
    json entry = {
        {"id", v.id},
        {"frames_file", frames_name},
        {"width", v.width},
        {"height", v.height},
        {"n_frames", v.n_frames},
        {"key_frame_index", v.key_frame_index},
        {"label", v.label},
        {"rois", rois},
    };
    if (any_features) {
      write_features_file(dir / features_name, v);
      entry["features_file"] = features_name;
    }
    manifest.push_back(entry);
  }
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
}

std::vector<ManifestEntry> load_manifest(const fs::path& manifest_path) {
  fs::path path = manifest_path;
  if (fs::is_directory(path)) path /= "manifest.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw std::runtime_error("manifest must be a JSON array");

  fs::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  for (const auto& item : doc) {
    ManifestEntry e;
    e.id = item.at("id").get<std::string>();
    e.frames_file = base / item.at("frames_file").get<std::string>();
    if (item.contains("features_file")) {
      e.features_file = base / item.at("features_file").get<std::string>();
    }
    e.width = item.at("width").get<int>();
    e.height = item.at("height").get<int>();
    e.n_frames = item.at("n_frames").get<int>();
    e.key_frame_index = item.at("key_frame_index").get<int>();
    e.label = item.at("label").get<int>();
    e.rois.assign(static_cast<size_t>(e.n_frames), std::nullopt);
    for (const auto& row : item.at("rois")) {
      if (!row.is_array() || row.size() != 5) {
        throw std::runtime_error("video '" + e.id + "': roi rows must be [frame,x1,y1,x2,y2]");
      }
      int f = row[0].get<int>();
      if (f < 0 || f >= e.n_frames) {
        throw std::runtime_error("video '" + e.id + "': roi frame " + std::to_string(f) +
                                 " outside [0," + std::to_string(e.n_frames) + ")");
      }
      e.rois[static_cast<size_t>(f)] =
          Roi{row[1].get<int>(), row[2].get<int>(), row[3].get<int>(), row[4].get<int>()};
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

VideoSample load_video(const ManifestEntry& entry) {
  VideoSample v;
  v.id = entry.id;
  v.key_frame_index = entry.key_frame_index;
  v.label = entry.label;
  read_frames_file(entry.frames_file, v);
  if (v.width != entry.width || v.height != entry.height || v.n_frames != entry.n_frames) {
    throw std::runtime_error("video '" + entry.id + "': container header disagrees with manifest");
  }
  v.rois = entry.rois;
  v.features.assign(static_cast<size_t>(v.n_frames), std::nullopt);
  if (entry.features_file) read_features_file(*entry.features_file, v);
  v.validate();
  return v;
}

VideoSample load_video_metadata(const ManifestEntry& entry) {
  VideoSample v;
  v.id = entry.id;
  v.width = entry.width;
  v.height = entry.height;
  v.n_frames = entry.n_frames;
  v.key_frame_index = entry.key_frame_index;
  v.label = entry.label;
  v.rois = entry.rois;
  v.features.assign(static_cast<size_t>(v.n_frames), std::nullopt);
  if (entry.features_file) read_features_file(*entry.features_file, v);
  for (int i = 0; i < v.n_frames; ++i) {
    const auto& roi = v.rois[static_cast<size_t>(i)];
    const auto& feat = v.features[static_cast<size_t>(i)];
    if (roi.has_value() != feat.has_value()) {
      throw std::runtime_error("video '" + v.id + "': frame " + std::to_string(i) +
                               ": roi/feature presence flags disagree");
    }
  }
  return v;
}

std::vector<VideoSample> load_dataset(const fs::path& manifest_path) {
  std::vector<VideoSample> out;
  for (const auto& entry : load_manifest(manifest_path)) {
    out.push_back(load_video(entry));
  }
  return out;
}

}  // namespace kfg
