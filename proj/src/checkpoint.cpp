#include "kfg/checkpoint.hpp"

#include <fstream>

#include "kfg/binary_io.hpp"

namespace kfg {

namespace {

void put_str16(std::ostream& os, const std::string& s) {
  put_u16(os, static_cast<uint16_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  put_str16(os, name);
  os.put(static_cast<char>(t.rank()));
  for (int64_t e : t.shape()) put_u32(os, static_cast<uint32_t>(e));
  for (int64_t i = 0; i < t.size(); ++i) put_f64(os, t[i]);
}

std::pair<std::string, Tensor> read_tensor(BinaryReader& r) {
  std::string name = r.str16();
  unsigned char rank;
  r.read(&rank, 1);
  std::vector<int64_t> shape(rank);
  for (auto& e : shape) e = r.u32();
  Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = r.f64();
  return {std::move(name), std::move(t)};
}

}  // namespace

Checkpoint make_checkpoint(const std::string& kind, const std::map<std::string, Tensor*>& params,
                           const std::map<std::string, Tensor*>& buffers, const AdamState* opt,
                           uint64_t config_digest) {
  Checkpoint c;
  c.kind = kind;
  c.config_digest = config_digest;
  for (const auto& [name, t] : params) c.tensors.emplace_back(name, *t);
  for (const auto& [name, t] : buffers) c.tensors.emplace_back(name, *t);
  if (opt) {
    AdamSnapshot snap;
    snap.cfg = opt->cfg;
    snap.step_count = opt->step_count;
    for (const auto& [name, t] : opt->first_moment) snap.moments.emplace_back("m/" + name, t);
    for (const auto& [name, t] : opt->second_moment) snap.moments.emplace_back("v/" + name, t);
    c.optimizer = std::move(snap);
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write("KFGM", 4);
  put_u16(os, kCheckpointVersion);
  put_str16(os, ckpt.kind);
  put_u64(os, ckpt.config_digest);
  os.put(ckpt.optimizer ? 1 : 0);
  put_u32(os, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) put_tensor(os, name, t);
  if (ckpt.optimizer) {
    const AdamSnapshot& s = *ckpt.optimizer;
    put_u64(os, static_cast<uint64_t>(s.step_count));
    put_f64(os, s.cfg.lr);
    put_f64(os, s.cfg.beta1);
    put_f64(os, s.cfg.beta2);
    put_f64(os, s.cfg.eps);
    put_f64(os, s.cfg.weight_decay);
    put_u32(os, static_cast<uint32_t>(s.moments.size()));
    for (const auto& [name, t] : s.moments) put_tensor(os, name, t);
  }
  if (!os) throw std::runtime_error("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("KFGM");
  uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": checkpoint version " + std::to_string(version) +
                             ", expected " + std::to_string(kCheckpointVersion));
  }
  Checkpoint c;
  c.kind = r.str16();
  c.config_digest = r.u64();
  unsigned char flags;
  r.read(&flags, 1);
  uint32_t count = r.u32();
  c.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) c.tensors.push_back(read_tensor(r));
  if (flags & 1) {
    AdamSnapshot s;
    s.step_count = static_cast<int64_t>(r.u64());
    s.cfg.lr = r.f64();
    s.cfg.beta1 = r.f64();
    s.cfg.beta2 = r.f64();
    s.cfg.eps = r.f64();
    s.cfg.weight_decay = r.f64();
    uint32_t mcount = r.u32();
    s.moments.reserve(mcount);
    for (uint32_t i = 0; i < mcount; ++i) s.moments.push_back(read_tensor(r));
    c.optimizer = std::move(s);
  }
  return c;
}

void restore_from_checkpoint(const Checkpoint& ckpt, const std::string& expected_kind,
                             const std::map<std::string, Tensor*>& params,
                             const std::map<std::string, Tensor*>& buffers, AdamState* opt) {
  if (ckpt.kind != expected_kind) {
    throw std::runtime_error("checkpoint kind '" + ckpt.kind + "', expected '" + expected_kind +
                             "'");
  }
  auto restore = [](const std::map<std::string, Tensor*>& dst,
                    const std::pair<std::string, Tensor>& rec) {
    auto it = dst.find(rec.first);
    if (it == dst.end()) return false;
    if (!it->second->same_shape(rec.second)) {
      throw std::runtime_error("checkpoint tensor '" + rec.first + "' has shape " +
                               rec.second.shape_str() + ", model expects " +
                               it->second->shape_str());
    }
    *it->second = rec.second;
    return true;
  };
  size_t matched = 0;
  for (const auto& rec : ckpt.tensors) {
    if (restore(params, rec) || restore(buffers, rec)) ++matched;
    else throw std::runtime_error("checkpoint tensor '" + rec.first + "' unknown to this model");
  }
  if (matched != params.size() + buffers.size()) {
    throw std::runtime_error("checkpoint is missing tensors for this model kind");
  }
  if (opt && ckpt.optimizer) {
    opt->cfg = ckpt.optimizer->cfg;
    opt->step_count = ckpt.optimizer->step_count;
    opt->first_moment.clear();
    opt->second_moment.clear();
    for (const auto& [name, t] : ckpt.optimizer->moments) {
      if (name.rfind("m/", 0) == 0) opt->first_moment.emplace(name.substr(2), t);
      else if (name.rfind("v/", 0) == 0) opt->second_moment.emplace(name.substr(2), t);
      else throw std::runtime_error("checkpoint moment '" + name + "' has no m/ or v/ prefix");
    }
  }
  return;
}

}  // namespace kfg
