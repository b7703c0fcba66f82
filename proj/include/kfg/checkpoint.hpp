#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kfg/kernels.hpp"
#include "kfg/tensor.hpp"

namespace kfg {

// Checkpoint container (.kfgm): magic "KFGM", version u16, kind string
// (u16 len + bytes), config digest u64, flags u8 (bit 0: optimizer state),
// tensor count u32, then per tensor (name u16+bytes, rank u8, extents u32 each,
// values f64 LE). With optimizer state: step u64, the five Adam scalars as
// f64, moment tensor count u32 and moment records in the same layout. All
// integers and floats little-endian; round-trips are bitwise.

constexpr uint16_t kCheckpointVersion = 1;

struct AdamSnapshot {
  AdamConfig cfg;
  int64_t step_count = 0;
  std::vector<std::pair<std::string, Tensor>> moments;  // "m/<name>" then "v/<name>"
};

struct Checkpoint {
  std::string kind;
  uint64_t config_digest = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::optional<AdamSnapshot> optimizer;
};

/// Snapshot of a model's parameters and persistent buffers (plus optimizer
/// state when given). Ordering is the sorted parameter name order, so equal
/// states produce identical bytes.
Checkpoint make_checkpoint(const std::string& kind, const std::map<std::string, Tensor*>& params,
                           const std::map<std::string, Tensor*>& buffers, const AdamState* opt,
                           uint64_t config_digest);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes the checkpoint's tensors back into a model; shapes and names must
/// match exactly. Restores Adam state when `opt` is non-null and the
/// checkpoint carries one.
void restore_from_checkpoint(const Checkpoint& ckpt, const std::string& expected_kind,
                             const std::map<std::string, Tensor*>& params,
                             const std::map<std::string, Tensor*>& buffers, AdamState* opt);

}  // namespace kfg
