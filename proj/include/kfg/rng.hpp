#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kfg {

/// Deterministic xoshiro256** stream. Every source of randomness in the
/// project derives from one experiment seed plus a purpose name ("data",
/// "init", "dropout", "folds", ...), so toggling one feature never shifts
/// another feature's draws.
class RngStream {
 public:
  RngStream(uint64_t seed, std::string_view name);

  uint64_t next_u64();
  /// Uniform double in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (implementation-defined distributions
  /// from <random> are avoided so frozen test values stay portable).
  double normal();
  /// Uniform integer in [0, n).
  int64_t uniform_int(int64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  /// Child stream addressed by `name` under this stream's path. Independent
  /// of how many values the parent has drawn.
  RngStream fork(std::string_view name) const;

  const std::string& path() const { return path_; }

 private:
  RngStream() = default;
  uint64_t state_[4] = {0, 0, 0, 0};
  uint64_t root_seed_ = 0;
  std::string path_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

uint64_t fnv1a64(std::string_view text);

}  // namespace kfg
