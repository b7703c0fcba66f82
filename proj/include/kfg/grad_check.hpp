#pragma once

#include <functional>
#include <map>
#include <string>

#include "kfg/rng.hpp"
#include "kfg/tensor.hpp"

namespace kfg {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // "name[flat_index]" of the worst coordinate
  int64_t coords_checked = 0;
  bool pass(double tolerance) const { return max_rel_err < tolerance; }
};

/// Central finite differences (f(x+h) - f(x-h)) / 2h per coordinate against
/// the analytic gradient. Relative error uses max(|analytic|, |numeric|, 1e-8)
/// as denominator. When `max_coords_per_tensor` is positive, large tensors are
/// checked on a deterministic random coordinate subset drawn from `rng`.
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::map<std::string, Tensor*>& params,
                           const std::map<std::string, Tensor>& analytic, double h,
                           int64_t max_coords_per_tensor = -1, RngStream* rng = nullptr);

}  // namespace kfg
