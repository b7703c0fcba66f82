#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kfg {

/// One finite-difference check: a kernel or a full model under one seed.
struct GradSuiteLine {
  std::string name;
  double max_rel_err = 0.0;
  int64_t coords = 0;
};

struct GradSuiteResult {
  std::vector<GradSuiteLine> lines;
  double tolerance = 1e-4;
  bool all_pass() const;
  double worst() const;
};

/// Central finite differences (h = 1e-5) against every kernel's analytic
/// backward pass and both full models (a reduced-geometry classifier and a
/// 4-frame localizer), across `seeds` random seeds. Inputs are sampled away
/// from ReLU and max-pool tie points.
GradSuiteResult run_gradient_suite(std::ostream* log, int seeds = 5);

}  // namespace kfg
