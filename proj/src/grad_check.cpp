#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kfg/grad_check.hpp"

namespace kfg {

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::map<std::string, Tensor*>& params,
                           const std::map<std::string, Tensor>& analytic, double h,
                           int64_t max_coords_per_tensor, RngStream* rng) {
  if (h <= 0.0) throw std::invalid_argument("grad_check needs h > 0");
  GradCheckReport report;
  for (const auto& [name, tensor] : params) {
    auto it = analytic.find(name);
    if (it == analytic.end()) {
      throw std::invalid_argument("grad_check: no analytic gradient for " + name);
    }
    const Tensor& grad = it->second;
    if (!grad.same_shape(*tensor)) {
      throw std::invalid_argument("grad_check: gradient shape mismatch for " + name);
    }

    std::vector<int64_t> coords(static_cast<size_t>(tensor->size()));
    std::iota(coords.begin(), coords.end(), int64_t{0});
    if (max_coords_per_tensor > 0 && tensor->size() > max_coords_per_tensor) {
      if (!rng) throw std::invalid_argument("grad_check: coordinate subsetting needs an rng");
      // Partial Fisher-Yates: the first max_coords entries become the sample.
      for (int64_t i = 0; i < max_coords_per_tensor; ++i) {
        int64_t j = i + rng->uniform_int(tensor->size() - i);
        std::swap(coords[static_cast<size_t>(i)], coords[static_cast<size_t>(j)]);
      }
      coords.resize(static_cast<size_t>(max_coords_per_tensor));
    }

    for (int64_t idx : coords) {
      double saved = (*tensor)[idx];
      (*tensor)[idx] = saved + h;
      double f_plus = loss();
      (*tensor)[idx] = saved - h;
      double f_minus = loss();
      (*tensor)[idx] = saved;
      double numeric = (f_plus - f_minus) / (2.0 * h);
      double a = grad[idx];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      double rel = std::fabs(a - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = name + "[" + std::to_string(idx) + "]";
      }
      ++report.coords_checked;
    }
  }
  return report;
}

}  // namespace kfg
