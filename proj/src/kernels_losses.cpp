#include <cmath>
#include <stdexcept>

#include "kfg/kernels.hpp"

namespace kfg {

namespace {
constexpr double kBceClamp = 1e-12;
}

double bce_loss(const std::vector<double>& probs, const std::vector<double>& labels) {
  if (probs.empty() || probs.size() != labels.size()) {
    throw std::invalid_argument("bce_loss needs matching non-empty prob/label vectors");
  }
  double total = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    double z = std::min(std::max(probs[i], kBceClamp), 1.0 - kBceClamp);
    double y = labels[i];
    total += -(y * std::log(z) + (1.0 - y) * std::log(1.0 - z));
  }
  return total / static_cast<double>(probs.size());
}

std::vector<double> bce_loss_backward_logits(const std::vector<double>& probs,
                                             const std::vector<double>& labels) {
  if (probs.empty() || probs.size() != labels.size()) {
    throw std::invalid_argument("bce_loss_backward_logits size mismatch");
  }
  std::vector<double> d(probs.size());
  const double inv_n = 1.0 / static_cast<double>(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) d[i] = (probs[i] - labels[i]) * inv_n;
  return d;
}

double mse_loss(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.empty() || pred.size() != target.size()) {
    throw std::invalid_argument("mse_loss needs matching non-empty sequences");
  }
  double total = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - target[i];
    total += d * d;
  }
  return total / static_cast<double>(pred.size());
}

std::vector<double> mse_loss_backward(const std::vector<double>& pred,
                                      const std::vector<double>& target) {
  if (pred.empty() || pred.size() != target.size()) {
    throw std::invalid_argument("mse_loss_backward size mismatch");
  }
  std::vector<double> d(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) d[i] = scale * (pred[i] - target[i]);
  return d;
}

namespace {
constexpr double kNormFloor = 1e-12;
}

double cosine_consistency_loss(const Tensor& v_temp, const Tensor& v_motion) {
  if (v_temp.size() != v_motion.size() || v_temp.size() == 0) {
    throw std::invalid_argument("cosine_consistency_loss vector length mismatch");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (int64_t i = 0; i < v_temp.size(); ++i) {
    dot += v_temp[i] * v_motion[i];
    nu += v_temp[i] * v_temp[i];
    nv += v_motion[i] * v_motion[i];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  double cosine = (nu < kNormFloor || nv < kNormFloor) ? 0.0 : dot / (nu * nv);
  return 1.0 - cosine;
}

Tensor cosine_consistency_loss_backward(const Tensor& v_temp, const Tensor& v_motion) {
  if (v_temp.size() != v_motion.size() || v_temp.size() == 0) {
    throw std::invalid_argument("cosine_consistency_loss vector length mismatch");
  }
  Tensor d(v_temp.shape());
  double dot = 0.0, nu2 = 0.0, nv2 = 0.0;
  for (int64_t i = 0; i < v_temp.size(); ++i) {
    dot += v_temp[i] * v_motion[i];
    nu2 += v_temp[i] * v_temp[i];
    nv2 += v_motion[i] * v_motion[i];
  }
  double nu = std::sqrt(nu2), nv = std::sqrt(nv2);
  if (nu < kNormFloor || nv < kNormFloor) return d;  // cosine pinned to 0, no gradient
  // d(1 - u.v/(|u||v|))/du = -(v/(|u||v|) - (u.v) u/(|u|^3 |v|))
  const double inv = 1.0 / (nu * nv);
  const double proj = dot / (nu2 * nu * nv);
  for (int64_t i = 0; i < v_temp.size(); ++i) {
    d[i] = -(v_motion[i] * inv - v_temp[i] * proj);
  }
  return d;
}

void AdamState::step(const std::map<std::string, Tensor*>& params,
                     const std::map<std::string, Tensor>& grads) {
  ++step_count;
  const double t = static_cast<double>(step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [name, param] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;  // parameters without gradient this step stay put
    const Tensor& grad = git->second;
    if (!grad.same_shape(*param)) {
      throw std::invalid_argument("adam gradient shape mismatch for " + name);
    }
    Tensor& m = first_moment.try_emplace(name, Tensor(param->shape())).first->second;
    Tensor& v = second_moment.try_emplace(name, Tensor(param->shape())).first->second;
    for (int64_t i = 0; i < param->size(); ++i) {
      double g = grad[i] + cfg.weight_decay * (*param)[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      (*param)[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
    param->ensure_finite("adam_step");
  }
}

}  // namespace kfg
