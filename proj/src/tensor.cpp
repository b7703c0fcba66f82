#include "kfg/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kfg {

int64_t numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t e : shape) {
    if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got " + std::to_string(e));
    n *= e;
  }
  return n;
}

std::string shape_to_string(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data) : shape_(std::move(shape)) {
  if (numel(shape_) != static_cast<int64_t>(data.size())) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_to_string(shape_));
  }
  data_ = std::move(data);
}

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

void Tensor::ensure_finite(const char* context) const {
  for (size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw std::runtime_error(std::string(context) + ": non-finite value at flat index " +
                               std::to_string(i));
    }
  }
}

void Tensor::round_to_f32() {
  for (double& v : data_) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace kfg
