#include "dpn/tensor.hpp"

#include <cmath>
#include <numeric>

#include "dpn/error.hpp"

namespace dpn::nn {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)), data(product(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != product(shape)) {
    throw Error(ErrorCode::kShapeMismatch, "tensor of shape " + shape_string(shape) + " given " +
                                               std::to_string(data.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (rank() <= 1) return 1;
  return size() / shape.back();
}

std::size_t Tensor::cols() const { return shape.empty() ? 1 : shape.back(); }

double Tensor::item() const {
  if (size() != 1) throw Error(ErrorCode::kShapeMismatch, "item() on tensor " + shape_string(shape));
  return data[0];
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace dpn::nn
