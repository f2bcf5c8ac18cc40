#include "prefrl/tensor.hpp"

#include <cmath>

namespace prefrl {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  require(!shape.empty(), "tensor: shape must have at least one extent");
  std::size_t n = 1;
  for (std::size_t e : shape) {
    require(e > 0, "tensor: extents must be positive");
    n *= e;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  require(shape_product(shape) == data.size(),
          "tensor: shape " + shape_str() + " does not match " + std::to_string(data.size()) +
              " values");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

double Tensor::value() const {
  require(is_scalar(), "tensor: value() on non-scalar " + shape_str());
  return data[0];
}

std::size_t Tensor::rows() const { return rank() == 1 ? 1 : shape[0]; }

std::size_t Tensor::cols() const { return rank() == 1 ? shape[0] : shape[1]; }

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace prefrl
