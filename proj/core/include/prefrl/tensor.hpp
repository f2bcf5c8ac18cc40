#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "prefrl/error.hpp"

namespace prefrl {

// Dense row-major tensor of 64-bit floats. Rank 1 or 2 covers everything in
// this project; scalars are shape {1}. Values are immutable once handed to a
// Tape, so tensors are safe to share read-only across threads.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return numel() == 1; }

  // scalar extraction
  double value() const;

  // rank-2 accessors (rank-1 tensors count as a single row)
  std::size_t rows() const;
  std::size_t cols() const;
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

}  // namespace prefrl
