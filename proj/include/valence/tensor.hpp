#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace valence::ad {

/// Dense row-major array of 64-bit floats. Rank 1 and 2 cover everything the
/// sequence models need; scalars are represented as shape {1}.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_in, std::vector<double> values_in);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> v);

  std::size_t numel() const;
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return numel() == 1; }
  bool empty() const { return values.empty(); }

  /// Row/column counts, treating a rank-1 tensor as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return values[r * cols() + c];
  }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;
  bool operator==(const Tensor&) const = default;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

}  // namespace valence::ad
