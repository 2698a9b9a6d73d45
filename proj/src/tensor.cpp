#include "valence/tensor.hpp"

#include <cmath>
#include <sstream>

#include "valence/errors.hpp"

namespace valence::ad {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<std::size_t> shape_in, std::vector<double> values_in)
    : shape(std::move(shape_in)), values(std::move(values_in)) {
  if (shape.empty()) throw ShapeError("tensor: empty shape");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor: zero dimension in " + shape_str());
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str() + " does not match " +
                     std::to_string(values.size()) + " values");
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

std::size_t Tensor::numel() const { return values.size(); }

std::size_t Tensor::rows() const { return rank() == 1 ? 1 : shape[0]; }

std::size_t Tensor::cols() const { return shape.back(); }

bool Tensor::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace valence::ad
