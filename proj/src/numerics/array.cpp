// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/numerics/array.hpp"

#include <cmath>
#include <numeric>

namespace red::num {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Array::Array(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("array: shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
}

Array Array::zeros(Shape s) { return filled(std::move(s), 0.0); }

Array Array::filled(Shape s, double value) {
  const std::size_t n = shape_size(s);
  return Array(std::move(s), std::vector<double>(n, value));
}

Array Array::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Array({n}, std::move(v));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Array({rows, cols}, std::move(v));
}

bool Array::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace red::num
