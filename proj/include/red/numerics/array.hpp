// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace red {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace red

namespace red::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles.
struct Array {
  Shape shape;
  std::vector<double> values;

  Array() = default;
  Array(Shape s, std::vector<double> v);

  static Array zeros(Shape s);
  static Array filled(Shape s, double value);
  static Array scalar(double value) { return Array({1}, {value}); }
  static Array vector(std::vector<double> v);
  static Array matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t last_dim() const { return shape.empty() ? 1 : shape.back(); }
  /// Product of all but the last dimension.
  std::size_t leading() const { return last_dim() == 0 ? 0 : size() / last_dim(); }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double& at(std::size_t r, std::size_t c) { return values[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * shape[1] + c]; }

  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * last_dim(), last_dim()};
  }
  std::span<double> row(std::size_t r) { return {values.data() + r * last_dim(), last_dim()}; }

  bool all_finite() const;
  friend bool operator==(const Array&, const Array&) = default;
};

}  // namespace red::num
