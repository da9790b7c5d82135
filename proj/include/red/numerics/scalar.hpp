// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar and row kernels shared by the tape and the tape-free inference path.
// Both paths must use these so their values agree bit-for-bit.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>

namespace red::num {

inline double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline void softmax_row(std::span<const double> x, std::span<double> y) {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  double z = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    y[j] = std::exp(x[j] - m);
    z += y[j];
  }
  for (double& v : y) v /= z;
}

inline void log_softmax_row(std::span<const double> x, std::span<double> y) {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  double z = 0.0;
  for (double v : x) z += std::exp(v - m);
  const double lz = m + std::log(z);
  for (std::size_t j = 0; j < x.size(); ++j) y[j] = x[j] - lz;
}

}  // namespace red::num
