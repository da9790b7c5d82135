// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "red/numerics/array.hpp"

namespace red::num {

/// Probabilities are clamped to this floor before any log.
inline constexpr double kLogFloor = 1e-12;

enum class Op : std::uint8_t {
  Leaf,
  Constant,
  Detach,
  Add,
  Sub,
  Mul,
  Div,
  MatMul,
  Exp,
  Log,
  Negate,
  Scale,
  Sum,
  SumAll,
  Max,
  Gather,
  Softmax,
  LogSoftmax,
  Broadcast,
  Sigmoid,
  Tanh,
  Minimum,
  Clamp,
  SliceCols,
  SliceRows,
  ConcatRows,
  Reshape,
  TakeRows,
};

std::string_view op_name(Op op);

struct Node {
  Op op = Op::Leaf;
  std::vector<std::size_t> inputs;
  Array value;
  Array grad;
  // Op attributes. Meaning depends on op (axis, slice bounds, clamp range, scale factor).
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> index;
};

class Tape;

/// Lightweight handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Array& value() const;
  const Array& grad() const;
  const Shape& shape() const { return value().shape; }
};

/// Append-only sequence of nodes in topological order. Not thread-safe; use
/// one tape per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Differentiable input (parameter or data with gradient).
  Var leaf(Array value);
  /// Input that never receives a gradient.
  Var constant(Array value);

  /// Populates gradients of every ancestor of `root`. Root must be scalar.
  /// Gradients accumulate additively; call zero_grad() between passes.
  void backward(Var root);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_[id]; }

  /// Appends a node computed by the forward rule of `op`.
  Var push(Node node);

 private:
  std::vector<Node> nodes_;
};

// Forward ops. Each appends one node to the tape of its first argument.
// Binary elementwise ops accept equal shapes, or a right operand whose shape
// equals the trailing dims of the left one (leading-axis expansion).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var matmul(Var a, Var b);
Var exp(Var a);
Var log(Var a);
Var negate(Var a);
Var scale(Var a, double factor);
Var sum(Var a, std::size_t axis);
Var sum_all(Var a);
Var max(Var a, std::size_t axis);
/// Picks a[r, index[r]] from each row of the last axis. Result has shape leading().
Var gather(Var a, std::span<const std::size_t> index);
Var softmax(Var a);
Var log_softmax(Var a);
/// Expands shape s to [n, s...].
Var broadcast(Var a, std::size_t n);
Var sigmoid(Var a);
Var tanh(Var a);
Var minimum(Var a, Var b);
Var clamp(Var a, double lo, double hi);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var reshape(Var a, Shape shape);
/// Rows of a 2-D array selected by index (embedding lookup). Result [index.size(), cols].
Var take_rows(Var a, std::span<const std::size_t> index);
/// Same value, no gradient flow to ancestors.
Var detach(Var a);

}  // namespace red::num
