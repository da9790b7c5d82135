// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/numerics/tape.hpp"

#include "red/numerics/scalar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace red::num {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::Detach: return "detach";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "multiply";
    case Op::Div: return "divide";
    case Op::MatMul: return "matmul";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Negate: return "negate";
    case Op::Scale: return "scale";
    case Op::Sum: return "sum";
    case Op::SumAll: return "sum_all";
    case Op::Max: return "max";
    case Op::Gather: return "gather";
    case Op::Softmax: return "softmax";
    case Op::LogSoftmax: return "log_softmax";
    case Op::Broadcast: return "broadcast";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Minimum: return "minimum";
    case Op::Clamp: return "clamp";
    case Op::SliceCols: return "slice_cols";
    case Op::SliceRows: return "slice_rows";
    case Op::ConcatRows: return "concat_rows";
    case Op::Reshape: return "reshape";
    case Op::TakeRows: return "take_rows";
  }
  return "unknown";
}

const Array& Var::value() const { return tape->node(id).value; }
const Array& Var::grad() const { return tape->node(id).grad; }

namespace {

[[noreturn]] void shape_fail(Op op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

[[noreturn]] void shape_fail(Op op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op_name(op)) + ": shape " + shape_str(a) + " " + why);
}

// True when b's shape equals the trailing dims of a's shape.
bool trailing_match(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.rbegin(), b.rend(), a.rbegin());
}

Tape& tape_of(Var v) {
  if (v.tape == nullptr) throw ContractError("variable is not attached to a tape");
  return *v.tape;
}

void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ContractError("variables live on different tapes");
}

Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out.push_back(s[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit sp;
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  sp.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

Var binary(Op op, Var a, Var b) {
  check_same_tape(a, b);
  const Array& av = a.value();
  const Array& bv = b.value();
  if (!trailing_match(av.shape, bv.shape)) shape_fail(op, av.shape, bv.shape);
  Node n;
  n.op = op;
  n.inputs = {a.id, b.id};
  std::vector<double> out(av.size());
  const std::size_t bn = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = av[i];
    const double y = bv[bn == 0 ? 0 : i % bn];
    switch (op) {
      case Op::Add: out[i] = x + y; break;
      case Op::Sub: out[i] = x - y; break;
      case Op::Mul: out[i] = x * y; break;
      case Op::Div: out[i] = x / y; break;
      case Op::Minimum: out[i] = y < x ? y : x; break;
      default: break;
    }
  }
  n.value = Array(av.shape, std::move(out));
  return tape_of(a).push(std::move(n));
}

template <class F>
Var unary(Op op, Var a, F f, double lo = 0.0, double hi = 0.0) {
  const Array& av = a.value();
  Node n;
  n.op = op;
  n.inputs = {a.id};
  n.lo = lo;
  n.hi = hi;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
  n.value = Array(av.shape, std::move(out));
  return tape_of(a).push(std::move(n));
}

// Reduces a gradient of shape `big` onto a tensor of `small` trailing shape.
void accumulate_reduced(std::vector<double>& dst, const std::vector<double>& g) {
  const std::size_t bn = dst.size();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i % bn] += g[i];
}

}  // namespace

Var Tape::leaf(Array value) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(Array value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::push(Node node) {
  if (node.op != Op::Leaf && node.op != Op::Constant && !node.value.all_finite()) {
    throw NumericalError(std::string(op_name(node.op)) + ": non-finite output of shape " +
                         shape_str(node.value.shape));
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad = Array::zeros(n.value.shape);
}

void Tape::backward(Var root) {
  if (root.tape != this) throw ContractError("backward: root belongs to another tape");
  if (nodes_[root.id].value.size() != 1) {
    throw ContractError("backward: root must be scalar, got shape " +
                        shape_str(nodes_[root.id].value.shape));
  }
  for (std::size_t i = 0; i <= root.id; ++i) {
    if (nodes_[i].grad.shape != nodes_[i].value.shape) {
      nodes_[i].grad = Array::zeros(nodes_[i].value.shape);
    }
  }
  std::vector<char> reached(root.id + 1, 0);
  reached[root.id] = 1;
  nodes_[root.id].grad.values[0] += 1.0;

  for (std::size_t id = root.id + 1; id-- > 0;) {
    if (!reached[id]) continue;
    Node& n = nodes_[id];
    for (std::size_t in : n.inputs) reached[in] = 1;
    const std::vector<double>& g = n.grad.values;
    const std::vector<double>& y = n.value.values;

    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
      case Op::Detach:
        break;
      case Op::Add:
      case Op::Sub: {
        auto& ga = nodes_[n.inputs[0]].grad.values;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        auto& gb = nodes_[n.inputs[1]].grad.values;
        if (n.op == Op::Add) {
          accumulate_reduced(gb, g);
        } else {
          const std::size_t bn = gb.size();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % bn] -= g[i];
        }
        break;
      }
      case Op::Mul: {
        const auto& av = nodes_[n.inputs[0]].value.values;
        const auto& bv = nodes_[n.inputs[1]].value.values;
        auto& ga = nodes_[n.inputs[0]].grad.values;
        auto& gb = nodes_[n.inputs[1]].grad.values;
        const std::size_t bn = bv.size();
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * bv[i % bn];
          gb[i % bn] += g[i] * av[i];
        }
        break;
      }
      case Op::Div: {
        const auto& av = nodes_[n.inputs[0]].value.values;
        const auto& bv = nodes_[n.inputs[1]].value.values;
        auto& ga = nodes_[n.inputs[0]].grad.values;
        auto& gb = nodes_[n.inputs[1]].grad.values;
        const std::size_t bn = bv.size();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double b = bv[i % bn];
          ga[i] += g[i] / b;
          gb[i % bn] -= g[i] * av[i] / (b * b);
        }
        break;
      }
      case Op::Minimum: {
        const auto& av = nodes_[n.inputs[0]].value.values;
        const auto& bv = nodes_[n.inputs[1]].value.values;
        auto& ga = nodes_[n.inputs[0]].grad.values;
        auto& gb = nodes_[n.inputs[1]].grad.values;
        const std::size_t bn = bv.size();
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (bv[i % bn] < av[i]) {
            gb[i % bn] += g[i];
          } else {
            ga[i] += g[i];
          }
        }
        break;
      }
      case Op::MatMul: {
        const Array& A = nodes_[n.inputs[0]].value;
        const Array& B = nodes_[n.inputs[1]].value;
        auto& ga = nodes_[n.inputs[0]].grad.values;
        auto& gb = nodes_[n.inputs[1]].grad.values;
        const std::size_t m = A.shape[0], k = A.shape[1], cols = B.shape[1];
        // dA = G * B^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < cols; ++j) acc += g[i * cols + j] * B.values[p * cols + j];
            ga[i * k + p] += acc;
          }
        }
        // dB = A^T * G
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double a = A.values[i * k + p];
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) gb[p * cols + j] += a * g[i * cols + j];
          }
        }
        break;
      }
      case Op::Exp: {
        auto& ga = nodes_[n.inputs[0]].grad.values;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        break;
      }
      case Op::Log: {
        const auto& av = nodes_[n.inputs[0]].value.values;
        auto& ga = nodes_[n.inputs[0]].grad.values;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (av[i] > kLogFloor) ga[i] += g[i] / av[i];
        }
        break;
      }
      case Op::Negate: {
        auto& ga = nodes_[n.inputs[0]].grad.values;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
        break;
      }
      case Op::Scale: {
        auto& ga = nodes_[n.inputs[0]].grad.values;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.lo * g[i];
        break;
      }
      case Op::Sum: {
        auto& in = nodes_[n.inputs[0]];
        const AxisSplit sp = split_axis(in.value.shape, n.axis);
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t j = 0; j < sp.n; ++j)
            for (std::size_t i = 0; i < sp.inner; ++i)
              in.grad.values[(o * sp.n + j) * sp.inner + i] += g[o * sp.inner + i];
        break;
      }
      case Op::SumAll: {
        auto& ga = nodes_[n.inputs[0]].grad.values;
        for (double& v : ga) v += g[0];
        break;
      }
      case Op::Max: {
        auto& in = nodes_[n.inputs[0]];
        const AxisSplit sp = split_axis(in.value.shape, n.axis);
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t i = 0; i < sp.inner; ++i) {
            const std::size_t j = n.index[o * sp.inner + i];
            in.grad.values[(o * sp.n + j) * sp.inner + i] += g[o * sp.inner + i];
          }
        break;
      }
      case Op::Gather: {
        auto& in = nodes_[n.inputs[0]];
        const std::size_t c = in.value.last_dim();
        for (std::size_t r = 0; r < n.index.size(); ++r) in.grad.values[r * c + n.index[r]] += g[r];
        break;
      }
      case Op::Softmax: {
        auto& ga = nodes_[n.inputs[0]].grad.values;
        const std::size_t c = n.value.last_dim();
        for (std::size_t r = 0; r < n.value.leading(); ++r) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * y[r * c + j];
          for (std::size_t j = 0; j < c; ++j) ga[r * c + j] += y[r * c + j] * (g[r * c + j] - dot);
        }
        break;
      }
      case Op::LogSoftmax: {
        auto& ga = nodes_[n.inputs[0]].grad.values;
        const std::size_t c = n.value.last_dim();
        for (std::size_t r = 0; r < n.value.leading(); ++r) {
          double gs = 0.0;
          for (std::size_t j = 0; j < c; ++j) gs += g[r * c + j];
          for (std::size_t j = 0; j < c; ++j) ga[r * c + j] += g[r * c + j] - std::exp(y[r * c + j]) * gs;
        }
        break;
      }
      case Op::Broadcast:
        accumulate_reduced(nodes_[n.inputs[0]].grad.values, g);
        break;
      case Op::Sigmoid: {
        auto& ga = nodes_[n.inputs[0]].grad.values;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::Tanh: {
        auto& ga = nodes_[n.inputs[0]].grad.values;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::Clamp: {
        const auto& av = nodes_[n.inputs[0]].value.values;
        auto& ga = nodes_[n.inputs[0]].grad.values;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (av[i] >= n.lo && av[i] <= n.hi) ga[i] += g[i];
        }
        break;
      }
      case Op::SliceCols: {
        auto& in = nodes_[n.inputs[0]];
        const std::size_t c = in.value.last_dim();
        const std::size_t w = n.end - n.begin;
        for (std::size_t r = 0; r < in.value.leading(); ++r)
          for (std::size_t j = 0; j < w; ++j) in.grad.values[r * c + n.begin + j] += g[r * w + j];
        break;
      }
      case Op::SliceRows: {
        auto& in = nodes_[n.inputs[0]];
        const std::size_t offset = n.begin * in.value.last_dim();
        for (std::size_t i = 0; i < g.size(); ++i) in.grad.values[offset + i] += g[i];
        break;
      }
      case Op::ConcatRows: {
        std::size_t offset = 0;
        for (std::size_t in : n.inputs) {
          auto& gi = nodes_[in].grad.values;
          for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[offset + i];
          offset += gi.size();
        }
        break;
      }
      case Op::Reshape: {
        auto& ga = nodes_[n.inputs[0]].grad.values;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::TakeRows: {
        auto& in = nodes_[n.inputs[0]];
        const std::size_t c = in.value.last_dim();
        for (std::size_t r = 0; r < n.index.size(); ++r)
          for (std::size_t j = 0; j < c; ++j) in.grad.values[n.index[r] * c + j] += g[r * c + j];
        break;
      }
    }
  }
}

Var add(Var a, Var b) { return binary(Op::Add, a, b); }
Var sub(Var a, Var b) { return binary(Op::Sub, a, b); }
Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }
Var div(Var a, Var b) { return binary(Op::Div, a, b); }
Var minimum(Var a, Var b) { return binary(Op::Minimum, a, b); }

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  const Array& A = a.value();
  const Array& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[0]) {
    shape_fail(Op::MatMul, A.shape, B.shape);
  }
  const std::size_t m = A.shape[0], k = A.shape[1], cols = B.shape[1];
  std::vector<double> out(m * cols, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A.values[i * k + p];
      for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += av * B.values[p * cols + j];
    }
  }
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a.id, b.id};
  n.value = Array({m, cols}, std::move(out));
  return tape_of(a).push(std::move(n));
}

Var exp(Var a) {
  return unary(Op::Exp, a, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  return unary(Op::Log, a, [](double x) { return std::log(std::max(x, kLogFloor)); });
}

Var negate(Var a) {
  return unary(Op::Negate, a, [](double x) { return -x; });
}

Var scale(Var a, double factor) {
  return unary(Op::Scale, a, [factor](double x) { return factor * x; }, factor);
}

Var sum(Var a, std::size_t axis) {
  const Array& av = a.value();
  if (axis >= av.rank()) shape_fail(Op::Sum, av.shape, "has no axis " + std::to_string(axis));
  const AxisSplit sp = split_axis(av.shape, axis);
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t j = 0; j < sp.n; ++j)
      for (std::size_t i = 0; i < sp.inner; ++i)
        out[o * sp.inner + i] += av.values[(o * sp.n + j) * sp.inner + i];
  Node n;
  n.op = Op::Sum;
  n.inputs = {a.id};
  n.axis = axis;
  n.value = Array(drop_axis(av.shape, axis), std::move(out));
  return tape_of(a).push(std::move(n));
}

Var sum_all(Var a) {
  double s = 0.0;
  for (double v : a.value().values) s += v;
  Node n;
  n.op = Op::SumAll;
  n.inputs = {a.id};
  n.value = Array::scalar(s);
  return tape_of(a).push(std::move(n));
}

Var max(Var a, std::size_t axis) {
  const Array& av = a.value();
  if (axis >= av.rank()) shape_fail(Op::Max, av.shape, "has no axis " + std::to_string(axis));
  const AxisSplit sp = split_axis(av.shape, axis);
  if (sp.n == 0) shape_fail(Op::Max, av.shape, "has empty reduction axis");
  std::vector<double> out(sp.outer * sp.inner);
  std::vector<std::size_t> arg(sp.outer * sp.inner, 0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      double best = av.values[o * sp.n * sp.inner + i];
      std::size_t bj = 0;
      for (std::size_t j = 1; j < sp.n; ++j) {
        const double v = av.values[(o * sp.n + j) * sp.inner + i];
        if (v > best) {
          best = v;
          bj = j;
        }
      }
      out[o * sp.inner + i] = best;
      arg[o * sp.inner + i] = bj;
    }
  Node n;
  n.op = Op::Max;
  n.inputs = {a.id};
  n.axis = axis;
  n.index = std::move(arg);
  n.value = Array(drop_axis(av.shape, axis), std::move(out));
  return tape_of(a).push(std::move(n));
}

Var gather(Var a, std::span<const std::size_t> index) {
  const Array& av = a.value();
  const std::size_t c = av.last_dim();
  if (index.size() != av.leading()) {
    shape_fail(Op::Gather, av.shape, "needs " + std::to_string(av.leading()) + " indices, got " +
                                         std::to_string(index.size()));
  }
  std::vector<double> out(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= c) {
      shape_fail(Op::Gather, av.shape, "index " + std::to_string(index[r]) + " out of range");
    }
    out[r] = av.values[r * c + index[r]];
  }
  Shape s(av.shape.begin(), av.shape.end() - 1);
  if (s.empty()) s.push_back(1);
  Node n;
  n.op = Op::Gather;
  n.inputs = {a.id};
  n.index.assign(index.begin(), index.end());
  n.value = Array(std::move(s), std::move(out));
  return tape_of(a).push(std::move(n));
}

Var softmax(Var a) {
  const Array& av = a.value();
  if (av.last_dim() == 0) shape_fail(Op::Softmax, av.shape, "has empty last axis");
  Array out = Array::zeros(av.shape);
  for (std::size_t r = 0; r < av.leading(); ++r) softmax_row(av.row(r), out.row(r));
  Node n;
  n.op = Op::Softmax;
  n.inputs = {a.id};
  n.value = std::move(out);
  return tape_of(a).push(std::move(n));
}

Var log_softmax(Var a) {
  const Array& av = a.value();
  if (av.last_dim() == 0) shape_fail(Op::LogSoftmax, av.shape, "has empty last axis");
  Array out = Array::zeros(av.shape);
  for (std::size_t r = 0; r < av.leading(); ++r) log_softmax_row(av.row(r), out.row(r));
  Node n;
  n.op = Op::LogSoftmax;
  n.inputs = {a.id};
  n.value = std::move(out);
  return tape_of(a).push(std::move(n));
}

Var broadcast(Var a, std::size_t count) {
  const Array& av = a.value();
  Shape s{count};
  s.insert(s.end(), av.shape.begin(), av.shape.end());
  std::vector<double> out;
  out.reserve(count * av.size());
  for (std::size_t i = 0; i < count; ++i) out.insert(out.end(), av.values.begin(), av.values.end());
  Node n;
  n.op = Op::Broadcast;
  n.inputs = {a.id};
  n.value = Array(std::move(s), std::move(out));
  return tape_of(a).push(std::move(n));
}

Var sigmoid(Var a) {
  return unary(Op::Sigmoid, a, sigmoid_scalar);
}

Var tanh(Var a) {
  return unary(Op::Tanh, a, [](double x) { return std::tanh(x); });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
  return unary(Op::Clamp, a, [lo, hi](double x) { return std::clamp(x, lo, hi); }, lo, hi);
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Array& av = a.value();
  const std::size_t c = av.last_dim();
  if (begin > end || end > c) {
    shape_fail(Op::SliceCols, av.shape,
               "cannot slice columns " + std::to_string(begin) + ".." + std::to_string(end));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(av.leading() * w);
  for (std::size_t r = 0; r < av.leading(); ++r)
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = av.values[r * c + begin + j];
  Shape s = av.shape;
  s.back() = w;
  Node n;
  n.op = Op::SliceCols;
  n.inputs = {a.id};
  n.begin = begin;
  n.end = end;
  n.value = Array(std::move(s), std::move(out));
  return tape_of(a).push(std::move(n));
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Array& av = a.value();
  if (av.rank() != 2 || begin > end || end > av.shape[0]) {
    shape_fail(Op::SliceRows, av.shape,
               "cannot slice rows " + std::to_string(begin) + ".." + std::to_string(end));
  }
  const std::size_t c = av.shape[1];
  std::vector<double> out(av.values.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          av.values.begin() + static_cast<std::ptrdiff_t>(end * c));
  Node n;
  n.op = Op::SliceRows;
  n.inputs = {a.id};
  n.begin = begin;
  n.end = end;
  n.value = Array({end - begin, c}, std::move(out));
  return tape_of(a).push(std::move(n));
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t c = parts[0].value().last_dim();
  std::size_t rows = 0;
  Node n;
  n.op = Op::ConcatRows;
  std::vector<double> out;
  for (const Var& p : parts) {
    check_same_tape(parts[0], p);
    const Array& pv = p.value();
    if (pv.last_dim() != c || pv.rank() > 2) shape_fail(Op::ConcatRows, parts[0].shape(), pv.shape);
    rows += pv.leading();
    out.insert(out.end(), pv.values.begin(), pv.values.end());
    n.inputs.push_back(p.id);
  }
  n.value = Array({rows, c}, std::move(out));
  return tape_of(parts[0]).push(std::move(n));
}

Var reshape(Var a, Shape shape) {
  const Array& av = a.value();
  if (shape_size(shape) != av.size()) shape_fail(Op::Reshape, av.shape, shape);
  Node n;
  n.op = Op::Reshape;
  n.inputs = {a.id};
  n.value = Array(std::move(shape), av.values);
  return tape_of(a).push(std::move(n));
}

Var take_rows(Var a, std::span<const std::size_t> index) {
  const Array& av = a.value();
  if (av.rank() != 2) shape_fail(Op::TakeRows, av.shape, "is not a matrix");
  const std::size_t c = av.shape[1];
  std::vector<double> out;
  out.reserve(index.size() * c);
  for (std::size_t r : index) {
    if (r >= av.shape[0]) shape_fail(Op::TakeRows, av.shape, "has no row " + std::to_string(r));
    out.insert(out.end(), av.values.begin() + static_cast<std::ptrdiff_t>(r * c),
               av.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
  }
  Node n;
  n.op = Op::TakeRows;
  n.inputs = {a.id};
  n.index.assign(index.begin(), index.end());
  n.value = Array({index.size(), c}, std::move(out));
  return tape_of(a).push(std::move(n));
}

Var detach(Var a) {
  Node n;
  n.op = Op::Detach;
  n.value = a.value();
  return tape_of(a).push(std::move(n));
}

}  // namespace red::num
