// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/policy/model.hpp"

#include <cmath>

#include "red/numerics/scalar.hpp"

namespace red::policy {

using num::Array;
using num::Var;

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> out;
  out.reserve(count());
  for (const auto& t : tensors) out.insert(out.end(), t.values.begin(), t.values.end());
  return out;
}

void ParamSet::assign(std::span<const double> flat) {
  if (flat.size() != count()) {
    throw ShapeError("param set: expected " + std::to_string(count()) + " values, got " +
                     std::to_string(flat.size()));
  }
  std::size_t o = 0;
  for (auto& t : tensors) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(o),
              flat.begin() + static_cast<std::ptrdiff_t>(o + t.size()), t.values.begin());
    o += t.size();
  }
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  z.names = names;
  for (const auto& t : tensors) z.tensors.push_back(Array::zeros(t.shape));
  return z;
}

void ParamSet::add_scaled(const ParamSet& other, double factor) {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& dst = tensors[i].values;
    const auto& src = other.tensors[i].values;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += factor * src[j];
  }
}

void ParamSet::scale(double factor) {
  for (auto& t : tensors)
    for (double& v : t.values) v *= factor;
}

double ParamSet::norm() const {
  double s = 0.0;
  for (const auto& t : tensors)
    for (double v : t.values) s += v * v;
  return std::sqrt(s);
}

bool ParamSet::all_finite() const {
  for (const auto& t : tensors)
    if (!t.all_finite()) return false;
  return true;
}

PolicyParams PolicyParams::init(const ModelConfig& config, std::uint64_t seed) {
  if (config.vocab_size == 0 || config.hidden == 0 || config.layers == 0) {
    throw ContractError("model config: vocab_size, hidden and layers must be positive");
  }
  PolicyParams p;
  p.config = config;
  Rng rng(derive_seed(seed, {0x1417}));
  const double s = config.init_scale;
  auto uniform = [&](num::Shape shape) {
    Array a = Array::zeros(std::move(shape));
    for (double& v : a.values) v = (2.0 * rng.uniform() - 1.0) * s;
    return a;
  };
  const std::size_t d = config.hidden, v = config.vocab_size;
  p.weights.names.push_back("embed");
  p.weights.tensors.push_back(uniform({v, d}));
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string pre = "gru" + std::to_string(l) + ".";
    p.weights.names.push_back(pre + "w_in");
    p.weights.tensors.push_back(uniform({d, 3 * d}));
    p.weights.names.push_back(pre + "w_hid");
    p.weights.tensors.push_back(uniform({d, 3 * d}));
    p.weights.names.push_back(pre + "bias");
    p.weights.tensors.push_back(uniform({3 * d}));
  }
  p.weights.names.push_back("out.w");
  p.weights.tensors.push_back(Array::zeros({d, v}));
  p.weights.names.push_back("out.b");
  p.weights.tensors.push_back(Array::zeros({v}));
  return p;
}

namespace {

// y = x * W (+ bias), accumulating over rows of W in ascending order like the tape matmul.
void affine(std::span<const double> x, const Array& w, const double* bias, std::vector<double>& y) {
  const std::size_t cols = w.shape[1];
  y.assign(cols, 0.0);
  for (std::size_t p = 0; p < x.size(); ++p) {
    const double xv = x[p];
    const double* row = w.values.data() + p * cols;
    for (std::size_t j = 0; j < cols; ++j) y[j] += xv * row[j];
  }
  if (bias != nullptr) {
    for (std::size_t j = 0; j < cols; ++j) y[j] = y[j] + bias[j];
  }
}

void check_tokens(const Vocab& vocab, std::span<const Token> seq) {
  for (Token t : seq) {
    if (t >= vocab.size()) throw DataError("token id " + std::to_string(t) + " is outside the vocabulary");
  }
}

}  // namespace

Decoder::Decoder(const PolicyParams& params) : params_(&params) {
  state_.assign(params.config.layers, std::vector<double>(params.config.hidden, 0.0));
}

void Decoder::feed(Token token) {
  const auto& cfg = params_->config;
  if (length_ >= cfg.max_context) {
    throw LengthError("context exceeds model max length " + std::to_string(cfg.max_context));
  }
  if (token >= cfg.vocab_size) throw DataError("token id " + std::to_string(token) + " out of vocabulary");
  const auto& w = params_->weights.tensors;
  const std::size_t d = cfg.hidden;
  std::vector<double> x(w[PolicyParams::kEmbed].row(token).begin(), w[PolicyParams::kEmbed].row(token).end());
  std::vector<double> gx, gh;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    affine(x, w[params_->w_in(l)], w[params_->bias(l)].values.data(), gx);
    std::vector<double>& h = state_[l];
    affine(h, w[params_->w_hid(l)], nullptr, gh);
    for (std::size_t j = 0; j < d; ++j) {
      const double z = num::sigmoid_scalar(gx[j] + gh[j]);
      const double r = num::sigmoid_scalar(gx[d + j] + gh[d + j]);
      const double n = std::tanh(gx[2 * d + j] + r * gh[2 * d + j]);
      h[j] = n + z * (h[j] - n);
    }
    x = h;
  }
  ++length_;
}

std::vector<double> Decoder::logits() const {
  if (length_ == 0) throw ContractError("decoder: logits requested before any context");
  const auto& w = params_->weights.tensors;
  std::vector<double> y;
  affine(state_.back(), w[params_->out_w()], w[params_->out_b()].values.data(), y);
  return y;
}

double entropy(std::span<const double> logits) {
  std::vector<double> p(logits.size()), lp(logits.size());
  num::softmax_row(logits, p);
  num::log_softmax_row(logits, lp);
  double h = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) h -= p[j] * lp[j];
  return std::max(h, 0.0);
}

std::vector<double> next_token_distribution(const PolicyParams& params,
                                            std::span<const Token> context) {
  if (context.empty()) throw ContractError("next_token_distribution: empty context");
  if (context.size() > params.config.max_context) {
    throw LengthError("context of " + std::to_string(context.size()) + " tokens exceeds model max length " +
                      std::to_string(params.config.max_context));
  }
  Decoder dec(params);
  for (Token t : context) dec.feed(t);
  const auto z = dec.logits();
  std::vector<double> p(z.size());
  num::softmax_row(z, p);
  double s = 0.0;
  for (double& v : p) {
    v = std::max(v, num::kLogFloor);
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

namespace {

Trajectory decode(const PolicyParams& params, const Vocab& vocab, std::span<const Token> prompt,
                  std::size_t max_len, double temperature, Rng* rng) {
  if (max_len == 0) throw ContractError("sample_trajectory: max_len must be >= 1");
  check_tokens(vocab, prompt);
  Trajectory traj;
  traj.prompt.assign(prompt.begin(), prompt.end());
  traj.source = Source::on_policy;
  Decoder dec(params);
  dec.feed(vocab.bos());
  for (Token t : prompt) dec.feed(t);
  const std::size_t v = params.config.vocab_size;
  std::vector<double> lp(v), p(v), scaled(v);
  while (true) {
    const auto z = dec.logits();
    num::log_softmax_row(z, lp);
    Token pick = 0;
    if (rng == nullptr) {
      for (Token j = 1; j < v; ++j)
        if (z[j] > z[pick]) pick = j;
    } else {
      for (std::size_t j = 0; j < v; ++j) scaled[j] = z[j] / temperature;
      num::softmax_row(scaled, p);
      const double u = rng->uniform();
      double acc = 0.0;
      pick = v - 1;
      for (Token j = 0; j < v; ++j) {
        acc += p[j];
        if (u < acc) {
          pick = j;
          break;
        }
      }
    }
    traj.output.push_back(pick);
    traj.log_probs.push_back(lp[pick]);
    if (pick == vocab.eos()) break;
    if (traj.output.size() >= max_len) {
      traj.truncated = true;
      break;
    }
    dec.feed(pick);
  }
  return traj;
}

}  // namespace

Trajectory sample_trajectory(const PolicyParams& params, const Vocab& vocab,
                             std::span<const Token> prompt, double temperature,
                             std::size_t max_len, Rng& rng) {
  if (!(temperature > 0.0)) throw ContractError("sample_trajectory: temperature must be > 0");
  return decode(params, vocab, prompt, max_len, temperature, &rng);
}

Trajectory greedy_decode(const PolicyParams& params, const Vocab& vocab,
                         std::span<const Token> prompt, std::size_t max_len) {
  return decode(params, vocab, prompt, max_len, 1.0, nullptr);
}

std::vector<double> trajectory_log_probs(const PolicyParams& params, const Vocab& vocab,
                                         const Trajectory& traj) {
  num::Tape tape;
  const BoundParams bound = bind(tape, params);
  return output_log_probs(bound, vocab, traj.prompt, traj.output).value().values;
}

std::vector<double> token_entropies(const PolicyParams& params, const Vocab& vocab,
                                    const Trajectory& traj) {
  check_tokens(vocab, traj.prompt);
  check_tokens(vocab, traj.output);
  Decoder dec(params);
  dec.feed(vocab.bos());
  for (Token t : traj.prompt) dec.feed(t);
  std::vector<double> out;
  out.reserve(traj.output.size());
  for (std::size_t i = 0; i < traj.output.size(); ++i) {
    out.push_back(entropy(dec.logits()));
    if (i + 1 < traj.output.size()) dec.feed(traj.output[i]);
  }
  return out;
}

BoundParams bind(num::Tape& tape, const PolicyParams& params) {
  BoundParams b;
  b.params = &params;
  for (const auto& t : params.weights.tensors) b.vars.push_back(tape.leaf(t));
  return b;
}

Var output_log_probs(const BoundParams& bound, const Vocab& vocab, std::span<const Token> prompt,
                     std::span<const Token> output) {
  if (output.empty()) throw ContractError("output_log_probs: empty output");
  check_tokens(vocab, prompt);
  check_tokens(vocab, output);
  const PolicyParams& p = *bound.params;
  const auto& cfg = p.config;
  num::Tape& tape = *bound.vars[0].tape;

  std::vector<std::size_t> inputs;
  inputs.reserve(1 + prompt.size() + output.size());
  inputs.push_back(vocab.bos());
  inputs.insert(inputs.end(), prompt.begin(), prompt.end());
  inputs.insert(inputs.end(), output.begin(), output.end() - 1);
  if (inputs.size() > cfg.max_context) {
    throw LengthError("sequence of " + std::to_string(inputs.size()) + " context tokens exceeds model max length " +
                      std::to_string(cfg.max_context));
  }
  const std::size_t steps = inputs.size();
  const std::size_t d = cfg.hidden;

  Var x = num::take_rows(bound.vars[PolicyParams::kEmbed], inputs);
  std::vector<Var> hs;
  hs.reserve(steps);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Var gx_all = num::add(num::matmul(x, bound.vars[p.w_in(l)]), bound.vars[p.bias(l)]);
    Var w_hid = bound.vars[p.w_hid(l)];
    Var h = tape.constant(Array::zeros({1, d}));
    hs.clear();
    for (std::size_t t = 0; t < steps; ++t) {
      Var gx = num::slice_rows(gx_all, t, t + 1);
      Var gh = num::matmul(h, w_hid);
      Var z = num::sigmoid(num::add(num::slice_cols(gx, 0, d), num::slice_cols(gh, 0, d)));
      Var r = num::sigmoid(num::add(num::slice_cols(gx, d, 2 * d), num::slice_cols(gh, d, 2 * d)));
      Var n = num::tanh(num::add(num::slice_cols(gx, 2 * d, 3 * d),
                                 num::mul(r, num::slice_cols(gh, 2 * d, 3 * d))));
      h = num::add(n, num::mul(z, num::sub(h, n)));
      hs.push_back(h);
    }
    x = num::concat_rows(hs);
  }
  Var top = num::slice_rows(x, prompt.size(), steps);
  Var logits = num::add(num::matmul(top, bound.vars[p.out_w()]), bound.vars[p.out_b()]);
  const std::vector<std::size_t> targets(output.begin(), output.end());
  return num::gather(num::log_softmax(logits), targets);
}

void accumulate_grads(const BoundParams& bound, ParamSet& into) {
  for (std::size_t i = 0; i < bound.vars.size(); ++i) {
    const auto& g = bound.vars[i].grad().values;
    auto& dst = into.tensors[i].values;
    if (g.empty()) continue;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j];
  }
}

}  // namespace red::policy
