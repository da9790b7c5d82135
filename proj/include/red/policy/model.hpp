// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "red/common/rng.hpp"
#include "red/numerics/tape.hpp"
#include "red/policy/vocab.hpp"

namespace red {

struct LengthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace red

namespace red::policy {

enum class Source { on_policy, offline };

struct Trajectory {
  std::string id;
  std::vector<Token> prompt;
  std::vector<Token> output;
  /// log pi(o_t | q, o_<t) under the generating policy at temperature 1.
  std::vector<double> log_probs;
  Source source = Source::on_policy;
  bool truncated = false;
};

/// Two-layer GRU decoder with tied input embedding and a linear read-out.
struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t max_context = 256;
  double init_scale = 0.05;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Ordered named tensors. Used for weights, gradients and optimizer state.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<num::Array> tensors;

  std::size_t count() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  ParamSet zeros_like() const;
  /// this += factor * other
  void add_scaled(const ParamSet& other, double factor);
  void scale(double factor);
  double norm() const;
  bool all_finite() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

struct PolicyParams {
  ModelConfig config;
  ParamSet weights;

  /// Uniform(-init_scale, init_scale) everywhere except the read-out, which is
  /// zero so the initial policy is exactly uniform.
  static PolicyParams init(const ModelConfig& config, std::uint64_t seed);

  // Tensor slots in `weights.tensors`.
  static constexpr std::size_t kEmbed = 0;
  std::size_t w_in(std::size_t layer) const { return 1 + 3 * layer; }
  std::size_t w_hid(std::size_t layer) const { return 2 + 3 * layer; }
  std::size_t bias(std::size_t layer) const { return 3 + 3 * layer; }
  std::size_t out_w() const { return 1 + 3 * config.layers; }
  std::size_t out_b() const { return 2 + 3 * config.layers; }

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// Incremental tape-free forward pass, used for sampling and measurement.
class Decoder {
 public:
  explicit Decoder(const PolicyParams& params);

  /// Consumes one context token. Throws LengthError past max_context.
  void feed(Token token);
  /// Next-token logits given everything fed so far.
  std::vector<double> logits() const;
  std::size_t length() const { return length_; }

 private:
  const PolicyParams* params_;
  std::vector<std::vector<double>> state_;
  std::size_t length_ = 0;
};

/// Probability vector over the vocabulary for the token following `context`.
/// Context starts with BOS. Entries are clamped to >= kLogFloor and renormalized.
std::vector<double> next_token_distribution(const PolicyParams& params,
                                            std::span<const Token> context);

/// Samples until EOS (inclusive) or max_len tokens. Stored log-probs are at
/// temperature 1 regardless of the sampling temperature.
Trajectory sample_trajectory(const PolicyParams& params, const Vocab& vocab,
                             std::span<const Token> prompt, double temperature,
                             std::size_t max_len, Rng& rng);

/// Argmax decoding.
Trajectory greedy_decode(const PolicyParams& params, const Vocab& vocab,
                         std::span<const Token> prompt, std::size_t max_len);

/// Current-policy log pi(o_t | q, o_<t) for every output token, evaluated
/// through the differentiable path.
std::vector<double> trajectory_log_probs(const PolicyParams& params, const Vocab& vocab,
                                         const Trajectory& traj);

/// Entropy of the full next-token distribution at every output position.
std::vector<double> token_entropies(const PolicyParams& params, const Vocab& vocab,
                                    const Trajectory& traj);

double entropy(std::span<const double> logits);

/// Parameters bound as leaves on one tape.
struct BoundParams {
  const PolicyParams* params = nullptr;
  std::vector<num::Var> vars;
};

BoundParams bind(num::Tape& tape, const PolicyParams& params);

/// Differentiable log-probabilities of `output` given BOS + prompt. Shape [|output|].
num::Var output_log_probs(const BoundParams& bound, const Vocab& vocab,
                          std::span<const Token> prompt, std::span<const Token> output);

/// into += gradients accumulated on the bound leaves.
void accumulate_grads(const BoundParams& bound, ParamSet& into);

}  // namespace red::policy
