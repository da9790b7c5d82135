// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-trajectory objective terms. Every loss in the trainer is a sum of
// independent per-trajectory terms, so each term gets its own tape and the
// parameter gradients are reduced in job order. The OpenMP kernels and their
// serial references produce bit-identical results.

#pragma once

#include <cstdint>
#include <exception>
#include <span>
#include <vector>

#include "red/policy/model.hpp"

namespace red::kernels {

enum class Exec { serial, parallel };

/// Runs body(i) for i in [0, n), serially or with OpenMP. The exception of the
/// lowest failing index is rethrown, so errors do not depend on scheduling.
template <class Body>
void parallel_for(std::size_t n, Exec exec, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      try {
        body(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

enum class TermKind {
  /// min(r A, clip(r, 1-eps, 1+eps) A) with r = exp(logp - old_logp), minus beta * KL.
  clipped,
  /// log pi (maximum likelihood).
  sft,
  /// A * log pi (offline member treated as on-policy).
  log_advantage,
  /// (pi / pi_offline) * A with pi_offline held constant.
  offline_ratio,
  /// sum_t token_weight_t * log pi_t, not token-averaged. Gradient oracle only.
  weighted_log,
};

/// One trajectory's contribution: loss = -coef * mean_t f_t (sum_t for weighted_log).
struct TermJob {
  const policy::Trajectory* traj = nullptr;
  TermKind kind = TermKind::sft;
  double coef = 1.0;
  double advantage = 0.0;
  double epsilon = 0.2;
  double kl_beta = 0.0;
  std::vector<double> old_log_probs;
  std::vector<double> ref_log_probs;
  std::vector<double> pi_offline;
  std::vector<double> token_weights;
  /// Reduction bucket: offline-trajectory terms are reported separately.
  bool offline = false;
};

/// Builds the term on the tape the params are bound to; returns the scalar loss.
num::Var build_term(const policy::BoundParams& bound, const policy::Vocab& vocab, const TermJob& job);

struct GradientResult {
  policy::ParamSet rl_grad;
  policy::ParamSet offline_grad;
  double rl_loss = 0.0;
  double offline_loss = 0.0;

  policy::ParamSet total() const;
};

/// Loss values and gradients of all jobs. Non-finite values raise
/// NumericalError naming the trajectory.
GradientResult evaluate_terms(const policy::PolicyParams& params, const policy::Vocab& vocab,
                              std::span<const TermJob> jobs, Exec exec = Exec::parallel);

/// Samples n trajectories with per-sample streams derive_seed(stream_seed, {i}).
std::vector<policy::Trajectory> sample_many(const policy::PolicyParams& params,
                                            const policy::Vocab& vocab,
                                            std::span<const policy::Token> prompt, std::size_t n,
                                            double temperature, std::size_t max_len,
                                            std::uint64_t stream_seed, Exec exec = Exec::parallel);

/// Current-policy log-probs of many trajectories.
std::vector<std::vector<double>> log_probs_many(const policy::PolicyParams& params,
                                                const policy::Vocab& vocab,
                                                std::span<const policy::Trajectory> trajs,
                                                Exec exec = Exec::parallel);

/// Per-position entropies of many trajectories.
std::vector<std::vector<double>> entropies_many(const policy::PolicyParams& params,
                                                const policy::Vocab& vocab,
                                                std::span<const policy::Trajectory* const> trajs,
                                                Exec exec = Exec::parallel);

}  // namespace red::kernels
