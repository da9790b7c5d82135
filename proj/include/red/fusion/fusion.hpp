// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0
//
// Offline-trajectory fusion: the accuracy-aware policy shift, the
// entropy-ratio regulator and the combined step gradient.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "red/grpo/grpo.hpp"
#include "red/kernels/terms.hpp"

namespace red::fusion {

enum class FusionMode {
  GRPO,
  SFT_ONLY,
  SFT_LOSS,
  ON_POLICY,
  OFF_POLICY_PI_ONE,
  OFF_POLICY_PI_PI,
  RED_SHIFT_ONLY,
  RED_REG_ONLY,
  RED_FULL,
};

std::string_view mode_name(FusionMode mode);
/// Throws ConfigError for unknown names.
FusionMode parse_mode(std::string_view name);
std::span<const FusionMode> all_modes();

/// Whether the mode has an offline gradient term.
bool has_offline_term(FusionMode mode);
/// Whether the offline member joins the advantage pool and the 1/(G+1) normalization.
bool pools_offline_member(FusionMode mode);
bool has_rl_term(FusionMode mode);
bool uses_weight(FusionMode mode);

struct OfflineShift {
  std::vector<double> pi;
  std::vector<double> pi_offline;
  std::vector<double> ratio;
  double r_mean = 0.0;
};

/// pi_offline = pi + (1 - pi) r_mean, ratio = pi / pi_offline.
/// Throws NumericalError when some pi <= 0 and ContractError for r_mean outside [0, 1].
OfflineShift offline_policy_shift(std::span<const double> pi, double r_mean);

/// clip(dh_sft / dh_rl, 1, G); G when dh_rl is below zero_guard.
double entropy_weight(double dh_sft, double dh_rl, std::size_t group_size, double zero_guard = 1e-8);

struct RegulatorConfig {
  std::size_t group_size = 8;
  /// Uses dh_rl / dh_sft instead.
  bool invert_ratio = false;
  /// Exponential smoothing of the entropy changes with alpha = 2 / (window + 1).
  bool smoothing = false;
  std::size_t window = 5;
  double zero_guard = 1e-8;

  friend bool operator==(const RegulatorConfig&, const RegulatorConfig&) = default;
};

struct RegulatorState {
  RegulatorConfig config;
  std::optional<double> h_rl_prev;
  std::optional<double> h_sft_prev;
  double h_rl = 0.0;
  double h_sft = 0.0;
  double dh_rl = 0.0;
  double dh_sft = 0.0;
  double w = 1.0;
  std::size_t observations = 0;

  /// Records this step's pre-update entropies and recomputes w. The first
  /// observation leaves w = 1.
  double observe(double h_rl_now, double h_sft_now);

  friend bool operator==(const RegulatorState&, const RegulatorState&) = default;
};

/// Mean next-token entropy over every on-policy output position in the batch.
double rl_entropy(const policy::PolicyParams& params, const policy::Vocab& vocab,
                  std::span<const grpo::RolloutGroup> groups, kernels::Exec exec = kernels::Exec::parallel);

/// Same measurement over teacher-forced offline trajectories.
double sft_entropy(const policy::PolicyParams& params, const policy::Vocab& vocab,
                   std::span<const policy::Trajectory> offline, kernels::Exec exec = kernels::Exec::parallel);

/// The offline trajectory's term for one group. `shift` is required by the
/// shift modes, `advantage` by the advantage-weighted ones.
kernels::TermJob offline_term_job(FusionMode mode, const policy::Trajectory& offline, const OfflineShift* shift,
                                  std::optional<double> advantage, double w, std::size_t group_size);

struct StepConfig {
  FusionMode mode = FusionMode::RED_FULL;
  grpo::ClipConfig clip;
  grpo::AdvantageConfig advantage;
};

struct StepResult {
  policy::ParamSet gradient;
  double h_rl = 0.0;
  double h_sft = 0.0;
  double dh_rl = 0.0;
  double dh_sft = 0.0;
  double w = 1.0;
  double mean_accuracy = 0.0;
  double mean_length = 0.0;
  double rl_loss = 0.0;
  double offline_loss = 0.0;
  double offline_grad_norm = 0.0;
};

/// Entropies on the current (pre-update) policy, regulator update, then the
/// batch-averaged on-policy and offline terms. Every group must carry its
/// offline sample.
StepResult red_step_gradient(const policy::PolicyParams& params, const policy::Vocab& vocab,
                             std::span<const grpo::RolloutGroup> groups, RegulatorState& state,
                             const StepConfig& config, const policy::PolicyParams* reference = nullptr,
                             kernels::Exec exec = kernels::Exec::parallel);

}  // namespace red::fusion
