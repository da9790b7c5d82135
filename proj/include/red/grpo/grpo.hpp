// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "red/kernels/terms.hpp"
#include "red/policy/model.hpp"
#include "red/tasks/tasks.hpp"

namespace red::grpo {

struct ClipConfig {
  double epsilon = 0.2;
  /// Weight of the k3 KL estimate against a frozen reference policy.
  double kl_beta = 0.0;

  /// Throws ConfigError unless 0 < epsilon < 1 and kl_beta >= 0.
  void validate() const;
};

struct AdvantageConfig {
  bool scale_by_std = true;
  double std_eps = 1e-6;
};

struct RolloutGroup {
  tasks::TaskInstance instance;
  /// On-policy samples; their log_probs are the old-policy values.
  std::vector<policy::Trajectory> members;
  std::vector<double> rewards;
  std::optional<tasks::OfflineSample> offline;

  std::size_t size() const { return members.size(); }
  double mean_reward() const;
};

/// Samples G >= 2 members, member i from stream derive_seed(stream_seed, {i}).
RolloutGroup collect_group(const policy::PolicyParams& params, const policy::Vocab& vocab,
                           const tasks::TaskInstance& instance, std::size_t group_size,
                           double temperature, std::size_t max_len, std::uint64_t stream_seed,
                           kernels::Exec exec = kernels::Exec::parallel);

struct Advantages {
  std::vector<double> members;
  /// Set when the offline member was part of the pool.
  std::optional<double> offline;
};

/// (r - mean) / (std + eps) with the population std; all zeros when std == 0.
std::vector<double> normalize_rewards(std::span<const double> rewards, const AdvantageConfig& config = {});

/// Pool is the G members, plus the offline member with reward 1 when include_offline.
Advantages compute_advantages(const RolloutGroup& group, bool include_offline,
                              const AdvantageConfig& config = {});

/// Clipped surrogate jobs for every member, each scaled by coef / |o_i|.
/// Reference log-probs are computed when kl_beta > 0.
std::vector<kernels::TermJob> clipped_jobs(const RolloutGroup& group, const Advantages& advantages,
                                           const ClipConfig& clip, double coef,
                                           const policy::PolicyParams* reference = nullptr,
                                           const policy::Vocab* vocab = nullptr);

/// -(1/G) sum_i (1/|o_i|) sum_t min(r A, clip(r) A), built on the bound tape.
num::Var grpo_loss(const policy::BoundParams& bound, const policy::Vocab& vocab, const RolloutGroup& group,
                   const Advantages& advantages, const ClipConfig& clip,
                   const policy::PolicyParams* reference = nullptr);

/// Gradient of the unclipped form -(1/G) sum_i (1/|o_i|) sum_t r A grad log pi,
/// with r evaluated as a constant.
policy::ParamSet simplified_policy_gradient(const policy::PolicyParams& params, const policy::Vocab& vocab,
                                            const RolloutGroup& group, const Advantages& advantages,
                                            kernels::Exec exec = kernels::Exec::parallel);

}  // namespace red::grpo
