// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/grpo/grpo.hpp"

#include <cmath>
#include <string>

namespace red::grpo {

void ClipConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("clip epsilon must lie in (0, 1), got " + std::to_string(epsilon));
  if (!(kl_beta >= 0.0)) throw ConfigError("kl_beta must be >= 0, got " + std::to_string(kl_beta));
}

double RolloutGroup::mean_reward() const {
  if (rewards.empty()) return 0.0;
  double s = 0.0;
  for (double r : rewards) s += r;
  return s / static_cast<double>(rewards.size());
}

RolloutGroup collect_group(const policy::PolicyParams& params, const policy::Vocab& vocab,
                           const tasks::TaskInstance& instance, std::size_t group_size, double temperature,
                           std::size_t max_len, std::uint64_t stream_seed, kernels::Exec exec) {
  if (group_size < 2) throw ConfigError("group size must be >= 2");
  RolloutGroup g;
  g.instance = instance;
  g.members = kernels::sample_many(params, vocab, instance.prompt, group_size, temperature, max_len, stream_seed, exec);
  for (std::size_t i = 0; i < g.members.size(); ++i) {
    g.members[i].id = instance.id + "#" + std::to_string(i);
    g.rewards.push_back(tasks::verify(instance, g.members[i]));
  }
  return g;
}

std::vector<double> normalize_rewards(std::span<const double> rewards, const AdvantageConfig& config) {
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double std = std::sqrt(var / n);
  std::vector<double> adv(rewards.size(), 0.0);
  if (std == 0.0) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    adv[i] = config.scale_by_std ? (rewards[i] - mean) / (std + config.std_eps) : rewards[i] - mean;
  }
  return adv;
}

Advantages compute_advantages(const RolloutGroup& group, bool include_offline, const AdvantageConfig& config) {
  if (group.rewards.size() != group.members.size()) throw ContractError("rewards and members differ in length");
  std::vector<double> pool = group.rewards;
  if (include_offline) pool.push_back(1.0);
  auto adv = normalize_rewards(pool, config);
  Advantages out;
  if (include_offline) {
    out.offline = adv.back();
    adv.pop_back();
  }
  out.members = std::move(adv);
  return out;
}

std::vector<kernels::TermJob> clipped_jobs(const RolloutGroup& group, const Advantages& advantages,
                                           const ClipConfig& clip, double coef,
                                           const policy::PolicyParams* reference, const policy::Vocab* vocab) {
  clip.validate();
  if (advantages.members.size() != group.members.size()) throw ContractError("advantages and members differ in length");
  if (clip.kl_beta > 0.0 && (reference == nullptr || vocab == nullptr)) {
    throw ConfigError("kl_beta > 0 requires a reference policy");
  }
  std::vector<kernels::TermJob> jobs;
  for (std::size_t i = 0; i < group.members.size(); ++i) {
    kernels::TermJob job;
    job.traj = &group.members[i];
    job.kind = kernels::TermKind::clipped;
    job.coef = coef;
    job.advantage = advantages.members[i];
    job.epsilon = clip.epsilon;
    job.kl_beta = clip.kl_beta;
    job.old_log_probs = group.members[i].log_probs;
    if (clip.kl_beta > 0.0) job.ref_log_probs = policy::trajectory_log_probs(*reference, *vocab, group.members[i]);
    jobs.push_back(std::move(job));
  }
  return jobs;
}

num::Var grpo_loss(const policy::BoundParams& bound, const policy::Vocab& vocab, const RolloutGroup& group,
                   const Advantages& advantages, const ClipConfig& clip, const policy::PolicyParams* reference) {
  const auto jobs = clipped_jobs(group, advantages, clip, 1.0 / static_cast<double>(group.size()), reference, &vocab);
  num::Var total = kernels::build_term(bound, vocab, jobs[0]);
  for (std::size_t i = 1; i < jobs.size(); ++i) total = num::add(total, kernels::build_term(bound, vocab, jobs[i]));
  return total;
}

policy::ParamSet simplified_policy_gradient(const policy::PolicyParams& params, const policy::Vocab& vocab,
                                            const RolloutGroup& group, const Advantages& advantages,
                                            kernels::Exec exec) {
  const double inv_g = 1.0 / static_cast<double>(group.size());
  std::vector<kernels::TermJob> jobs;
  for (std::size_t i = 0; i < group.members.size(); ++i) {
    const auto& m = group.members[i];
    const auto current = policy::trajectory_log_probs(params, vocab, m);
    kernels::TermJob job;
    job.traj = &m;
    job.kind = kernels::TermKind::weighted_log;
    job.coef = inv_g;
    const double inv_len = 1.0 / static_cast<double>(m.output.size());
    for (std::size_t t = 0; t < m.output.size(); ++t) {
      job.token_weights.push_back(std::exp(current[t] - m.log_probs[t]) * advantages.members[i] * inv_len);
    }
    jobs.push_back(std::move(job));
  }
  return kernels::evaluate_terms(params, vocab, jobs, exec).total();
}

}  // namespace red::grpo
