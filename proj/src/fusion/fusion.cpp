// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/fusion/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace red::fusion {

namespace {

constexpr std::array kModes{FusionMode::GRPO,          FusionMode::SFT_ONLY,          FusionMode::SFT_LOSS,
                            FusionMode::ON_POLICY,     FusionMode::OFF_POLICY_PI_ONE, FusionMode::OFF_POLICY_PI_PI,
                            FusionMode::RED_SHIFT_ONLY, FusionMode::RED_REG_ONLY,     FusionMode::RED_FULL};

double relative_change(double now, double prev) {
  if (prev == 0.0) return now == 0.0 ? 0.0 : std::abs(now) / num::kLogFloor;
  return std::abs(1.0 - now / prev);
}

double pooled_mean(const std::vector<std::vector<double>>& per_traj) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& v : per_traj) {
    for (double h : v) s += h;
    n += v.size();
  }
  return n == 0 ? 0.0 : s / static_cast<double>(n);
}

}  // namespace

std::string_view mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::GRPO: return "GRPO";
    case FusionMode::SFT_ONLY: return "SFT_ONLY";
    case FusionMode::SFT_LOSS: return "SFT_LOSS";
    case FusionMode::ON_POLICY: return "ON_POLICY";
    case FusionMode::OFF_POLICY_PI_ONE: return "OFF_POLICY_PI_ONE";
    case FusionMode::OFF_POLICY_PI_PI: return "OFF_POLICY_PI_PI";
    case FusionMode::RED_SHIFT_ONLY: return "RED_SHIFT_ONLY";
    case FusionMode::RED_REG_ONLY: return "RED_REG_ONLY";
    case FusionMode::RED_FULL: return "RED_FULL";
  }
  return "?";
}

FusionMode parse_mode(std::string_view name) {
  for (FusionMode m : kModes)
    if (mode_name(m) == name) return m;
  throw ConfigError("unknown fusion mode '" + std::string(name) + "'");
}

std::span<const FusionMode> all_modes() { return kModes; }

bool has_offline_term(FusionMode mode) { return mode != FusionMode::GRPO; }

bool has_rl_term(FusionMode mode) { return mode != FusionMode::SFT_ONLY; }

bool pools_offline_member(FusionMode mode) {
  switch (mode) {
    case FusionMode::ON_POLICY:
    case FusionMode::OFF_POLICY_PI_ONE:
    case FusionMode::OFF_POLICY_PI_PI:
    case FusionMode::RED_SHIFT_ONLY:
    case FusionMode::RED_FULL:
      return true;
    default:
      return false;
  }
}

bool uses_weight(FusionMode mode) { return mode == FusionMode::RED_REG_ONLY || mode == FusionMode::RED_FULL; }

OfflineShift offline_policy_shift(std::span<const double> pi, double r_mean) {
  if (!(r_mean >= 0.0 && r_mean <= 1.0)) throw ContractError("r_mean must lie in [0, 1], got " + std::to_string(r_mean));
  OfflineShift s;
  s.r_mean = r_mean;
  for (double p : pi) {
    if (!(p > 0.0)) throw NumericalError("offline policy shift: non-positive probability " + std::to_string(p));
    const double off = p + (1.0 - p) * r_mean;
    s.pi.push_back(p);
    s.pi_offline.push_back(off);
    s.ratio.push_back(p / off);
  }
  return s;
}

double entropy_weight(double dh_sft, double dh_rl, std::size_t group_size, double zero_guard) {
  const double g = static_cast<double>(group_size);
  if (dh_rl < zero_guard) return g;
  return std::clamp(dh_sft / dh_rl, 1.0, g);
}

double RegulatorState::observe(double h_rl_now, double h_sft_now) {
  ++observations;
  if (h_rl_prev && h_sft_prev) {
    const double raw_rl = relative_change(h_rl_now, *h_rl_prev);
    const double raw_sft = relative_change(h_sft_now, *h_sft_prev);
    if (config.smoothing && observations > 2) {
      const double alpha = 2.0 / (static_cast<double>(config.window) + 1.0);
      dh_rl = alpha * raw_rl + (1.0 - alpha) * dh_rl;
      dh_sft = alpha * raw_sft + (1.0 - alpha) * dh_sft;
    } else {
      dh_rl = raw_rl;
      dh_sft = raw_sft;
    }
    w = config.invert_ratio ? entropy_weight(dh_rl, dh_sft, config.group_size, config.zero_guard)
                            : entropy_weight(dh_sft, dh_rl, config.group_size, config.zero_guard);
  } else {
    w = 1.0;
  }
  h_rl = h_rl_now;
  h_sft = h_sft_now;
  h_rl_prev = h_rl_now;
  h_sft_prev = h_sft_now;
  return w;
}

double rl_entropy(const policy::PolicyParams& params, const policy::Vocab& vocab,
                  std::span<const grpo::RolloutGroup> groups, kernels::Exec exec) {
  std::vector<const policy::Trajectory*> trajs;
  for (const auto& g : groups)
    for (const auto& m : g.members) trajs.push_back(&m);
  if (trajs.empty()) throw ContractError("rl_entropy needs at least one on-policy trajectory");
  return pooled_mean(kernels::entropies_many(params, vocab, trajs, exec));
}

double sft_entropy(const policy::PolicyParams& params, const policy::Vocab& vocab,
                   std::span<const policy::Trajectory> offline, kernels::Exec exec) {
  std::vector<const policy::Trajectory*> trajs;
  for (const auto& t : offline) trajs.push_back(&t);
  if (trajs.empty()) throw ContractError("sft_entropy needs at least one offline trajectory");
  return pooled_mean(kernels::entropies_many(params, vocab, trajs, exec));
}

kernels::TermJob offline_term_job(FusionMode mode, const policy::Trajectory& offline, const OfflineShift* shift,
                                  std::optional<double> advantage, double w, std::size_t group_size) {
  if (!has_offline_term(mode)) throw ConfigError("mode " + std::string(mode_name(mode)) + " has no offline term");
  if (pools_offline_member(mode) && !advantage) {
    throw ConfigError("mode " + std::string(mode_name(mode)) + " needs the offline advantage");
  }
  const bool needs_shift = mode == FusionMode::RED_SHIFT_ONLY || mode == FusionMode::RED_FULL ||
                           mode == FusionMode::OFF_POLICY_PI_PI;
  if (needs_shift && shift == nullptr) throw ConfigError("mode " + std::string(mode_name(mode)) + " needs the policy shift");
  if (shift != nullptr && shift->pi.size() != offline.output.size()) {
    throw ContractError("policy shift length does not match the offline trajectory");
  }
  kernels::TermJob job;
  job.traj = &offline;
  job.offline = true;
  const double pooled = 1.0 / (static_cast<double>(group_size) + 1.0);
  switch (mode) {
    case FusionMode::SFT_ONLY:
    case FusionMode::SFT_LOSS:
      job.kind = kernels::TermKind::sft;
      break;
    case FusionMode::RED_REG_ONLY:
      job.kind = kernels::TermKind::sft;
      job.coef = w;
      break;
    case FusionMode::ON_POLICY:
      job.kind = kernels::TermKind::log_advantage;
      job.advantage = *advantage;
      job.coef = pooled;
      break;
    case FusionMode::OFF_POLICY_PI_ONE:
      job.kind = kernels::TermKind::offline_ratio;
      job.advantage = *advantage;
      job.coef = pooled;
      job.pi_offline.assign(offline.output.size(), 1.0);
      break;
    case FusionMode::OFF_POLICY_PI_PI:
      job.kind = kernels::TermKind::offline_ratio;
      job.advantage = *advantage;
      job.coef = pooled;
      job.pi_offline = shift->pi;
      break;
    case FusionMode::RED_SHIFT_ONLY:
    case FusionMode::RED_FULL:
      job.kind = kernels::TermKind::offline_ratio;
      job.advantage = *advantage;
      job.coef = mode == FusionMode::RED_FULL ? w * pooled : pooled;
      job.pi_offline = shift->pi_offline;
      break;
    case FusionMode::GRPO:
      break;
  }
  return job;
}

StepResult red_step_gradient(const policy::PolicyParams& params, const policy::Vocab& vocab,
                             std::span<const grpo::RolloutGroup> groups, RegulatorState& state,
                             const StepConfig& config, const policy::PolicyParams* reference, kernels::Exec exec) {
  if (groups.empty()) throw ContractError("red_step_gradient needs at least one group");
  config.clip.validate();
  const FusionMode mode = config.mode;
  std::vector<policy::Trajectory> offline;
  for (const auto& g : groups) {
    if (!g.offline) throw ContractError("group " + g.instance.id + " has no offline sample");
    if (g.size() != state.config.group_size) throw ContractError("group size does not match the regulator");
    offline.push_back(tasks::as_trajectory(*g.offline));
  }

  StepResult out;
  out.h_rl = rl_entropy(params, vocab, groups, exec);
  out.h_sft = sft_entropy(params, vocab, offline, exec);
  out.w = state.observe(out.h_rl, out.h_sft);
  out.dh_rl = state.dh_rl;
  out.dh_sft = state.dh_sft;

  // Offline token probabilities under the current policy, held constant.
  std::vector<std::vector<double>> offline_pi;
  const bool needs_pi = mode == FusionMode::OFF_POLICY_PI_PI || mode == FusionMode::RED_SHIFT_ONLY ||
                        mode == FusionMode::RED_FULL;
  if (needs_pi) {
    offline_pi = kernels::log_probs_many(params, vocab, offline, exec);
    for (auto& v : offline_pi)
      for (double& x : v) x = std::exp(x);
  }

  const double inv_b = 1.0 / static_cast<double>(groups.size());
  const double g = static_cast<double>(state.config.group_size);
  const bool pooled = pools_offline_member(mode);
  std::vector<kernels::TermJob> jobs;
  double acc = 0.0;
  double len = 0.0;
  std::size_t members = 0;
  for (std::size_t b = 0; b < groups.size(); ++b) {
    const auto& group = groups[b];
    acc += group.mean_reward();
    for (const auto& m : group.members) {
      len += static_cast<double>(m.output.size());
      ++members;
    }
    const auto adv = grpo::compute_advantages(group, pooled, config.advantage);
    if (has_rl_term(mode)) {
      const double coef = inv_b / (pooled ? g + 1.0 : g);
      for (auto& job : grpo::clipped_jobs(group, adv, config.clip, coef, reference, &vocab)) jobs.push_back(std::move(job));
    }
    if (has_offline_term(mode)) {
      std::optional<OfflineShift> shift;
      if (needs_pi) shift = offline_policy_shift(offline_pi[b], group.mean_reward());
      auto job = offline_term_job(mode, offline[b], shift ? &*shift : nullptr, adv.offline, out.w,
                                  state.config.group_size);
      job.coef *= inv_b;
      jobs.push_back(std::move(job));
    }
  }
  out.mean_accuracy = acc * inv_b;
  out.mean_length = len / static_cast<double>(members);

  const auto grads = kernels::evaluate_terms(params, vocab, jobs, exec);
  out.rl_loss = grads.rl_loss;
  out.offline_loss = grads.offline_loss;
  out.offline_grad_norm = grads.offline_grad.norm();
  out.gradient = grads.total();
  return out;
}

}  // namespace red::fusion
