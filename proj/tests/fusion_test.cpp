// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "red/fusion/fusion.hpp"
#include "support/instances.hpp"

using namespace red;
using namespace red::fusion;
using red::testing::vocab;

namespace {

policy::ParamSet term_grad(const policy::PolicyParams& p, const kernels::TermJob& job) {
  return kernels::evaluate_terms(p, vocab(), std::span<const kernels::TermJob>(&job, 1)).total();
}

double term_value(const policy::PolicyParams& p, const kernels::TermJob& job) {
  num::Tape tape;
  return kernels::build_term(policy::bind(tape, p), vocab(), job).value()[0];
}

std::vector<double> probs(const policy::PolicyParams& p, const policy::Trajectory& t) {
  auto lp = policy::trajectory_log_probs(p, vocab(), t);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

policy::Trajectory offline_of(const grpo::RolloutGroup& g) { return tasks::as_trajectory(*g.offline); }

}  // namespace

TEST_CASE("mode names round-trip") {
  for (FusionMode m : all_modes()) CHECK(parse_mode(mode_name(m)) == m);
  CHECK_THROWS_AS(parse_mode("RED"), ConfigError);
  CHECK(all_modes().size() == 9);
}

TEST_CASE("policy shift examples") {
  auto s = offline_policy_shift(std::vector<double>{0.5}, 1.0);
  CHECK(s.pi_offline[0] == 1.0);
  CHECK(s.ratio[0] == 0.5);
  s = offline_policy_shift(std::vector<double>{0.5}, 0.0);
  CHECK(s.pi_offline[0] == 0.5);
  CHECK(s.ratio[0] == 1.0);
  s = offline_policy_shift(std::vector<double>{0.8}, 0.5);
  CHECK(s.pi_offline[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.ratio[0] == doctest::Approx(0.8 / 0.9).epsilon(1e-15));
  CHECK_THROWS_AS(offline_policy_shift(std::vector<double>{0.0}, 0.5), NumericalError);
  CHECK_THROWS_AS(offline_policy_shift(std::vector<double>{0.5}, 1.5), ContractError);
}

TEST_CASE("policy shift bounds, limits and monotonicity") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> pi(1 + rng.below(6));
    for (double& v : pi) v = std::max(1e-12, rng.uniform());
    const double lo = rng.uniform(), hi = lo + (1.0 - lo) * rng.uniform();
    const auto a = offline_policy_shift(pi, lo);
    const auto b = offline_policy_shift(pi, hi);
    for (std::size_t t = 0; t < pi.size(); ++t) {
      CHECK(pi[t] <= a.pi_offline[t]);
      CHECK(a.pi_offline[t] <= 1.0);
      CHECK(pi[t] <= a.ratio[t] * (1.0 + 1e-15));
      CHECK(a.ratio[t] <= 1.0);
      CHECK(a.pi_offline[t] <= b.pi_offline[t]);
    }
    const auto one = offline_policy_shift(pi, 1.0);
    const auto zero = offline_policy_shift(pi, 0.0);
    for (std::size_t t = 0; t < pi.size(); ++t) {
      CHECK(one.ratio[t] == pi[t]);
      CHECK(std::abs(zero.ratio[t] - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("entropy weight examples and guards") {
  CHECK(entropy_weight(0.02, 0.01, 8) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(entropy_weight(0.001, 0.1, 8) == 1.0);
  CHECK(entropy_weight(0.5, 1e-12, 8) == 8.0);
  CHECK(entropy_weight(0.0, 0.0, 4) == 4.0);
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double s = rng.uniform() * 0.2, r = rng.uniform() * 0.1;
    const double w = entropy_weight(s, r, 8);
    CHECK(w >= 1.0);
    CHECK(w <= 8.0);
    CHECK(entropy_weight(s * 1.5, r, 8) >= w);
    CHECK(entropy_weight(s, r * 1.5, 8) <= w);
  }
}

TEST_CASE("regulator starts at one and tracks relative entropy changes") {
  RegulatorState st;
  st.config.group_size = 8;
  CHECK(st.observe(2.0, 1.0) == 1.0);
  CHECK(st.dh_rl == 0.0);
  // H_rl 2.0 -> 1.98 is a 1% change, H_sft 1.0 -> 0.98 is 2%.
  CHECK(st.observe(1.98, 0.98) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(st.dh_rl == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(st.dh_sft == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(st.observe(1.98, 0.5) == 8.0);

  RegulatorState inv;
  inv.config.group_size = 8;
  inv.config.invert_ratio = true;
  inv.observe(2.0, 1.0);
  CHECK(inv.observe(1.98, 0.98) == 1.0);

  RegulatorState sm;
  sm.config.group_size = 8;
  sm.config.smoothing = true;
  sm.observe(1.0, 1.0);
  sm.observe(0.9, 0.8);
  CHECK(sm.dh_rl == doctest::Approx(0.1).epsilon(1e-12));
  sm.observe(0.9, 0.8);
  CHECK(sm.dh_rl == doctest::Approx(0.1 * 2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("batch entropies") {
  auto p = policy::PolicyParams::init(testing::tiny_params(1).config, 1);
  Rng rng(5);
  std::vector<grpo::RolloutGroup> groups;
  for (int i = 0; i < 3; ++i) groups.push_back(testing::random_group(rng, p, 3, true));
  const double ln_v = std::log(static_cast<double>(vocab().size()));
  CHECK(rl_entropy(p, vocab(), groups) == doctest::Approx(ln_v).epsilon(1e-12));

  const auto q = testing::tiny_params(2);
  const double h = rl_entropy(q, vocab(), groups);
  std::swap(groups[0], groups[2]);
  CHECK(std::abs(rl_entropy(q, vocab(), groups) - h) < 1e-10);
  std::vector<policy::Trajectory> same;
  for (const auto& g : groups)
    for (const auto& m : g.members) same.push_back(m);
  CHECK(std::abs(sft_entropy(q, vocab(), same) - h) < 1e-12);

  auto sharp = q;
  auto& b = sharp.weights.tensors[sharp.out_b()].values;
  std::fill(b.begin(), b.end(), -40.0);
  b[5] = 40.0;
  for (double& v : sharp.weights.tensors[sharp.out_w()].values) v = 0.0;
  CHECK(rl_entropy(sharp, vocab(), groups) < 1e-20);
}

TEST_CASE("off-policy with pi_offline = pi equals the on-policy form") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const auto p = testing::tiny_params(400 + trial);
    const auto group = testing::random_group(rng, p, 4, false);
    const auto off = offline_of(group);
    const double a = 2.0 * rng.uniform() - 1.0;
    const auto pi = probs(p, off);
    const auto shift = offline_policy_shift(pi, group.mean_reward());
    const auto g_pipi = term_grad(p, offline_term_job(FusionMode::OFF_POLICY_PI_PI, off, &shift, a, 1.0, 4));
    const auto g_on = term_grad(p, offline_term_job(FusionMode::ON_POLICY, off, nullptr, a, 1.0, 4));
    CHECK(testing::relative_error(g_pipi.flatten(), g_on.flatten()) < 1e-8);
  }
}

TEST_CASE("on-policy form with unit advantage is the SFT loss over G+1") {
  Rng rng(32);
  for (int trial = 0; trial < 25; ++trial) {
    const auto p = testing::tiny_params(500 + trial);
    const std::size_t g = 2 + rng.below(7);
    const auto group = testing::random_group(rng, p, g, false);
    const auto off = offline_of(group);
    const auto g_on = term_grad(p, offline_term_job(FusionMode::ON_POLICY, off, nullptr, 1.0, 1.0, g));
    auto g_sft = term_grad(p, offline_term_job(FusionMode::SFT_LOSS, off, nullptr, std::nullopt, 1.0, g));
    g_sft.scale(1.0 / static_cast<double>(g + 1));
    CHECK(testing::relative_error(g_on.flatten(), g_sft.flatten()) < 1e-8);

    // pi_offline = 1 with ratio forced to one reproduces the same chain.
    auto job = offline_term_job(FusionMode::OFF_POLICY_PI_ONE, off, nullptr, 1.0, 1.0, g);
    job.pi_offline = probs(p, off);
    CHECK(testing::relative_error(term_grad(p, job).flatten(), g_sft.flatten()) < 1e-8);
  }
}

TEST_CASE("unit multipliers collapse the full RED term to the on-policy form") {
  Rng rng(33);
  const auto p = testing::tiny_params(33);
  const auto group = testing::random_group(rng, p, 8, false);
  const auto off = offline_of(group);
  const auto shift = offline_policy_shift(probs(p, off), 0.0);
  for (double v : shift.ratio) CHECK(v == 1.0);
  const auto full = term_grad(p, offline_term_job(FusionMode::RED_FULL, off, &shift, 1.0, 1.0, 8));
  const auto on = term_grad(p, offline_term_job(FusionMode::ON_POLICY, off, nullptr, 1.0, 1.0, 8));
  CHECK(testing::relative_error(full.flatten(), on.flatten()) < 1e-12);

  for (FusionMode m : all_modes()) {
    if (!has_offline_term(m)) continue;
    const auto g = term_grad(p, offline_term_job(m, off, &shift, 0.0, 2.0, 8));
    if (m == FusionMode::SFT_LOSS || m == FusionMode::SFT_ONLY || m == FusionMode::RED_REG_ONLY) {
      CHECK(g.norm() > 0.0);
    } else {
      CHECK(g.norm() == 0.0);
    }
  }
}

TEST_CASE("shift ratio gradient flows through the numerator only") {
  Rng rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = testing::tiny_params(600 + trial);
    const auto group = testing::random_group(rng, p, 4, false);
    const auto off = offline_of(group);
    const double r_mean = rng.uniform(), a = 0.7, w = 2.5;
    const auto shift = offline_policy_shift(probs(p, off), r_mean);
    const auto job = offline_term_job(FusionMode::RED_FULL, off, &shift, a, w, 4);
    // Oracle: -(w / (G+1)) (1/|o|) sum_t ratio_t A grad log pi_t with ratio held constant.
    kernels::TermJob oracle;
    oracle.traj = &off;
    oracle.kind = kernels::TermKind::weighted_log;
    oracle.coef = w / 5.0;
    for (double r : shift.ratio) oracle.token_weights.push_back(r * a / static_cast<double>(off.output.size()));
    CHECK(testing::relative_error(term_grad(p, job).flatten(), term_grad(p, oracle).flatten()) < 1e-10);

    auto perturbed = job;
    for (double& v : perturbed.pi_offline) v = std::min(1.0, v * 1.1);
    CHECK(term_value(p, perturbed) != term_value(p, job));
  }
}

TEST_CASE("mode and argument mismatches are configuration errors") {
  Rng rng(35);
  const auto p = testing::tiny_params(35);
  const auto off = offline_of(testing::random_group(rng, p, 2, false));
  CHECK_THROWS_AS(offline_term_job(FusionMode::GRPO, off, nullptr, 1.0, 1.0, 2), ConfigError);
  CHECK_THROWS_AS(offline_term_job(FusionMode::RED_FULL, off, nullptr, 1.0, 1.0, 2), ConfigError);
  CHECK_THROWS_AS(offline_term_job(FusionMode::ON_POLICY, off, nullptr, std::nullopt, 1.0, 2), ConfigError);
}

TEST_CASE("every offline term gradient matches finite differences") {
  Rng rng(2025);
  double worst = 0.0;
  int n = 0;
  for (int trial = 0; trial < 14; ++trial) {
    const auto p = testing::tiny_params(700 + trial);
    const auto group = testing::random_group(rng, p, 2 + rng.below(6), false);
    const auto off = offline_of(group);
    const auto shift = offline_policy_shift(probs(p, off), group.mean_reward());
    const double a = 2.0 * rng.uniform() - 1.0, w = 1.0 + 3.0 * rng.uniform();
    for (FusionMode m : all_modes()) {
      if (!has_offline_term(m)) continue;
      const auto job = offline_term_job(m, off, &shift, a, w, group.size());
      const auto coords = testing::random_coords(rng, p.weights);
      const auto analytic = testing::pick(term_grad(p, job).flatten(), coords);
      const auto numeric =
          testing::fd_on_coords(p, coords, [&](const policy::PolicyParams& q) { return term_value(q, job); });
      worst = std::max(worst, testing::relative_error(analytic, numeric));
      ++n;
    }
  }
  CHECK(n >= 100);
  CHECK(worst < 1e-4);
}

TEST_CASE("step gradient in SFT_LOSS mode with a degenerate group is the pure SFT update") {
  Rng rng(40);
  const auto p = testing::tiny_params(40);
  std::vector<grpo::RolloutGroup> groups{testing::random_group(rng, p, 4, false), testing::random_group(rng, p, 4, false)};
  for (auto& g : groups) g.rewards.assign(4, 0.0);
  RegulatorState st;
  st.config.group_size = 4;
  StepConfig cfg;
  cfg.mode = FusionMode::SFT_LOSS;
  const auto r = red_step_gradient(p, vocab(), groups, st, cfg);
  policy::ParamSet expected = p.weights.zeros_like();
  for (const auto& g : groups) {
    const auto off = offline_of(g);
    expected.add_scaled(term_grad(p, offline_term_job(FusionMode::SFT_LOSS, off, nullptr, std::nullopt, 1.0, 4)), 0.5);
  }
  CHECK(testing::relative_error(r.gradient.flatten(), expected.flatten()) < 1e-12);
  CHECK(r.rl_loss == 0.0);
}

TEST_CASE("step gradient bookkeeping") {
  Rng rng(41);
  const auto p = testing::tiny_params(41);
  std::vector<grpo::RolloutGroup> groups{testing::random_group(rng, p, 4, false)};
  groups[0].rewards = {1, 0, 0, 0};
  RegulatorState st;
  st.config.group_size = 4;
  StepConfig cfg;
  cfg.mode = FusionMode::RED_FULL;
  const auto r = red_step_gradient(p, vocab(), groups, st, cfg);
  CHECK(r.w == 1.0);
  CHECK(r.mean_accuracy == 0.25);
  CHECK(r.offline_grad_norm > 0.0);
  CHECK(st.observations == 1);
  CHECK(r.h_rl == doctest::Approx(rl_entropy(p, vocab(), groups)).epsilon(1e-15));

  // Manual composition: on-policy terms over the (G+1) pool plus the shifted offline term.
  const auto adv = grpo::compute_advantages(groups[0], true);
  auto jobs = grpo::clipped_jobs(groups[0], adv, cfg.clip, 1.0 / 5.0);
  const auto off = offline_of(groups[0]);
  const auto shift = offline_policy_shift(probs(p, off), 0.25);
  jobs.push_back(offline_term_job(FusionMode::RED_FULL, off, &shift, adv.offline, 1.0, 4));
  const auto manual = kernels::evaluate_terms(p, vocab(), jobs).total();
  CHECK(testing::relative_error(manual.flatten(), r.gradient.flatten()) < 1e-13);

  StepConfig grpo_cfg;
  grpo_cfg.mode = FusionMode::GRPO;
  RegulatorState st2;
  st2.config.group_size = 4;
  const auto g = red_step_gradient(p, vocab(), groups, st2, grpo_cfg);
  CHECK(g.offline_grad_norm == 0.0);
  groups[0].offline.reset();
  CHECK_THROWS_AS(red_step_gradient(p, vocab(), groups, st2, grpo_cfg), ContractError);
}
