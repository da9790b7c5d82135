// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/kernels/terms.hpp"

#include <string>

namespace red::kernels {

using num::Array;
using num::Var;

namespace {

void check_len(const TermJob& job, const std::vector<double>& v, const char* what) {
  if (v.size() != job.traj->output.size()) {
    throw ContractError(std::string("term job: ") + what + " has " + std::to_string(v.size()) +
                        " entries for " + std::to_string(job.traj->output.size()) + " tokens");
  }
}

struct JobOutput {
  policy::ParamSet grad;
  double loss = 0.0;
};

JobOutput run_job(const policy::PolicyParams& params, const policy::Vocab& vocab, const TermJob& job) {
  JobOutput out;
  out.grad = params.weights.zeros_like();
  try {
    num::Tape tape;
    const auto bound = policy::bind(tape, params);
    Var loss = build_term(bound, vocab, job);
    tape.backward(loss);
    out.loss = loss.value()[0];
    policy::accumulate_grads(bound, out.grad);
  } catch (const NumericalError& e) {
    throw NumericalError("trajectory " + job.traj->id + ": " + e.what());
  }
  if (!out.grad.all_finite()) throw NumericalError("trajectory " + job.traj->id + ": non-finite gradient");
  return out;
}

}  // namespace

Var build_term(const policy::BoundParams& bound, const policy::Vocab& vocab, const TermJob& job) {
  if (job.traj == nullptr) throw ContractError("term job without trajectory");
  num::Tape& tape = *bound.vars[0].tape;
  const auto& traj = *job.traj;
  const double inv_len = 1.0 / static_cast<double>(traj.output.size());
  Var logp = policy::output_log_probs(bound, vocab, traj.prompt, traj.output);
  Var objective;
  switch (job.kind) {
    case TermKind::clipped: {
      check_len(job, job.old_log_probs, "old_log_probs");
      Var old = tape.constant(Array::vector(job.old_log_probs));
      Var ratio = num::exp(num::sub(logp, old));
      Var unclipped = num::scale(ratio, job.advantage);
      Var clipped = num::scale(num::clamp(ratio, 1.0 - job.epsilon, 1.0 + job.epsilon), job.advantage);
      Var per_token = num::minimum(unclipped, clipped);
      if (job.kl_beta > 0.0) {
        check_len(job, job.ref_log_probs, "ref_log_probs");
        // k3 estimator: exp(ref - logp) - (ref - logp) - 1 >= 0
        Var delta = num::sub(tape.constant(Array::vector(job.ref_log_probs)), logp);
        Var kl = num::sub(num::sub(num::exp(delta), delta), tape.constant(Array::filled(delta.shape(), 1.0)));
        per_token = num::sub(per_token, num::scale(kl, job.kl_beta));
      }
      objective = num::scale(num::sum_all(per_token), inv_len);
      break;
    }
    case TermKind::sft:
      objective = num::scale(num::sum_all(logp), inv_len);
      break;
    case TermKind::log_advantage:
      objective = num::scale(num::sum_all(logp), job.advantage * inv_len);
      break;
    case TermKind::offline_ratio: {
      check_len(job, job.pi_offline, "pi_offline");
      Var ratio = num::div(num::exp(logp), tape.constant(Array::vector(job.pi_offline)));
      objective = num::scale(num::sum_all(num::scale(ratio, job.advantage)), inv_len);
      break;
    }
    case TermKind::weighted_log: {
      check_len(job, job.token_weights, "token_weights");
      objective = num::sum_all(num::mul(logp, tape.constant(Array::vector(job.token_weights))));
      break;
    }
  }
  return num::scale(objective, -job.coef);
}

policy::ParamSet GradientResult::total() const {
  policy::ParamSet t = rl_grad;
  t.add_scaled(offline_grad, 1.0);
  return t;
}

GradientResult evaluate_terms(const policy::PolicyParams& params, const policy::Vocab& vocab,
                              std::span<const TermJob> jobs, Exec exec) {
  GradientResult result;
  result.rl_grad = params.weights.zeros_like();
  result.offline_grad = params.weights.zeros_like();
  std::vector<JobOutput> outputs(jobs.size());
  parallel_for(jobs.size(), exec, [&](std::size_t i) { outputs[i] = run_job(params, vocab, jobs[i]); });
  // Fixed reduction order keeps results independent of scheduling.
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (jobs[i].offline) {
      result.offline_grad.add_scaled(outputs[i].grad, 1.0);
      result.offline_loss += outputs[i].loss;
    } else {
      result.rl_grad.add_scaled(outputs[i].grad, 1.0);
      result.rl_loss += outputs[i].loss;
    }
  }
  return result;
}

std::vector<policy::Trajectory> sample_many(const policy::PolicyParams& params, const policy::Vocab& vocab,
                                            std::span<const policy::Token> prompt, std::size_t n,
                                            double temperature, std::size_t max_len,
                                            std::uint64_t stream_seed, Exec exec) {
  std::vector<policy::Trajectory> out(n);
  parallel_for(n, exec, [&](std::size_t i) {
    Rng rng(derive_seed(stream_seed, {i}));
    out[i] = policy::sample_trajectory(params, vocab, prompt, temperature, max_len, rng);
  });
  return out;
}

std::vector<std::vector<double>> log_probs_many(const policy::PolicyParams& params, const policy::Vocab& vocab,
                                                std::span<const policy::Trajectory> trajs, Exec exec) {
  std::vector<std::vector<double>> out(trajs.size());
  parallel_for(trajs.size(), exec,
                 [&](std::size_t i) { out[i] = policy::trajectory_log_probs(params, vocab, trajs[i]); });
  return out;
}

std::vector<std::vector<double>> entropies_many(const policy::PolicyParams& params, const policy::Vocab& vocab,
                                                std::span<const policy::Trajectory* const> trajs, Exec exec) {
  std::vector<std::vector<double>> out(trajs.size());
  parallel_for(trajs.size(), exec,
                 [&](std::size_t i) { out[i] = policy::token_entropies(params, vocab, *trajs[i]); });
  return out;
}

}  // namespace red::kernels
