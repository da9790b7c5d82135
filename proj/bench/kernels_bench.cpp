// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0
//
// Serial reference vs OpenMP kernels on a training-sized batch.

#include <benchmark/benchmark.h>

#include "red/grpo/grpo.hpp"
#include "red/kernels/terms.hpp"
#include "red/tasks/tasks.hpp"

using namespace red;

namespace {

struct Fixture {
  policy::PolicyParams params;
  std::vector<policy::Trajectory> trajs;
  std::vector<kernels::TermJob> jobs;

  Fixture() {
    policy::ModelConfig c;
    c.vocab_size = tasks::standard_vocab().size();
    c.hidden = 32;
    c.max_context = 96;
    c.init_scale = 0.4;
    params = policy::PolicyParams::init(c, 1);
    for (auto& v : params.weights.tensors[params.out_b()].values) v = 0.01;
    const auto data = tasks::generate_dataset(tasks::Family::reversal, 4, 3, 1);
    for (std::size_t i = 0; i < data.size(); ++i) {
      auto batch = kernels::sample_many(params, tasks::standard_vocab(), data[i].prompt, 8, 1.0, 40, i,
                                        kernels::Exec::serial);
      trajs.insert(trajs.end(), batch.begin(), batch.end());
    }
    for (auto& t : trajs) {
      kernels::TermJob j;
      j.traj = &t;
      j.kind = kernels::TermKind::clipped;
      j.advantage = 0.5;
      j.old_log_probs = t.log_probs;
      jobs.push_back(j);
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

kernels::Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
}

void BM_EvaluateTerms(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    auto r = kernels::evaluate_terms(f.params, tasks::standard_vocab(), f.jobs, exec_of(state));
    benchmark::DoNotOptimize(r.rl_loss);
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

void BM_SampleMany(benchmark::State& state) {
  const auto& f = fixture();
  const auto prompt = tasks::standard_vocab().parse("rev a b c = ?");
  for (auto _ : state) {
    auto t = kernels::sample_many(f.params, tasks::standard_vocab(), prompt, 32, 1.0, 40, 7, exec_of(state));
    benchmark::DoNotOptimize(t.data());
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

void BM_Entropies(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<const policy::Trajectory*> ptrs;
  for (const auto& t : f.trajs) ptrs.push_back(&t);
  for (auto _ : state) {
    auto h = kernels::entropies_many(f.params, tasks::standard_vocab(), ptrs, exec_of(state));
    benchmark::DoNotOptimize(h.data());
  }
  state.SetLabel(state.range(0) == 0 ? "serial" : "parallel");
}

}  // namespace

BENCHMARK(BM_EvaluateTerms)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleMany)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Entropies)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
