// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "red/fusion/fusion.hpp"
#include "red/kernels/terms.hpp"
#include "red/trainer/config.hpp"
#include "red/trainer/metrics.hpp"

namespace red::trainer {

struct EvalResult {
  /// Greedy decoding accuracy.
  double pass1 = 0.0;
  /// Mean verifier reward over k samples per instance.
  double avgk = 0.0;
  /// Mean output length of the k samples.
  double mean_length = 0.0;
  std::size_t instances = 0;
};

/// Sample j of an instance uses stream derive_seed(seed, {fnv1a(id), j}), so the
/// result does not depend on instance order or scheduling.
EvalResult evaluate(const policy::PolicyParams& params, const policy::Vocab& vocab,
                    std::span<const tasks::TaskInstance> instances, std::size_t k, double temperature,
                    std::size_t max_len, std::uint64_t seed, kernels::Exec exec = kernels::Exec::parallel);

struct TrainState {
  std::size_t step = 0;
  policy::PolicyParams params;
  fusion::RegulatorState regulator;
  /// Drives prompt selection.
  Rng rng;
  policy::ParamSet velocity;
  std::vector<MetricsRecord> metrics;
};

class Trainer {
 public:
  /// Builds the datasets and the initial state (fresh or from init_ckpt).
  explicit Trainer(TrainerConfig config, kernels::Exec exec = kernels::Exec::parallel);

  /// One optimizer step; returns the appended record.
  const MetricsRecord& step();
  /// Steps until state().step == config().steps, writing checkpoints and the
  /// metrics file at their cadences. On a non-finite loss or gradient the state
  /// before the failing step is saved as last_good.json and the error rethrown.
  void run();

  EvalResult evaluate_current() const;

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Throws ConfigError when the checkpoint was written under another config.
  void load_checkpoint(const std::filesystem::path& path);

  const TrainerConfig& config() const { return config_; }
  const TrainState& state() const { return state_; }
  const std::vector<tasks::TaskInstance>& train_set() const { return train_set_; }
  const std::vector<tasks::TaskInstance>& eval_set() const { return eval_set_; }
  const std::vector<tasks::OfflineSample>& offline_set() const { return offline_set_; }

 private:
  TrainerConfig config_;
  kernels::Exec exec_;
  std::vector<tasks::TaskInstance> train_set_;
  std::vector<tasks::TaskInstance> eval_set_;
  std::vector<tasks::OfflineSample> offline_set_;
  std::optional<policy::PolicyParams> reference_;
  TrainState state_;
};

std::filesystem::path metrics_path(const TrainerConfig& config);
std::filesystem::path final_checkpoint_path(const TrainerConfig& config);

/// Runs a full training job, optionally resuming from a checkpoint. Writes
/// metrics.csv, config.txt, final.json and final_eval.json under out_dir.
EvalResult train(const TrainerConfig& config, const std::optional<std::filesystem::path>& resume_from = std::nullopt,
                 kernels::Exec exec = kernels::Exec::parallel);

}  // namespace red::trainer
