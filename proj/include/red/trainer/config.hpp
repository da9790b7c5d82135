// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "red/fusion/fusion.hpp"
#include "red/tasks/tasks.hpp"

namespace red::trainer {

struct TrainerConfig {
  // task data
  tasks::Family family = tasks::Family::addition;
  int difficulty = 3;
  std::size_t train_size = 64;
  std::size_t eval_size = 64;
  /// Evaluate on the training prompts instead of a held-out set.
  bool eval_on_train = false;
  std::uint64_t data_seed = 1;
  double redundancy = 1.0;

  // model
  std::size_t hidden = 64;
  std::size_t layers = 2;
  std::size_t max_context = 256;
  double init_scale = 0.05;
  /// Optional starting policy; empty means fresh initialization.
  std::string init_ckpt;

  // objective
  fusion::FusionMode mode = fusion::FusionMode::RED_FULL;
  std::size_t group_size = 8;
  std::size_t batch_size = 4;
  double epsilon = 0.2;
  double kl_beta = 0.0;
  bool scale_by_std = true;
  double std_eps = 1e-6;
  bool invert_ratio = false;
  bool entropy_smoothing = false;
  std::size_t smoothing_window = 5;

  // optimizer
  double learning_rate = 1e-2;
  double momentum = 0.0;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;

  // sampling and schedule
  double temperature = 1.0;
  std::size_t max_len = 128;
  std::uint64_t seed = 0;
  std::size_t steps = 200;
  std::size_t eval_every = 20;
  std::size_t eval_k = 8;
  double eval_temperature = 0.6;
  std::size_t checkpoint_every = 50;
  std::string out_dir = "runs/default";

  /// Throws ConfigError naming the offending key.
  void validate() const;

  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

/// Applies one key=value pair. Throws ConfigError for unknown keys or bad values.
void set_config_value(TrainerConfig& config, std::string_view key, std::string_view value);

/// Flat key=value text; '#' starts a comment. Unknown or repeated keys are errors.
TrainerConfig parse_config(std::string_view text);
TrainerConfig load_config(const std::filesystem::path& path);

/// Canonical text with every key in a fixed order; parse_config(to_text(c)) == c.
std::string config_to_text(const TrainerConfig& config);

/// Hash of the canonical text excluding out_dir and steps.
std::uint64_t config_hash(const TrainerConfig& config);

std::vector<std::string> config_keys();

}  // namespace red::trainer
