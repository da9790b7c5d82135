// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0
//
// Token-probability difference between two checkpoints along fixed trajectories.

#pragma once

#include <array>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "red/policy/model.hpp"

namespace red::trainer {

enum class Stage { open, initial, intermediate, final };

std::string_view stage_name(Stage s);

/// Stage of output position t out of n: first 10%, next 20%, middle 50%, last 20%.
Stage stage_of(std::size_t t, std::size_t n);

struct DiffRow {
  std::size_t trajectory = 0;
  std::size_t position = 0;
  policy::Token token = 0;
  Stage stage = Stage::open;
  bool marker = false;
  double p_a = 0.0;
  double p_b = 0.0;
  double delta = 0.0;
};

struct StageAggregate {
  std::size_t tokens = 0;
  std::size_t marker_tokens = 0;
  double mean_delta = 0.0;
  double marker_mean_delta = 0.0;
  double marker_sum_delta = 0.0;
};

struct DiffReport {
  std::vector<DiffRow> rows;
  std::array<StageAggregate, 4> stages{};
};

/// delta = p_b(token | ctx) - p_a(token | ctx) at every output position.
/// Throws DataError when the policies have different vocabularies.
DiffReport token_prob_diff(const policy::PolicyParams& a, const policy::PolicyParams& b, const policy::Vocab& vocab,
                           std::span<const policy::Trajectory> trajectories, const std::set<policy::Token>& markers);

/// Machine-readable rows followed by nothing else.
std::string diff_rows_csv(const DiffReport& report, const policy::Vocab& vocab);
/// Stage table.
std::string diff_stage_csv(const DiffReport& report);

/// Magnitude bucket sign convention: "+" per 0.01, "++" per 0.05, "+++" per 0.2
/// (and "-" likewise); "." when |delta| < 0.01.
std::string delta_bucket(double delta);

/// One line per trajectory, each token written as text[bucket]; markers are
/// wrapped in asterisks. With `ansi`, positive deltas are green and negative red.
std::string render_diff_text(const DiffReport& report, std::span<const policy::Trajectory> trajectories,
                             const policy::Vocab& vocab, bool ansi = false);

}  // namespace red::trainer
