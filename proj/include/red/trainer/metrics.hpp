// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace red::trainer {

struct MetricsRecord {
  std::size_t step = 0;
  double h_rl = 0.0;
  double h_sft = 0.0;
  double dh_rl = 0.0;
  double dh_sft = 0.0;
  double w = 1.0;
  double accuracy = 0.0;
  double mean_length = 0.0;
  double rl_loss = 0.0;
  double offline_loss = 0.0;
  double offline_grad_norm = 0.0;
  double grad_norm = 0.0;
  /// Set on evaluation steps only.
  std::optional<double> eval_pass1;
  std::optional<double> eval_avgk;
  std::optional<double> eval_length;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

const std::vector<std::string>& metrics_columns();

/// Comma-separated, header row first, 17 significant digits, empty cells for
/// unmeasured values.
std::string metrics_to_csv(const std::vector<MetricsRecord>& records);
/// Throws ParseError with the offending line.
std::vector<MetricsRecord> metrics_from_csv(std::string_view text);

/// Throws IoError when the path cannot be written.
void export_metrics(const std::vector<MetricsRecord>& records, const std::filesystem::path& path);
std::vector<MetricsRecord> import_metrics(const std::filesystem::path& path);

}  // namespace red::trainer
