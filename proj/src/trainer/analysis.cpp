// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/trainer/analysis.hpp"

#include <cmath>
#include <cstdio>

namespace red::trainer {

namespace {

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> output_probs(const policy::PolicyParams& params, const policy::Vocab& vocab,
                                 const policy::Trajectory& t) {
  auto lp = policy::trajectory_log_probs(params, vocab, t);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

}  // namespace

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::open: return "open";
    case Stage::initial: return "initial";
    case Stage::intermediate: return "intermediate";
    case Stage::final: return "final";
  }
  return "?";
}

Stage stage_of(std::size_t t, std::size_t n) {
  // Integer thresholds avoid rounding at the boundaries.
  const std::size_t x = 10 * t;
  if (x < 1 * n) return Stage::open;
  if (x < 3 * n) return Stage::initial;
  if (x < 8 * n) return Stage::intermediate;
  return Stage::final;
}

DiffReport token_prob_diff(const policy::PolicyParams& a, const policy::PolicyParams& b, const policy::Vocab& vocab,
                           std::span<const policy::Trajectory> trajectories, const std::set<policy::Token>& markers) {
  if (a.config.vocab_size != vocab.size() || b.config.vocab_size != vocab.size()) {
    throw DataError("token_prob_diff: checkpoints do not share the vocabulary");
  }
  DiffReport report;
  std::array<double, 4> sum{}, marker_sum{};
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& t = trajectories[i];
    const auto pa = output_probs(a, vocab, t);
    const auto pb = output_probs(b, vocab, t);
    for (std::size_t pos = 0; pos < t.output.size(); ++pos) {
      DiffRow row;
      row.trajectory = i;
      row.position = pos;
      row.token = t.output[pos];
      row.stage = stage_of(pos, t.output.size());
      row.marker = markers.count(row.token) > 0;
      row.p_a = pa[pos];
      row.p_b = pb[pos];
      row.delta = pb[pos] - pa[pos];
      auto& agg = report.stages[static_cast<std::size_t>(row.stage)];
      ++agg.tokens;
      sum[static_cast<std::size_t>(row.stage)] += row.delta;
      if (row.marker) {
        ++agg.marker_tokens;
        marker_sum[static_cast<std::size_t>(row.stage)] += row.delta;
      }
      report.rows.push_back(row);
    }
  }
  for (std::size_t s = 0; s < 4; ++s) {
    auto& agg = report.stages[s];
    if (agg.tokens) agg.mean_delta = sum[s] / static_cast<double>(agg.tokens);
    agg.marker_sum_delta = marker_sum[s];
    if (agg.marker_tokens) agg.marker_mean_delta = marker_sum[s] / static_cast<double>(agg.marker_tokens);
  }
  return report;
}

std::string diff_rows_csv(const DiffReport& report, const policy::Vocab& vocab) {
  std::string out = "trajectory,position,token,stage,marker,p_a,p_b,delta\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.trajectory) + "," + std::to_string(r.position) + "," + vocab.text(r.token) + "," +
           std::string(stage_name(r.stage)) + "," + (r.marker ? "1" : "0") + "," + num17(r.p_a) + "," +
           num17(r.p_b) + "," + num17(r.delta) + "\n";
  }
  return out;
}

std::string diff_stage_csv(const DiffReport& report) {
  std::string out = "stage,tokens,marker_tokens,mean_delta,marker_mean_delta,marker_sum_delta\n";
  for (std::size_t s = 0; s < 4; ++s) {
    const auto& a = report.stages[s];
    out += std::string(stage_name(static_cast<Stage>(s))) + "," + std::to_string(a.tokens) + "," +
           std::to_string(a.marker_tokens) + "," + num17(a.mean_delta) + "," + num17(a.marker_mean_delta) + "," +
           num17(a.marker_sum_delta) + "\n";
  }
  return out;
}

std::string delta_bucket(double delta) {
  const double m = std::abs(delta);
  if (m < 0.01) return ".";
  const char sign = delta > 0 ? '+' : '-';
  const int n = m >= 0.2 ? 3 : (m >= 0.05 ? 2 : 1);
  return std::string(static_cast<std::size_t>(n), sign);
}

std::string render_diff_text(const DiffReport& report, std::span<const policy::Trajectory> trajectories,
                             const policy::Vocab& vocab, bool ansi) {
  std::string out;
  std::size_t current = static_cast<std::size_t>(-1);
  for (const auto& r : report.rows) {
    if (r.trajectory != current) {
      if (current != static_cast<std::size_t>(-1)) out += "\n";
      current = r.trajectory;
      out += vocab.render(trajectories[current].prompt, "") + " |";
    }
    const std::string bucket = delta_bucket(r.delta);
    std::string tok = vocab.text(r.token);
    if (r.marker) tok = "*" + tok + "*";
    std::string cell = tok + "[" + bucket + "]";
    if (ansi && bucket != ".") cell = (r.delta > 0 ? "\x1b[32m" : "\x1b[31m") + cell + "\x1b[0m";
    out += " " + cell;
  }
  if (!report.rows.empty()) out += "\n";
  return out;
}

}  // namespace red::trainer
