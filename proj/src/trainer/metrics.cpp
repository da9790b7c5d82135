// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/trainer/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "red/policy/checkpoint.hpp"
#include "red/tasks/tasks.hpp"

namespace red::trainer {

namespace {

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(line, "bad number '" + s + "'");
  return v;
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{"step",        "h_rl",         "h_sft",      "dh_rl",
                                             "dh_sft",      "w",            "accuracy",   "mean_length",
                                             "rl_loss",     "offline_loss", "offline_grad_norm",
                                             "grad_norm",   "eval_pass1",   "eval_avgk",  "eval_length"};
  return cols;
}

std::string metrics_to_csv(const std::vector<MetricsRecord>& records) {
  std::string out;
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  auto opt = [](const std::optional<double>& v) { return v ? num17(*v) : std::string(); };
  for (const auto& r : records) {
    out += std::to_string(r.step) + "," + num17(r.h_rl) + "," + num17(r.h_sft) + "," + num17(r.dh_rl) + "," +
           num17(r.dh_sft) + "," + num17(r.w) + "," + num17(r.accuracy) + "," + num17(r.mean_length) + "," +
           num17(r.rl_loss) + "," + num17(r.offline_loss) + "," + num17(r.offline_grad_norm) + "," +
           num17(r.grad_norm) + "," + opt(r.eval_pass1) + "," + opt(r.eval_avgk) + "," + opt(r.eval_length) + "\n";
  }
  return out;
}

std::vector<MetricsRecord> metrics_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (split(line) != metrics_columns()) throw ParseError(1, "unexpected header");
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != metrics_columns().size()) throw ParseError(lineno, "expected " + std::to_string(metrics_columns().size()) + " cells");
    auto d = [&](std::size_t i) { return parse_double(c[i], lineno); };
    auto o = [&](std::size_t i) -> std::optional<double> {
      if (c[i].empty()) return std::nullopt;
      return d(i);
    };
    MetricsRecord r;
    std::size_t step = 0;
    const auto [ptr, ec] = std::from_chars(c[0].data(), c[0].data() + c[0].size(), step);
    if (ec != std::errc() || ptr != c[0].data() + c[0].size()) throw ParseError(lineno, "bad step");
    r.step = step;
    r.h_rl = d(1);
    r.h_sft = d(2);
    r.dh_rl = d(3);
    r.dh_sft = d(4);
    r.w = d(5);
    r.accuracy = d(6);
    r.mean_length = d(7);
    r.rl_loss = d(8);
    r.offline_loss = d(9);
    r.offline_grad_norm = d(10);
    r.grad_norm = d(11);
    r.eval_pass1 = o(12);
    r.eval_avgk = o(13);
    r.eval_length = o(14);
    out.push_back(r);
  }
  return out;
}

void export_metrics(const std::vector<MetricsRecord>& records, const std::filesystem::path& path) {
  policy::write_text_atomic(path, metrics_to_csv(records));
}

std::vector<MetricsRecord> import_metrics(const std::filesystem::path& path) {
  return metrics_from_csv(policy::read_text(path));
}

}  // namespace red::trainer
