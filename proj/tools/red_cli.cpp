// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry points: train, eval, diff, gen-data.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "red/policy/checkpoint.hpp"
#include "red/tasks/tasks.hpp"
#include "red/trainer/analysis.hpp"
#include "red/trainer/trainer.hpp"

using namespace red;

namespace {

struct Suite {
  tasks::Family family = tasks::Family::addition;
  int difficulty = 1;
};

Suite parse_suite(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("suite must look like family:difficulty, got '" + text + "'");
  Suite s;
  s.family = tasks::parse_family(text.substr(0, colon));
  try {
    s.difficulty = std::stoi(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad difficulty in suite '" + text + "'");
  }
  return s;
}

std::set<policy::Token> parse_markers(const std::string& text, const policy::Vocab& vocab) {
  std::string spaced = text;
  for (char& c : spaced)
    if (c == ',') c = ' ';
  std::set<policy::Token> out;
  for (auto t : vocab.parse(spaced)) out.insert(t);
  return out;
}

int run_train(const std::string& config_path, const std::string& mode, const std::optional<std::uint64_t>& seed,
              const std::string& out, const std::vector<std::string>& overrides, const std::string& resume) {
  auto config = trainer::load_config(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    trainer::set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!mode.empty()) config.mode = fusion::parse_mode(mode);
  if (seed) config.seed = *seed;
  if (!out.empty()) config.out_dir = out;
  config.validate();
  std::optional<std::filesystem::path> from;
  if (!resume.empty()) from = resume;
  const auto e = trainer::train(config, from);
  std::printf("mode=%s seed=%llu steps=%zu pass1=%.4f avg@%zu=%.4f len=%.2f out=%s\n",
              std::string(fusion::mode_name(config.mode)).c_str(), static_cast<unsigned long long>(config.seed),
              config.steps, e.pass1, config.eval_k, e.avgk, e.mean_length, config.out_dir.c_str());
  return 0;
}

int run_eval(const std::string& ckpt, const std::string& suite_text, std::size_t k, double temperature, std::size_t n,
             std::uint64_t data_seed, std::size_t max_len, std::uint64_t seed) {
  const auto& vocab = tasks::standard_vocab();
  const auto params = policy::load_policy(ckpt, vocab);
  const auto suite = parse_suite(suite_text);
  const auto data = tasks::generate_dataset(suite.family, n, suite.difficulty, data_seed);
  const auto e = trainer::evaluate(params, vocab, data, k, temperature, max_len, seed);
  nlohmann::json j{{"suite", suite_text}, {"instances", e.instances}, {"k", k},      {"temperature", temperature},
                   {"pass1", e.pass1},    {"avgk", e.avgk},           {"mean_length", e.mean_length}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_diff(const std::string& a_path, const std::string& b_path, const std::string& markers_text,
             const std::string& out, const std::string& suite_text, std::size_t n, std::uint64_t data_seed,
             const std::string& source, double redundancy, std::size_t max_len, bool ansi) {
  const auto& vocab = tasks::standard_vocab();
  const auto a = policy::load_policy(a_path, vocab);
  const auto b = policy::load_policy(b_path, vocab);
  const auto suite = parse_suite(suite_text);
  const auto data = tasks::generate_dataset(suite.family, n, suite.difficulty, data_seed);
  std::vector<policy::Trajectory> trajs;
  for (const auto& inst : data) {
    if (source == "teacher") {
      trajs.push_back(tasks::as_trajectory(tasks::teacher_trajectory(inst, redundancy, data_seed)));
    } else {
      trajs.push_back(policy::greedy_decode(source == "greedy-a" ? a : b, vocab, inst.prompt, max_len));
    }
  }
  const auto report = trainer::token_prob_diff(a, b, vocab, trajs, parse_markers(markers_text, vocab));
  std::string text = "# stage aggregates\n" + trainer::diff_stage_csv(report) + "\n# tokens: text[bucket], " +
                     "bucket +/-: |dp|>=0.01, ++/--: >=0.05, +++/---: >=0.2, '.': below 0.01, *marker*\n" +
                     trainer::render_diff_text(report, trajs, vocab, ansi);
  policy::write_text_atomic(out, text);
  policy::write_text_atomic(out + ".rows.csv", trainer::diff_rows_csv(report, vocab));
  std::cout << trainer::diff_stage_csv(report);
  return 0;
}

int run_gen_data(const std::string& family, std::size_t n, int difficulty, double redundancy, std::uint64_t seed,
                 const std::string& out) {
  const auto data = tasks::generate_dataset(tasks::parse_family(family), n, difficulty, seed);
  tasks::write_offline_dataset(out, tasks::teacher_dataset(data, redundancy, seed));
  std::printf("wrote %zu samples to %s\n", data.size(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RED trainer: offline-trajectory fusion with group-relative policy optimization"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Run a training job from a config file");
  std::string config_path, mode, out, resume;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  train->add_option("--config", config_path, "key=value config file")->required()->check(CLI::ExistingFile);
  train->add_option("--mode", mode, "Fusion mode, overrides the config");
  train->add_option("--seed", seed, "Seed, overrides the config");
  train->add_option("--out", out, "Output directory, overrides the config");
  train->add_option("--set", overrides, "Extra key=value overrides");
  train->add_option("--resume", resume, "Training checkpoint to resume from")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a generated suite");
  std::string ckpt, suite = "addition:3";
  std::size_t k = 8, n = 64, max_len = 128;
  double temperature = 0.6;
  std::uint64_t data_seed = 1, eval_seed = 0;
  eval->add_option("--ckpt", ckpt, "Policy or training checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--suite", suite, "family:difficulty")->required();
  eval->add_option("--k", k, "Samples per instance")->check(CLI::PositiveNumber);
  eval->add_option("--temperature", temperature, "Sampling temperature")->check(CLI::PositiveNumber);
  eval->add_option("--n", n, "Number of instances");
  eval->add_option("--data-seed", data_seed, "Instance generator seed");
  eval->add_option("--max-len", max_len, "Generation limit");
  eval->add_option("--seed", eval_seed, "Sampling seed");

  auto* diff = app.add_subcommand("diff", "Token-probability difference between two checkpoints");
  std::string ckpt_a, ckpt_b, markers, report, source = "greedy-b";
  double redundancy = 1.0;
  bool ansi = false;
  std::size_t diff_n = 16;
  diff->add_option("--ckpt-a", ckpt_a, "Reference checkpoint")->required()->check(CLI::ExistingFile);
  diff->add_option("--ckpt-b", ckpt_b, "Compared checkpoint")->required()->check(CLI::ExistingFile);
  diff->add_option("--markers", markers, "Marker tokens, comma or space separated")->required();
  diff->add_option("--out", report, "Report path; rows go to <out>.rows.csv")->required();
  diff->add_option("--suite", suite, "family:difficulty of the prompts");
  diff->add_option("--n", diff_n, "Number of prompts");
  diff->add_option("--data-seed", data_seed, "Instance generator seed");
  diff->add_option("--source", source, "Trajectories: greedy-b, greedy-a or teacher")
      ->check(CLI::IsMember({"greedy-a", "greedy-b", "teacher"}));
  diff->add_option("--redundancy", redundancy, "Teacher redundancy for --source teacher");
  diff->add_option("--max-len", max_len, "Generation limit");
  diff->add_flag("--ansi", ansi, "Color the token rendering");

  auto* gen = app.add_subcommand("gen-data", "Write an offline teacher dataset as JSON Lines");
  std::string family = "addition", gen_out;
  std::size_t gen_n = 100;
  int difficulty = 3;
  double gen_redundancy = 1.0;
  std::uint64_t gen_seed = 1;
  gen->add_option("--family", family, "addition, reversal or modular")->required();
  gen->add_option("--n", gen_n, "Number of samples")->required();
  gen->add_option("--difficulty", difficulty, "Difficulty")->required();
  gen->add_option("--redundancy", gen_redundancy, "Teacher redundancy");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output file")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (train->parsed()) return run_train(config_path, mode, seed, out, overrides, resume);
    if (eval->parsed()) return run_eval(ckpt, suite, k, temperature, n, data_seed, max_len, eval_seed);
    if (diff->parsed())
      return run_diff(ckpt_a, ckpt_b, markers, report, suite, diff_n, data_seed, source, redundancy, max_len, ansi);
    if (gen->parsed()) return run_gen_data(family, gen_n, difficulty, gen_redundancy, gen_seed, gen_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
