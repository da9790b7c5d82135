// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "red/policy/model.hpp"
#include "red/policy/vocab.hpp"

namespace red {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace red

namespace red::tasks {

using policy::Token;

/// Shared vocabulary for every task family: digits, letters a-h, operators,
/// answer delimiters and the re-check filler delimiters.
const policy::Vocab& standard_vocab();

enum class Family { addition, reversal, modular };

std::string_view family_name(Family f);
/// Throws ConfigError for unknown names.
Family parse_family(std::string_view name);

struct TaskInstance {
  std::string id;
  Family family = Family::addition;
  int difficulty = 1;
  std::vector<Token> prompt;
  std::vector<Token> answer;

  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

/// n distinct instances; a pure function of its arguments.
std::vector<TaskInstance> generate_dataset(Family family, std::size_t n, int difficulty,
                                           std::uint64_t seed);

/// Recovers the instance (and canonical answer) posed by a prompt.
TaskInstance instance_from_prompt(std::span<const Token> prompt);

/// Answer tokens between the first <ans> and the following </ans>, which must
/// be followed by EOS. Returns false when the output is malformed.
bool extract_answer(std::span<const Token> output, std::vector<Token>& answer);

/// 1 when the extracted answer equals the canonical one, else 0. Total.
double verify(const TaskInstance& instance, std::span<const Token> output);
double verify(const TaskInstance& instance, const policy::Trajectory& traj);

struct OfflineSample {
  std::string instance_id;
  std::vector<Token> prompt;
  std::vector<Token> teacher;
  double redundancy = 0.0;

  friend bool operator==(const OfflineSample&, const OfflineSample&) = default;
};

/// Minimal step-by-step solution followed by the answer and EOS.
std::vector<Token> minimal_solution(const TaskInstance& instance);

/// Scripted teacher: the minimal solution with re-check spans inserted after
/// solution steps so the expected length is about (1 + redundancy) times the
/// minimal length. Always verifier-correct.
OfflineSample teacher_trajectory(const TaskInstance& instance, double redundancy,
                                 std::uint64_t seed);

/// One teacher trajectory per instance, seeded by the instance id.
std::vector<OfflineSample> teacher_dataset(const std::vector<TaskInstance>& instances,
                                           double redundancy, std::uint64_t seed);

policy::Trajectory as_trajectory(const OfflineSample& sample);

/// JSON Lines, one sample per line. Token sequences are stored as token text.
void write_offline_dataset(const std::filesystem::path& path, const std::vector<OfflineSample>& samples);
std::string serialize_offline_dataset(const std::vector<OfflineSample>& samples);
/// Throws ParseError naming the first malformed line.
std::vector<OfflineSample> read_offline_dataset(const std::filesystem::path& path);
std::vector<OfflineSample> parse_offline_dataset(std::string_view text);

}  // namespace red::tasks
