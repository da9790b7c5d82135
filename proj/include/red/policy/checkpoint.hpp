// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "red/policy/model.hpp"

namespace red {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace red

namespace red::policy {

inline constexpr int kPolicyFormatVersion = 1;

/// Versioned JSON container: vocab hash, architecture and flat parameter list.
nlohmann::json policy_to_json(const PolicyParams& params, const Vocab& vocab);
/// Throws DataError on version or vocab mismatch.
PolicyParams policy_from_json(const nlohmann::json& j, const Vocab& vocab);

void save_policy(const std::filesystem::path& path, const PolicyParams& params, const Vocab& vocab);
PolicyParams load_policy(const std::filesystem::path& path, const Vocab& vocab);

/// Writes via a temporary file and rename so a crash never leaves a torn file.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace red::policy
