// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/trainer/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "red/policy/checkpoint.hpp"

namespace red::trainer {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': expected " + std::string(expected) + ", got '" +
                    std::string(value) + "'");
}

double as_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad(key, v, "a finite number");
  return out;
}

std::uint64_t as_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

bool as_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad(key, v, "true or false");
}

std::string fmt(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

struct Field {
  std::function<void(TrainerConfig&, std::string_view)> set;
  std::function<std::string(const TrainerConfig&)> get;
};

#define RED_SIZE_FIELD(name)                                                                          \
  {                                                                                                   \
#name, {[](TrainerConfig& c, std::string_view v) { c.name = as_uint(#name, v); },               \
             [](const TrainerConfig& c) { return std::to_string(c.name); } }                           \
  }
#define RED_DOUBLE_FIELD(name)                                                                        \
  {                                                                                                   \
#name, {[](TrainerConfig& c, std::string_view v) { c.name = as_double(#name, v); },             \
             [](const TrainerConfig& c) { return fmt(c.name); } }                                      \
  }
#define RED_BOOL_FIELD(name)                                                                          \
  {                                                                                                   \
#name, {[](TrainerConfig& c, std::string_view v) { c.name = as_bool(#name, v); },               \
             [](const TrainerConfig& c) { return fmt(c.name); } }                                      \
  }

// Ordered table; the order defines the canonical text.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table{
      {"family",
       {[](TrainerConfig& c, std::string_view v) { c.family = tasks::parse_family(v); },
        [](const TrainerConfig& c) { return std::string(tasks::family_name(c.family)); }}},
      {"difficulty",
       {[](TrainerConfig& c, std::string_view v) {
          const auto d = as_uint("difficulty", v);
          if (d > 1000) bad("difficulty", v, "a small positive integer");
          c.difficulty = static_cast<int>(d);
        },
        [](const TrainerConfig& c) { return std::to_string(c.difficulty); }}},
      RED_SIZE_FIELD(train_size),
      RED_SIZE_FIELD(eval_size),
      RED_BOOL_FIELD(eval_on_train),
      RED_SIZE_FIELD(data_seed),
      RED_DOUBLE_FIELD(redundancy),
      RED_SIZE_FIELD(hidden),
      RED_SIZE_FIELD(layers),
      RED_SIZE_FIELD(max_context),
      RED_DOUBLE_FIELD(init_scale),
      {"init_ckpt",
       {[](TrainerConfig& c, std::string_view v) { c.init_ckpt = std::string(v); },
        [](const TrainerConfig& c) { return c.init_ckpt; }}},
      {"mode",
       {[](TrainerConfig& c, std::string_view v) { c.mode = fusion::parse_mode(v); },
        [](const TrainerConfig& c) { return std::string(fusion::mode_name(c.mode)); }}},
      RED_SIZE_FIELD(group_size),
      RED_SIZE_FIELD(batch_size),
      RED_DOUBLE_FIELD(epsilon),
      RED_DOUBLE_FIELD(kl_beta),
      RED_BOOL_FIELD(scale_by_std),
      RED_DOUBLE_FIELD(std_eps),
      RED_BOOL_FIELD(invert_ratio),
      RED_BOOL_FIELD(entropy_smoothing),
      RED_SIZE_FIELD(smoothing_window),
      RED_DOUBLE_FIELD(learning_rate),
      RED_DOUBLE_FIELD(momentum),
      RED_DOUBLE_FIELD(grad_clip),
      RED_DOUBLE_FIELD(temperature),
      RED_SIZE_FIELD(max_len),
      RED_SIZE_FIELD(seed),
      RED_SIZE_FIELD(steps),
      RED_SIZE_FIELD(eval_every),
      RED_SIZE_FIELD(eval_k),
      RED_DOUBLE_FIELD(eval_temperature),
      RED_SIZE_FIELD(checkpoint_every),
      {"out_dir",
       {[](TrainerConfig& c, std::string_view v) { c.out_dir = std::string(v); },
        [](const TrainerConfig& c) { return c.out_dir; }}},
  };
  return table;
}

#undef RED_SIZE_FIELD
#undef RED_DOUBLE_FIELD
#undef RED_BOOL_FIELD

void require(bool ok, std::string_view key, const std::string& what) {
  if (!ok) throw ConfigError("config key '" + std::string(key) + "': " + what);
}

}  // namespace

void TrainerConfig::validate() const {
  require(difficulty >= 1, "difficulty", "must be >= 1");
  require(family != tasks::Family::reversal || difficulty <= 9, "difficulty", "reversal supports at most 9");
  require(train_size >= 1, "train_size", "must be >= 1");
  require(eval_on_train || eval_size >= 1, "eval_size", "must be >= 1");
  require(redundancy >= 0.0, "redundancy", "must be >= 0");
  require(hidden >= 1, "hidden", "must be >= 1");
  require(layers >= 1, "layers", "must be >= 1");
  require(init_scale >= 0.0, "init_scale", "must be >= 0");
  require(group_size >= 2, "group_size", "must be >= 2");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon", "must lie in (0, 1)");
  require(kl_beta >= 0.0, "kl_beta", "must be >= 0");
  require(std_eps > 0.0, "std_eps", "must be > 0");
  require(smoothing_window >= 1, "smoothing_window", "must be >= 1");
  require(learning_rate > 0.0, "learning_rate", "must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum", "must lie in [0, 1)");
  require(grad_clip >= 0.0, "grad_clip", "must be >= 0");
  require(temperature > 0.0, "temperature", "must be > 0");
  require(max_len >= 1, "max_len", "must be >= 1");
  require(max_len < max_context, "max_len", "must be smaller than max_context");
  require(eval_k >= 1, "eval_k", "must be >= 1");
  require(eval_temperature > 0.0, "eval_temperature", "must be > 0");
  require(!out_dir.empty(), "out_dir", "must not be empty");
}

void set_config_value(TrainerConfig& config, std::string_view key, std::string_view value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

TrainerConfig parse_config(std::string_view text) {
  TrainerConfig config;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("config line " + std::to_string(lineno) + ": repeated key '" + key + "'");
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

TrainerConfig load_config(const std::filesystem::path& path) { return parse_config(policy::read_text(path)); }

std::string config_to_text(const TrainerConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(config) + "\n";
  return out;
}

std::uint64_t config_hash(const TrainerConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, field] : fields()) {
    if (name == "out_dir" || name == "steps") continue;
    h = fnv1a(name + "=" + field.get(config) + "\n", h);
  }
  return h;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.first);
  return keys;
}

}  // namespace red::trainer
