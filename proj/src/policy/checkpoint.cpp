// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/policy/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace red::policy {

using nlohmann::json;

json policy_to_json(const PolicyParams& params, const Vocab& vocab) {
  json j;
  j["format"] = "red-policy";
  j["version"] = kPolicyFormatVersion;
  j["vocab_hash"] = vocab.hash();
  j["config"] = {{"vocab_size", params.config.vocab_size},
                 {"hidden", params.config.hidden},
                 {"layers", params.config.layers},
                 {"max_context", params.config.max_context},
                 {"init_scale", params.config.init_scale}};
  json tensors = json::array();
  for (std::size_t i = 0; i < params.weights.tensors.size(); ++i) {
    tensors.push_back({{"name", params.weights.names[i]}, {"shape", params.weights.tensors[i].shape}});
  }
  j["tensors"] = tensors;
  j["values"] = params.weights.flatten();
  return j;
}

PolicyParams policy_from_json(const json& j, const Vocab& vocab) {
  try {
    if (j.at("format") != "red-policy") throw DataError("checkpoint: not a policy container");
    if (j.at("version").get<int>() != kPolicyFormatVersion) {
      throw DataError("checkpoint: unsupported format version " + j.at("version").dump());
    }
    if (j.at("vocab_hash").get<std::uint64_t>() != vocab.hash()) {
      throw DataError("checkpoint: vocabulary hash mismatch");
    }
    ModelConfig cfg;
    const json& c = j.at("config");
    cfg.vocab_size = c.at("vocab_size");
    cfg.hidden = c.at("hidden");
    cfg.layers = c.at("layers");
    cfg.max_context = c.at("max_context");
    cfg.init_scale = c.at("init_scale");
    PolicyParams p = PolicyParams::init(cfg, 0);
    const json& tensors = j.at("tensors");
    if (tensors.size() != p.weights.tensors.size()) throw DataError("checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      if (tensors[i].at("name") != p.weights.names[i] ||
          tensors[i].at("shape").get<num::Shape>() != p.weights.tensors[i].shape) {
        throw DataError("checkpoint: tensor layout mismatch at " + p.weights.names[i]);
      }
    }
    const auto flat = j.at("values").get<std::vector<double>>();
    p.weights.assign(flat);
    if (!p.weights.all_finite()) throw DataError("checkpoint: non-finite parameter");
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: malformed container: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os << text;
    if (!os) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void save_policy(const std::filesystem::path& path, const PolicyParams& params, const Vocab& vocab) {
  write_text_atomic(path, policy_to_json(params, vocab).dump());
}

PolicyParams load_policy(const std::filesystem::path& path, const Vocab& vocab) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  if (j.contains("policy")) return policy_from_json(j.at("policy"), vocab);
  return policy_from_json(j, vocab);
}

}  // namespace red::policy
