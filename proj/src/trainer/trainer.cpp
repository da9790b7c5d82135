// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/trainer/trainer.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "red/policy/checkpoint.hpp"

namespace red::trainer {

using nlohmann::json;

namespace {

constexpr int kTrainFormatVersion = 1;
constexpr std::uint64_t kRolloutSalt = 0x726f6c6c;
constexpr std::uint64_t kEvalSalt = 0x6576616c;
constexpr std::uint64_t kInitSalt = 0x696e6974;

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

EvalResult evaluate(const policy::PolicyParams& params, const policy::Vocab& vocab,
                    std::span<const tasks::TaskInstance> instances, std::size_t k, double temperature,
                    std::size_t max_len, std::uint64_t seed, kernels::Exec exec) {
  if (k < 1) throw ConfigError("evaluate: k must be >= 1");
  EvalResult out;
  out.instances = instances.size();
  if (instances.empty()) return out;
  std::vector<double> greedy(instances.size()), reward(instances.size()), length(instances.size());
  kernels::parallel_for(instances.size(), exec, [&](std::size_t i) {
    const auto& inst = instances[i];
    greedy[i] = tasks::verify(inst, policy::greedy_decode(params, vocab, inst.prompt, max_len));
    double r = 0.0, len = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      Rng rng(derive_seed(seed, {fnv1a(inst.id), j}));
      const auto t = policy::sample_trajectory(params, vocab, inst.prompt, temperature, max_len, rng);
      r += tasks::verify(inst, t);
      len += static_cast<double>(t.output.size());
    }
    reward[i] = r / static_cast<double>(k);
    length[i] = len / static_cast<double>(k);
  });
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out.pass1 += greedy[i];
    out.avgk += reward[i];
    out.mean_length += length[i];
  }
  const double n = static_cast<double>(instances.size());
  out.pass1 /= n;
  out.avgk /= n;
  out.mean_length /= n;
  return out;
}

Trainer::Trainer(TrainerConfig config, kernels::Exec exec) : config_(std::move(config)), exec_(exec) {
  config_.validate();
  const auto& vocab = tasks::standard_vocab();
  train_set_ = tasks::generate_dataset(config_.family, config_.train_size, config_.difficulty, config_.data_seed);
  if (config_.eval_on_train) {
    eval_set_ = train_set_;
  } else {
    // Held-out prompts: drawn from a separate stream and disjoint from training.
    const auto pool = tasks::generate_dataset(config_.family, config_.train_size + config_.eval_size,
                                              config_.difficulty, derive_seed(config_.data_seed, {kEvalSalt}));
    std::set<std::string> used;
    for (const auto& inst : train_set_) used.insert(inst.id);
    for (const auto& inst : pool) {
      if (eval_set_.size() == config_.eval_size) break;
      if (!used.count(inst.id)) eval_set_.push_back(inst);
    }
    if (eval_set_.size() < config_.eval_size) throw ConfigError("not enough distinct instances for a held-out eval set");
  }
  offline_set_ = tasks::teacher_dataset(train_set_, config_.redundancy, config_.data_seed);

  if (config_.init_ckpt.empty()) {
    policy::ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.hidden = config_.hidden;
    mc.layers = config_.layers;
    mc.max_context = config_.max_context;
    mc.init_scale = config_.init_scale;
    state_.params = policy::PolicyParams::init(mc, derive_seed(config_.seed, {kInitSalt}));
  } else {
    state_.params = policy::load_policy(config_.init_ckpt, vocab);
    if (state_.params.config.max_context <= config_.max_len) {
      throw ConfigError("init_ckpt max_context is too small for max_len");
    }
  }
  if (config_.kl_beta > 0.0) reference_ = state_.params;
  state_.regulator.config.group_size = config_.group_size;
  state_.regulator.config.invert_ratio = config_.invert_ratio;
  state_.regulator.config.smoothing = config_.entropy_smoothing;
  state_.regulator.config.window = config_.smoothing_window;
  state_.rng = Rng(derive_seed(config_.seed, {kRolloutSalt}));
  state_.velocity = state_.params.weights.zeros_like();
}

EvalResult Trainer::evaluate_current() const {
  return evaluate(state_.params, tasks::standard_vocab(), eval_set_, config_.eval_k, config_.eval_temperature,
                  config_.max_len, derive_seed(config_.seed, {kEvalSalt}), exec_);
}

const MetricsRecord& Trainer::step() {
  const auto& vocab = tasks::standard_vocab();
  const std::size_t s = state_.step;

  std::vector<std::size_t> picks(config_.batch_size);
  for (auto& p : picks) p = state_.rng.below(train_set_.size());

  std::vector<grpo::RolloutGroup> groups(picks.size());
  kernels::parallel_for(picks.size(), exec_, [&](std::size_t b) {
    const auto& inst = train_set_[picks[b]];
    groups[b] = grpo::collect_group(state_.params, vocab, inst, config_.group_size, config_.temperature,
                                    config_.max_len, derive_seed(config_.seed, {kRolloutSalt, s, b}),
                                    kernels::Exec::serial);
    groups[b].offline = offline_set_[picks[b]];
  });

  MetricsRecord rec;
  rec.step = s;
  if (config_.eval_every > 0 && s % config_.eval_every == 0) {
    const auto e = evaluate_current();
    rec.eval_pass1 = e.pass1;
    rec.eval_avgk = e.avgk;
    rec.eval_length = e.mean_length;
  }

  fusion::StepConfig sc;
  sc.mode = config_.mode;
  sc.clip = grpo::ClipConfig{config_.epsilon, config_.kl_beta};
  sc.advantage = grpo::AdvantageConfig{config_.scale_by_std, config_.std_eps};
  fusion::RegulatorState regulator = state_.regulator;
  auto result = fusion::red_step_gradient(state_.params, vocab, groups, regulator, sc,
                                          reference_ ? &*reference_ : nullptr, exec_);

  rec.h_rl = result.h_rl;
  rec.h_sft = result.h_sft;
  rec.dh_rl = result.dh_rl;
  rec.dh_sft = result.dh_sft;
  rec.w = result.w;
  rec.accuracy = result.mean_accuracy;
  rec.mean_length = result.mean_length;
  rec.rl_loss = result.rl_loss;
  rec.offline_loss = result.offline_loss;
  rec.offline_grad_norm = result.offline_grad_norm;
  rec.grad_norm = result.gradient.norm();
  if (!std::isfinite(rec.grad_norm)) throw NumericalError("non-finite gradient at step " + std::to_string(s));

  if (config_.grad_clip > 0.0 && rec.grad_norm > config_.grad_clip) result.gradient.scale(config_.grad_clip / rec.grad_norm);
  policy::ParamSet velocity = state_.velocity;
  velocity.scale(config_.momentum);
  velocity.add_scaled(result.gradient, 1.0);
  policy::ParamSet weights = state_.params.weights;
  weights.add_scaled(velocity, -config_.learning_rate);
  if (!weights.all_finite()) throw NumericalError("non-finite parameters after step " + std::to_string(s));

  state_.params.weights = std::move(weights);
  state_.velocity = std::move(velocity);
  state_.regulator = regulator;
  state_.step = s + 1;
  state_.metrics.push_back(rec);
  return state_.metrics.back();
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  const auto& r = state_.regulator;
  json j;
  j["format"] = "red-train";
  j["version"] = kTrainFormatVersion;
  j["step"] = state_.step;
  j["config_hash"] = config_hash(config_);
  j["policy"] = policy::policy_to_json(state_.params, tasks::standard_vocab());
  j["regulator"] = {{"h_rl_prev", optional_json(r.h_rl_prev)},
                    {"h_sft_prev", optional_json(r.h_sft_prev)},
                    {"h_rl", r.h_rl},
                    {"h_sft", r.h_sft},
                    {"dh_rl", r.dh_rl},
                    {"dh_sft", r.dh_sft},
                    {"w", r.w},
                    {"observations", r.observations}};
  j["rng"] = state_.rng.state();
  j["velocity"] = state_.velocity.flatten();
  j["metrics"] = metrics_to_csv(state_.metrics);
  policy::write_text_atomic(path, j.dump());
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(policy::read_text(path));
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "red-train") throw DataError("checkpoint " + path.string() + " is not a training checkpoint");
    if (j.at("version") != kTrainFormatVersion) throw DataError("unsupported training checkpoint version");
    if (j.at("config_hash").get<std::uint64_t>() != config_hash(config_)) {
      throw ConfigError("checkpoint " + path.string() + " was written under a different config");
    }
    TrainState st;
    st.step = j.at("step").get<std::size_t>();
    st.params = policy::policy_from_json(j.at("policy"), tasks::standard_vocab());
    st.regulator.config = state_.regulator.config;
    const auto& r = j.at("regulator");
    st.regulator.h_rl_prev = optional_from(r.at("h_rl_prev"));
    st.regulator.h_sft_prev = optional_from(r.at("h_sft_prev"));
    st.regulator.h_rl = r.at("h_rl").get<double>();
    st.regulator.h_sft = r.at("h_sft").get<double>();
    st.regulator.dh_rl = r.at("dh_rl").get<double>();
    st.regulator.dh_sft = r.at("dh_sft").get<double>();
    st.regulator.w = r.at("w").get<double>();
    st.regulator.observations = r.at("observations").get<std::size_t>();
    st.rng.restore(j.at("rng").get<std::string>());
    st.velocity = st.params.weights.zeros_like();
    const auto v = j.at("velocity").get<std::vector<double>>();
    if (v.size() != st.velocity.count()) throw DataError("checkpoint velocity has the wrong size");
    st.velocity.assign(v);
    st.metrics = metrics_from_csv(j.at("metrics").get<std::string>());
    state_ = std::move(st);
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
}

std::filesystem::path metrics_path(const TrainerConfig& config) {
  return std::filesystem::path(config.out_dir) / "metrics.csv";
}

std::filesystem::path final_checkpoint_path(const TrainerConfig& config) {
  return std::filesystem::path(config.out_dir) / "final.json";
}

void Trainer::run() {
  const std::filesystem::path dir(config_.out_dir);
  while (state_.step < config_.steps) {
    try {
      step();
    } catch (const NumericalError&) {
      save_checkpoint(dir / "last_good.json");
      export_metrics(state_.metrics, metrics_path(config_));
      throw;
    }
    if (config_.checkpoint_every > 0 && state_.step % config_.checkpoint_every == 0) {
      save_checkpoint(dir / ("step_" + std::to_string(state_.step) + ".json"));
      export_metrics(state_.metrics, metrics_path(config_));
    }
  }
}

EvalResult train(const TrainerConfig& config, const std::optional<std::filesystem::path>& resume_from,
                 kernels::Exec exec) {
  std::filesystem::create_directories(config.out_dir);
  Trainer trainer(config, exec);
  if (resume_from) trainer.load_checkpoint(*resume_from);
  policy::write_text_atomic(std::filesystem::path(config.out_dir) / "config.txt", config_to_text(config));
  trainer.run();
  export_metrics(trainer.state().metrics, metrics_path(config));
  trainer.save_checkpoint(final_checkpoint_path(config));
  const auto e = trainer.evaluate_current();
  json j{{"step", trainer.state().step}, {"pass1", e.pass1}, {"avgk", e.avgk}, {"mean_length", e.mean_length},
         {"instances", e.instances}, {"k", config.eval_k}, {"temperature", config.eval_temperature}};
  policy::write_text_atomic(std::filesystem::path(config.out_dir) / "final_eval.json", j.dump(2) + "\n");
  return e;
}

}  // namespace red::trainer
