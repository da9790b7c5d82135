// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "red/policy/checkpoint.hpp"
#include "red/trainer/analysis.hpp"
#include "red/trainer/trainer.hpp"
#include "support/instances.hpp"

using namespace red;
using namespace red::trainer;
using red::testing::vocab;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("red_trainer_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

TrainerConfig tiny_config(const std::string& out) {
  TrainerConfig c;
  c.family = tasks::Family::reversal;
  c.difficulty = 2;
  c.train_size = 6;
  c.eval_size = 4;
  c.hidden = 8;
  c.max_context = 48;
  c.group_size = 4;
  c.batch_size = 2;
  c.max_len = 16;
  c.steps = 6;
  c.eval_every = 3;
  c.eval_k = 2;
  c.checkpoint_every = 3;
  c.learning_rate = 0.5;
  c.momentum = 0.5;
  c.init_scale = 0.4;
  c.out_dir = out;
  return c;
}

}  // namespace

TEST_CASE("config parsing, validation and canonical text") {
  const auto c = parse_config("# comment\nmode = GRPO\nseed=7\n\ngroup_size=4  # inline\nlearning_rate=0.05\n");
  CHECK(c.mode == fusion::FusionMode::GRPO);
  CHECK(c.seed == 7);
  CHECK(c.group_size == 4);
  CHECK(c.learning_rate == 0.05);
  CHECK(c.learning_rate != TrainerConfig{}.momentum);
  CHECK(parse_config(config_to_text(c)) == c);
  CHECK(config_hash(c) == config_hash(parse_config(config_to_text(c))));
  auto d = c;
  d.out_dir = "elsewhere";
  d.steps = 9;
  CHECK(config_hash(d) == config_hash(c));
  d.seed = 8;
  CHECK(config_hash(d) != config_hash(c));

  CHECK_THROWS_AS(parse_config("colour=blue\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed=1\nseed=2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed=-1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epsilon=1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epsilon=abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("group_size=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("mode=RED\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("scale_by_std=yes\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just a line\n"), ConfigError);
  try {
    parse_config("seed=1\nbogus=2\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  CHECK(config_keys().size() == 34);
}

TEST_CASE("metrics export round-trips losslessly") {
  const auto dir = scratch("metrics");
  CHECK(metrics_to_csv({}) == metrics_to_csv({}));
  export_metrics({}, dir / "empty.csv");
  CHECK(import_metrics(dir / "empty.csv").empty());
  CHECK(policy::read_text(dir / "empty.csv").find('\n') == policy::read_text(dir / "empty.csv").size() - 1);

  std::vector<MetricsRecord> recs(3);
  Rng rng(1);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    auto& r = recs[i];
    r.step = i;
    r.h_rl = rng.uniform() * 3.0;
    r.h_sft = 1.0 / 3.0;
    r.w = 1.0 + rng.uniform();
    r.rl_loss = -rng.uniform() * 1e-17;
    r.grad_norm = 1e300 * rng.uniform();
    if (i == 1) {
      r.eval_pass1 = 0.1;
      r.eval_avgk = 0.7;
      r.eval_length = 13.25;
    }
  }
  export_metrics(recs, dir / "m.csv");
  CHECK(import_metrics(dir / "m.csv") == recs);
  const std::string header = metrics_to_csv({});
  CHECK(metrics_to_csv(recs).rfind(header, 0) == 0);
  CHECK_THROWS_AS(export_metrics(recs, dir / "missing_dir" / "m.csv"), IoError);
  CHECK_THROWS_AS(metrics_from_csv(header + "1,2\n"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("evaluation of an untrained policy and limit cases") {
  const auto p = policy::PolicyParams::init(testing::tiny_params(1, 8).config, 3);
  const auto data = tasks::generate_dataset(tasks::Family::addition, 12, 4, 5);
  const auto e = evaluate(p, vocab(), data, 4, 0.6, 30, 1);
  CHECK(e.pass1 == 0.0);
  CHECK(e.avgk == 0.0);
  CHECK(e.instances == 12);
  CHECK(e.mean_length > 0.0);

  const auto q = testing::tiny_params(2, 8, 3.0);
  const auto g = evaluate(q, vocab(), data, 1, 1e-4, 30, 1);
  CHECK(g.pass1 == g.avgk);
  // Order invariance and serial/parallel agreement.
  auto reversed = data;
  std::reverse(reversed.begin(), reversed.end());
  const auto a = evaluate(q, vocab(), data, 3, 1.0, 30, 9, kernels::Exec::parallel);
  const auto b = evaluate(q, vocab(), reversed, 3, 1.0, 30, 9, kernels::Exec::serial);
  CHECK(a.avgk == doctest::Approx(b.avgk).epsilon(1e-15));
  CHECK(a.mean_length == doctest::Approx(b.mean_length).epsilon(1e-15));
  CHECK_THROWS_AS(evaluate(q, vocab(), data, 0, 1.0, 30, 9), ConfigError);
}

TEST_CASE("supervised training memorizes a single instance") {
  const auto dir = scratch("memorize");
  auto c = tiny_config(dir.string());
  c.train_size = 1;
  c.eval_on_train = true;
  c.redundancy = 0.0;
  c.mode = fusion::FusionMode::SFT_ONLY;
  c.batch_size = 1;
  c.group_size = 2;
  c.hidden = 16;
  c.steps = 150;
  c.eval_every = 0;
  c.checkpoint_every = 0;
  c.momentum = 0.9;
  c.learning_rate = 0.2;
  c.init_scale = 0.5;
  Trainer t(c);
  t.run();
  const auto e = t.evaluate_current();
  CHECK(e.pass1 == 1.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("training is deterministic and resumes exactly") {
  const auto dir = scratch("determinism");
  for (auto mode : {fusion::FusionMode::RED_FULL, fusion::FusionMode::OFF_POLICY_PI_ONE}) {
    auto c1 = tiny_config((dir / "a").string());
    c1.mode = mode;
    auto c2 = c1;
    c2.out_dir = (dir / "b").string();
    train(c1);
    train(c2, std::nullopt, kernels::Exec::serial);
    const auto m1 = policy::read_text(metrics_path(c1));
    CHECK(m1 == policy::read_text(metrics_path(c2)));

    auto c3 = c1;
    c3.out_dir = (dir / "c").string();
    train(c3, dir / "a" / "step_3.json");
    CHECK(m1 == policy::read_text(metrics_path(c3)));
    CHECK(policy::read_text(final_checkpoint_path(c1)) == policy::read_text(final_checkpoint_path(c3)));

    const auto recs = import_metrics(metrics_path(c1));
    REQUIRE(recs.size() == c1.steps);
    const double ln_v = std::log(static_cast<double>(vocab().size()));
    for (const auto& r : recs) {
      CHECK(r.w >= 1.0);
      CHECK(r.w <= static_cast<double>(c1.group_size));
      CHECK(r.h_rl >= 0.0);
      CHECK(r.h_rl <= ln_v + 1e-12);
      CHECK(r.h_sft >= 0.0);
      CHECK(r.h_sft <= ln_v + 1e-12);
      CHECK(r.eval_avgk.has_value() == (r.step % 3 == 0));
    }
    CHECK(recs[0].w == 1.0);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("resuming under another config is rejected") {
  const auto dir = scratch("mismatch");
  auto c = tiny_config(dir.string());
  c.steps = 3;
  train(c);
  auto other = c;
  other.seed = 99;
  Trainer t(other);
  CHECK_THROWS_AS(t.load_checkpoint(dir / "step_3.json"), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a diverging run keeps its last good state") {
  const auto dir = scratch("diverge");
  auto c = tiny_config(dir.string());
  c.mode = fusion::FusionMode::SFT_ONLY;
  c.learning_rate = 1e305;
  c.checkpoint_every = 0;
  CHECK_THROWS_AS(train(c), NumericalError);
  REQUIRE(std::filesystem::exists(dir / "last_good.json"));
  Trainer t(c);
  t.load_checkpoint(dir / "last_good.json");
  CHECK(t.state().params.weights.all_finite());
  std::filesystem::remove_all(dir);
}

TEST_CASE("token probability diff") {
  const auto a = testing::tiny_params(5, 8);
  Rng rng(3);
  std::vector<policy::Trajectory> trajs;
  for (int i = 0; i < 6; ++i) {
    policy::Trajectory t;
    t.prompt = vocab().parse("rev a b = ?");
    t.output = testing::random_output(rng, 12);
    trajs.push_back(t);
  }
  const std::set<policy::Token> markers{vocab().id("<chk>"), vocab().id("7")};
  const auto same = token_prob_diff(a, a, vocab(), trajs, markers);
  for (const auto& r : same.rows) CHECK(r.delta == 0.0);

  auto b = a;
  const auto k = vocab().id("7");
  b.weights.tensors[b.out_b()].values[k] += 1.0;
  const auto rep = token_prob_diff(a, b, vocab(), trajs, markers);
  std::size_t positives = 0;
  for (const auto& r : rep.rows) {
    if (r.token == k) {
      CHECK(r.delta > 0.0);
      ++positives;
    } else {
      CHECK(r.delta < 0.0);
    }
  }
  CHECK(rep.stages[0].tokens + rep.stages[1].tokens + rep.stages[2].tokens + rep.stages[3].tokens == rep.rows.size());

  const auto csv = diff_rows_csv(rep, vocab());
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(rep.rows.size() + 1));
  CHECK(diff_stage_csv(rep).find("intermediate") != std::string::npos);
  const auto text = render_diff_text(rep, trajs, vocab());
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);

  CHECK(stage_of(0, 10) == Stage::open);
  CHECK(stage_of(1, 10) == Stage::initial);
  CHECK(stage_of(2, 10) == Stage::initial);
  CHECK(stage_of(3, 10) == Stage::intermediate);
  CHECK(stage_of(7, 10) == Stage::intermediate);
  CHECK(stage_of(8, 10) == Stage::final);
  CHECK(stage_of(9, 10) == Stage::final);
  CHECK(delta_bucket(0.001) == ".");
  CHECK(delta_bucket(0.02) == "+");
  CHECK(delta_bucket(-0.1) == "--");
  CHECK(delta_bucket(0.5) == "+++");

  auto other = testing::tiny_params(5, 8);
  other.config.vocab_size = 10;
  CHECK_THROWS_AS(token_prob_diff(a, other, vocab(), trajs, markers), DataError);
}
