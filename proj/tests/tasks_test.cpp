// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "red/common/rng.hpp"
#include "red/tasks/tasks.hpp"

using namespace red;
using namespace red::tasks;

namespace {

const policy::Vocab& V() { return standard_vocab(); }
std::string render(const std::vector<Token>& seq) { return V().render(seq, ""); }

}  // namespace

TEST_CASE("vocabulary is dense with distinct reserved ids") {
  CHECK(V().size() == 31);
  CHECK(V().bos() != V().eos());
  CHECK(V().pad() != V().eos());
  for (Token t = 0; t < V().size(); ++t) CHECK(V().id(V().text(t)) == t);
}

TEST_CASE("addition instances carry arithmetic ground truth") {
  const auto data = generate_dataset(Family::addition, 50, 2, 7);
  for (const auto& inst : data) {
    const std::string p = render(inst.prompt);
    const auto plus = p.find('+');
    const int a = std::stoi(p.substr(0, plus));
    const int b = std::stoi(p.substr(plus + 1, p.find('=') - plus - 1));
    CHECK(a >= 10);
    CHECK(a <= 99);
    CHECK(render(inst.answer) == std::to_string(a + b));
    CHECK(inst.difficulty == 2);
  }
  const auto inst = instance_from_prompt(V().parse("2 7 + 4 5 = ?"));
  CHECK(render(inst.answer) == "72");
  CHECK(inst.id == "27+45=?");
}

TEST_CASE("reversal and modular instances") {
  const auto rev = instance_from_prompt(V().parse("rev a b c = ?"));
  CHECK(render(rev.answer) == "cba");
  const auto mod = instance_from_prompt(V().parse("1 7 % 5 = ?"));
  CHECK(render(mod.answer) == "2");
  for (const auto& inst : generate_dataset(Family::modular, 30, 3, 1)) {
    CHECK(instance_from_prompt(inst.prompt) == inst);
  }
}

TEST_CASE("dataset generation is a pure function of its arguments") {
  for (Family f : {Family::addition, Family::reversal, Family::modular}) {
    const auto a = generate_dataset(f, 40, 3, 123);
    CHECK(a == generate_dataset(f, 40, 3, 123));
    CHECK(a != generate_dataset(f, 40, 3, 124));
    std::set<std::string> ids;
    for (const auto& inst : a) ids.insert(inst.id);
    CHECK(ids.size() == a.size());
  }
}

TEST_CASE("dataset generation errors") {
  CHECK_THROWS_AS(parse_family("calculus"), ConfigError);
  CHECK_THROWS_AS(generate_dataset(Family::addition, 0, 2, 1), ConfigError);
  // Only 8 distinct single-letter reversals exist.
  CHECK_THROWS_AS(generate_dataset(Family::reversal, 9, 1, 1), ConfigError);
  CHECK_THROWS_AS(generate_dataset(Family::reversal, 3, 10, 1), ConfigError);
}

TEST_CASE("verifier examples") {
  const auto inst = instance_from_prompt(V().parse("2 7 + 4 5 = ?"));
  CHECK(verify(inst, V().parse("<ans> 7 2 </ans> <eos>")) == 1.0);
  CHECK(verify(inst, std::vector<Token>{}) == 0.0);
  CHECK(verify(inst, V().parse("7 5 0 = 1 2 ; <chk> 7 5 0 = 1 2 </chk> <ans> 7 2 </ans> <eos>")) == 1.0);
  CHECK(verify(inst, V().parse("<ans> 7 3 </ans> <eos>")) == 0.0);
  CHECK(verify(inst, V().parse("<ans> 7 2 </ans>")) == 0.0);
  CHECK(verify(inst, V().parse("<ans> 7 2")) == 0.0);
  CHECK(verify(inst, V().parse("</ans> 7 2 <ans> <eos>")) == 0.0);
}

TEST_CASE("verifier is total on arbitrary token sequences") {
  const auto inst = instance_from_prompt(V().parse("rev a b = ?"));
  red::Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    std::vector<Token> out(rng.below(12));
    for (auto& t : out) t = rng.below(V().size());
    const double r = verify(inst, out);
    CHECK((r == 0.0 || r == 1.0));
  }
}

TEST_CASE("teacher with zero redundancy emits the minimal solution") {
  for (Family f : {Family::addition, Family::reversal, Family::modular}) {
    for (const auto& inst : generate_dataset(f, 20, 3, 9)) {
      const auto s = teacher_trajectory(inst, 0.0, 1);
      CHECK(s.teacher == minimal_solution(inst));
      CHECK(verify(inst, s.teacher) == 1.0);
    }
  }
  const auto inst = instance_from_prompt(V().parse("2 7 + 4 5 = ?"));
  CHECK(V().render(minimal_solution(inst)) == "7 5 0 = 1 2 ; 2 4 1 = 0 7 ; <ans> 7 2 </ans> <eos>");
}

TEST_CASE("teacher redundancy 1.0 roughly doubles the length") {
  for (Family f : {Family::addition, Family::reversal, Family::modular}) {
    const auto data = generate_dataset(f, 100, 3, 31);
    double ratio = 0.0;
    for (const auto& inst : data) {
      const auto s = teacher_trajectory(inst, 1.0, 77);
      CHECK(verify(inst, s.teacher) == 1.0);
      ratio += static_cast<double>(s.teacher.size()) / static_cast<double>(minimal_solution(inst).size());
    }
    ratio /= static_cast<double>(data.size());
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.15));
  }
}

TEST_CASE("every emitted offline sample verifies") {
  for (double r : {0.0, 0.5, 2.0, 4.0}) {
    const auto data = generate_dataset(Family::addition, 30, 4, 2);
    for (const auto& s : teacher_dataset(data, r, 3)) {
      CHECK(verify(instance_from_prompt(s.prompt), s.teacher) == 1.0);
    }
  }
}

TEST_CASE("offline dataset round-trip") {
  const auto data = generate_dataset(Family::addition, 1000, 3, 4);
  const auto samples = teacher_dataset(data, 0.75, 8);
  const auto path = std::filesystem::temp_directory_path() / "red_offline_roundtrip.jsonl";
  write_offline_dataset(path, samples);
  CHECK(read_offline_dataset(path) == samples);
  std::filesystem::remove(path);
}

TEST_CASE("truncated offline file errors at the exact line") {
  const auto data = generate_dataset(Family::reversal, 5, 3, 4);
  std::string text = serialize_offline_dataset(teacher_dataset(data, 1.0, 8));
  // Cut the file in the middle of the fourth record.
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) pos = text.find('\n', pos) + 1;
  text.resize(pos + 10);
  try {
    parse_offline_dataset(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
}

TEST_CASE("empty offline file is an empty dataset") {
  CHECK(parse_offline_dataset("").empty());
  CHECK_THROWS_AS(parse_offline_dataset("{\"id\":\"x\",\"prompt\":\"zz\",\"teacher\":\"<eos>\",\"redundancy\":0}\n"),
                  ParseError);
}

TEST_CASE("sample fixture parses and re-serializes unchanged") {
  const std::filesystem::path path = RED_DATA_DIR "/sample_offline.jsonl";
  const auto samples = read_offline_dataset(path);
  CHECK(samples.size() == 3);
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(serialize_offline_dataset(samples) == text);
}
