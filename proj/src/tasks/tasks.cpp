// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/tasks/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "red/common/rng.hpp"
#include "red/policy/checkpoint.hpp"

namespace red::tasks {

const policy::Vocab& standard_vocab() {
  static const policy::Vocab vocab = [] {
    std::vector<std::string> t{"<pad>", "<bos>", "<eos>"};
    for (char c = '0'; c <= '9'; ++c) t.emplace_back(1, c);
    for (const char* s : {"+", "%", "=", "?", "rev"}) t.emplace_back(s);
    for (char c = 'a'; c <= 'h'; ++c) t.emplace_back(1, c);
    for (const char* s : {"<ans>", "</ans>", "<chk>", "</chk>", ";"}) t.emplace_back(s);
    return policy::Vocab(std::move(t), "<bos>", "<eos>", "<pad>");
  }();
  return vocab;
}

std::string_view family_name(Family f) {
  switch (f) {
    case Family::addition: return "addition";
    case Family::reversal: return "reversal";
    case Family::modular: return "modular";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "addition") return Family::addition;
  if (name == "reversal") return Family::reversal;
  if (name == "modular") return Family::modular;
  throw ConfigError("unknown task family '" + std::string(name) + "'");
}

namespace {

const policy::Vocab& V() { return standard_vocab(); }
Token tok(std::string_view s) { return V().id(s); }
Token digit(int d) { return tok(std::string(1, static_cast<char>('0' + d))); }

bool is_digit(Token t) { return t >= digit(0) && t <= digit(9); }
int digit_value(Token t) { return static_cast<int>(t - digit(0)); }

std::vector<Token> number_tokens(long long v) {
  std::vector<Token> out;
  for (char c : std::to_string(v)) out.push_back(digit(c - '0'));
  return out;
}

long long pow10(int d) {
  long long p = 1;
  for (int i = 0; i < d; ++i) p *= 10;
  return p;
}

long long operand(Rng& rng, int digits) {
  if (digits == 1) return static_cast<long long>(rng.below(10));
  return static_cast<long long>(rng.range(static_cast<std::uint64_t>(pow10(digits - 1)),
                                          static_cast<std::uint64_t>(pow10(digits) - 1)));
}

std::string make_id(const std::vector<Token>& prompt) {
  return V().render(prompt, "");
}

TaskInstance make_addition(long long a, long long b) {
  TaskInstance inst;
  inst.family = Family::addition;
  inst.difficulty = static_cast<int>(std::max(std::to_string(a).size(), std::to_string(b).size()));
  inst.prompt = number_tokens(a);
  inst.prompt.push_back(tok("+"));
  for (Token t : number_tokens(b)) inst.prompt.push_back(t);
  inst.prompt.push_back(tok("="));
  inst.prompt.push_back(tok("?"));
  inst.answer = number_tokens(a + b);
  inst.id = make_id(inst.prompt);
  return inst;
}

TaskInstance make_modular(long long a, int m) {
  TaskInstance inst;
  inst.family = Family::modular;
  inst.difficulty = static_cast<int>(std::to_string(a).size());
  inst.prompt = number_tokens(a);
  inst.prompt.push_back(tok("%"));
  inst.prompt.push_back(digit(m));
  inst.prompt.push_back(tok("="));
  inst.prompt.push_back(tok("?"));
  inst.answer = number_tokens(a % m);
  inst.id = make_id(inst.prompt);
  return inst;
}

TaskInstance make_reversal(const std::vector<Token>& letters) {
  TaskInstance inst;
  inst.family = Family::reversal;
  inst.difficulty = static_cast<int>(letters.size());
  inst.prompt.push_back(tok("rev"));
  inst.prompt.insert(inst.prompt.end(), letters.begin(), letters.end());
  inst.prompt.push_back(tok("="));
  inst.prompt.push_back(tok("?"));
  inst.answer.assign(letters.rbegin(), letters.rend());
  inst.id = make_id(inst.prompt);
  return inst;
}

void check_difficulty(Family family, int difficulty) {
  const int max_d = family == Family::reversal ? 9 : 12;
  if (difficulty < 1 || difficulty > max_d) {
    throw ConfigError("difficulty " + std::to_string(difficulty) + " outside [1, " +
                      std::to_string(max_d) + "] for family " + std::string(family_name(family)));
  }
}

TaskInstance random_instance(Family family, int difficulty, Rng& rng) {
  switch (family) {
    case Family::addition: {
      const long long a = operand(rng, difficulty);
      const long long b = operand(rng, difficulty);
      return make_addition(a, b);
    }
    case Family::modular: {
      const long long a = operand(rng, difficulty);
      const int m = static_cast<int>(rng.range(2, 9));
      return make_modular(a, m);
    }
    case Family::reversal: {
      std::vector<Token> letters;
      for (int i = 0; i < difficulty; ++i) letters.push_back(tok("a") + rng.below(8));
      return make_reversal(letters);
    }
  }
  throw ConfigError("unknown task family");
}

long long parse_number(std::span<const Token> digits) {
  if (digits.empty() || digits.size() > 13) throw DataError("prompt: malformed number");
  long long v = 0;
  for (Token t : digits) {
    if (!is_digit(t)) throw DataError("prompt: expected digit, got '" + V().text(t) + "'");
    v = v * 10 + digit_value(t);
  }
  return v;
}

// Solution steps, each terminated by ';'.
std::vector<std::vector<Token>> solution_steps(const TaskInstance& inst) {
  std::vector<std::vector<Token>> steps;
  const auto& p = inst.prompt;
  switch (inst.family) {
    case Family::addition: {
      const auto plus = std::find(p.begin(), p.end(), tok("+"));
      const auto eq = std::find(p.begin(), p.end(), tok("="));
      std::vector<Token> a(p.begin(), plus), b(plus + 1, eq);
      std::reverse(a.begin(), a.end());
      std::reverse(b.begin(), b.end());
      const std::size_t cols = std::max(a.size(), b.size());
      int carry = 0;
      for (std::size_t i = 0; i < cols; ++i) {
        const int x = i < a.size() ? digit_value(a[i]) : 0;
        const int y = i < b.size() ? digit_value(b[i]) : 0;
        const int s = x + y + carry;
        steps.push_back({digit(x), digit(y), digit(carry), tok("="), digit(s / 10), digit(s % 10), tok(";")});
        carry = s / 10;
      }
      break;
    }
    case Family::modular: {
      const auto pct = std::find(p.begin(), p.end(), tok("%"));
      const int m = digit_value(*(pct + 1));
      int r = 0;
      for (auto it = p.begin(); it != pct; ++it) {
        const int next = (10 * r + digit_value(*it)) % m;
        steps.push_back({digit(r), *it, tok("="), digit(next), tok(";")});
        r = next;
      }
      break;
    }
    case Family::reversal: {
      const std::size_t n = p.size() - 3;
      for (std::size_t i = n; i >= 1; --i) {
        steps.push_back({digit(static_cast<int>(i)), p[i], tok(";")});
      }
      break;
    }
  }
  return steps;
}

std::vector<Token> answer_block(const TaskInstance& inst) {
  std::vector<Token> out{tok("<ans>")};
  out.insert(out.end(), inst.answer.begin(), inst.answer.end());
  out.push_back(tok("</ans>"));
  out.push_back(V().eos());
  return out;
}

std::vector<Token> recheck_span(const std::vector<Token>& step) {
  std::vector<Token> span{tok("<chk>")};
  span.insert(span.end(), step.begin(), step.end() - 1);
  span.push_back(tok("</chk>"));
  return span;
}

std::size_t poisson(Rng& rng, double lambda) {
  if (lambda <= 0.0) return 0;
  const double limit = std::exp(-lambda);
  std::size_t k = 0;
  double p = rng.uniform();
  while (p > limit) {
    ++k;
    p *= rng.uniform();
  }
  return k;
}

}  // namespace

std::vector<TaskInstance> generate_dataset(Family family, std::size_t n, int difficulty,
                                           std::uint64_t seed) {
  if (n == 0) throw ConfigError("generate_dataset: n must be >= 1");
  check_difficulty(family, difficulty);
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(family), static_cast<std::uint64_t>(difficulty)}));
  std::vector<TaskInstance> out;
  std::set<std::string> seen;
  const std::size_t budget = 200 * n + 1000;
  for (std::size_t attempt = 0; out.size() < n; ++attempt) {
    if (attempt >= budget) {
      throw ConfigError("cannot draw " + std::to_string(n) + " distinct " +
                        std::string(family_name(family)) + " instances at difficulty " +
                        std::to_string(difficulty));
    }
    TaskInstance inst = random_instance(family, difficulty, rng);
    if (seen.insert(inst.id).second) out.push_back(std::move(inst));
  }
  return out;
}

TaskInstance instance_from_prompt(std::span<const Token> prompt) {
  const std::size_t n = prompt.size();
  if (n < 4 || prompt[n - 1] != tok("?") || prompt[n - 2] != tok("=")) {
    throw DataError("prompt: expected '= ?' suffix");
  }
  const auto body = prompt.first(n - 2);
  if (body[0] == tok("rev")) {
    std::vector<Token> letters(body.begin() + 1, body.end());
    if (letters.empty()) throw DataError("prompt: empty reversal");
    for (Token t : letters) {
      if (t < tok("a") || t > tok("h")) throw DataError("prompt: reversal expects letters a-h");
    }
    return make_reversal(letters);
  }
  const auto plus = std::find(body.begin(), body.end(), tok("+"));
  if (plus != body.end()) {
    return make_addition(parse_number({body.begin(), plus}), parse_number({plus + 1, body.end()}));
  }
  const auto pct = std::find(body.begin(), body.end(), tok("%"));
  if (pct != body.end() && pct + 2 == body.end()) {
    const long long m = parse_number({pct + 1, body.end()});
    if (m < 2) throw DataError("prompt: modulus must be >= 2");
    return make_modular(parse_number({body.begin(), pct}), static_cast<int>(m));
  }
  throw DataError("prompt: unrecognized task");
}

bool extract_answer(std::span<const Token> output, std::vector<Token>& answer) {
  answer.clear();
  const auto open = std::find(output.begin(), output.end(), tok("<ans>"));
  if (open == output.end()) return false;
  const auto close = std::find(open + 1, output.end(), tok("</ans>"));
  if (close == output.end() || close + 1 == output.end() || *(close + 1) != V().eos()) return false;
  answer.assign(open + 1, close);
  return true;
}

double verify(const TaskInstance& instance, std::span<const Token> output) {
  std::vector<Token> got;
  if (!extract_answer(output, got)) return 0.0;
  return got == instance.answer ? 1.0 : 0.0;
}

double verify(const TaskInstance& instance, const policy::Trajectory& traj) {
  return verify(instance, std::span<const Token>(traj.output));
}

std::vector<Token> minimal_solution(const TaskInstance& instance) {
  std::vector<Token> out;
  for (const auto& step : solution_steps(instance)) out.insert(out.end(), step.begin(), step.end());
  const auto ans = answer_block(instance);
  out.insert(out.end(), ans.begin(), ans.end());
  return out;
}

OfflineSample teacher_trajectory(const TaskInstance& instance, double redundancy, std::uint64_t seed) {
  if (!(redundancy >= 0.0)) throw ConfigError("teacher redundancy must be >= 0");
  const auto steps = solution_steps(instance);
  const std::size_t minimal_len = minimal_solution(instance).size();
  std::size_t span_total = 0;
  for (const auto& s : steps) span_total += s.size() + 1;
  const double lambda = redundancy * static_cast<double>(minimal_len) / static_cast<double>(span_total);

  Rng rng(derive_seed(seed, {fnv1a(instance.id)}));
  OfflineSample sample;
  sample.instance_id = instance.id;
  sample.prompt = instance.prompt;
  sample.redundancy = redundancy;
  for (const auto& step : steps) {
    sample.teacher.insert(sample.teacher.end(), step.begin(), step.end());
    const std::size_t k = poisson(rng, lambda);
    const auto span = recheck_span(step);
    for (std::size_t i = 0; i < k; ++i) sample.teacher.insert(sample.teacher.end(), span.begin(), span.end());
  }
  const auto ans = answer_block(instance);
  sample.teacher.insert(sample.teacher.end(), ans.begin(), ans.end());
  if (verify(instance, std::span<const Token>(sample.teacher)) != 1.0) {
    throw std::logic_error("teacher produced an unverifiable trajectory for " + instance.id);
  }
  return sample;
}

std::vector<OfflineSample> teacher_dataset(const std::vector<TaskInstance>& instances,
                                           double redundancy, std::uint64_t seed) {
  std::vector<OfflineSample> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(teacher_trajectory(inst, redundancy, seed));
  return out;
}

policy::Trajectory as_trajectory(const OfflineSample& sample) {
  policy::Trajectory t;
  t.id = sample.instance_id + "#teacher";
  t.prompt = sample.prompt;
  t.output = sample.teacher;
  t.source = policy::Source::offline;
  return t;
}

std::string serialize_offline_dataset(const std::vector<OfflineSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    nlohmann::json j;
    j["id"] = s.instance_id;
    j["prompt"] = V().render(s.prompt);
    j["teacher"] = V().render(s.teacher);
    j["redundancy"] = s.redundancy;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_offline_dataset(const std::filesystem::path& path, const std::vector<OfflineSample>& samples) {
  policy::write_text_atomic(path, serialize_offline_dataset(samples));
}

std::vector<OfflineSample> parse_offline_dataset(std::string_view text) {
  std::vector<OfflineSample> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      OfflineSample s;
      s.instance_id = j.at("id").get<std::string>();
      s.prompt = V().parse(j.at("prompt").get<std::string>());
      s.teacher = V().parse(j.at("teacher").get<std::string>());
      s.redundancy = j.at("redundancy").get<double>();
      if (s.teacher.empty()) throw DataError("empty teacher trajectory");
      if (!(s.redundancy >= 0.0)) throw DataError("negative redundancy");
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const DataError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

std::vector<OfflineSample> read_offline_dataset(const std::filesystem::path& path) {
  return parse_offline_dataset(policy::read_text(path));
}

}  // namespace red::tasks
