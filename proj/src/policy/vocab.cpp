// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#include "red/policy/vocab.hpp"

#include <algorithm>
#include <sstream>

#include "red/common/rng.hpp"

namespace red::policy {

Vocab::Vocab(std::vector<std::string> tokens, std::string_view bos, std::string_view eos,
             std::string_view pad)
    : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    for (std::size_t j = i + 1; j < tokens_.size(); ++j) {
      if (tokens_[i] == tokens_[j]) throw DataError("vocab: duplicate token '" + tokens_[i] + "'");
    }
  }
  bos_ = id(bos);
  eos_ = id(eos);
  pad_ = id(pad);
  if (bos_ == eos_ || bos_ == pad_ || eos_ == pad_) {
    throw DataError("vocab: BOS, EOS and PAD must be distinct");
  }
}

const std::string& Vocab::text(Token t) const {
  if (t >= tokens_.size()) throw DataError("vocab: token id " + std::to_string(t) + " out of range");
  return tokens_[t];
}

std::optional<Token> Vocab::find(std::string_view text) const {
  auto it = std::find(tokens_.begin(), tokens_.end(), text);
  if (it == tokens_.end()) return std::nullopt;
  return static_cast<Token>(it - tokens_.begin());
}

Token Vocab::id(std::string_view text) const {
  if (auto t = find(text)) return *t;
  throw DataError("vocab: unknown token '" + std::string(text) + "'");
}

std::uint64_t Vocab::hash() const {
  std::uint64_t h = fnv1a("vocab");
  for (const auto& t : tokens_) h = fnv1a(t + '\x1f', h);
  h = fnv1a(std::to_string(bos_) + ":" + std::to_string(eos_) + ":" + std::to_string(pad_), h);
  return h;
}

std::string Vocab::render(const std::vector<Token>& seq, std::string_view sep) const {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += sep;
    out += text(seq[i]);
  }
  return out;
}

std::vector<Token> Vocab::parse(std::string_view text) const {
  std::vector<Token> out;
  std::istringstream is{std::string(text)};
  std::string tok;
  while (is >> tok) out.push_back(id(tok));
  return out;
}

}  // namespace red::policy
