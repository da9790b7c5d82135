// Copyright 2026 The RED Trainer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace red {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace red

namespace red::policy {

using Token = std::size_t;

/// Dense token table. Ids are positions in `tokens`.
class Vocab {
 public:
  Vocab(std::vector<std::string> tokens, std::string_view bos, std::string_view eos,
        std::string_view pad);

  std::size_t size() const { return tokens_.size(); }
  Token bos() const { return bos_; }
  Token eos() const { return eos_; }
  Token pad() const { return pad_; }

  const std::string& text(Token t) const;
  std::optional<Token> find(std::string_view text) const;
  /// Throws DataError for unknown text.
  Token id(std::string_view text) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Content hash over the ordered token list and reserved ids.
  std::uint64_t hash() const;

  std::string render(const std::vector<Token>& seq, std::string_view sep = " ") const;
  std::vector<Token> parse(std::string_view text) const;  // whitespace-separated

 private:
  std::vector<std::string> tokens_;
  Token bos_ = 0, eos_ = 0, pad_ = 0;
};

}  // namespace red::policy
