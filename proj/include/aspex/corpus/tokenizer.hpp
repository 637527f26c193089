// Copyright 2026 The Aspex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aspex/common.hpp"

namespace aspex {

/// Any subword or word tokenizer with begin/end markers.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  virtual std::string decode(std::span<const TokenId> ids) const = 0;
  virtual TokenId bos() const = 0;
  virtual TokenId eos() const = 0;
  virtual TokenId unk() const = 0;
  virtual std::size_t vocab_size() const = 0;
};

/// Lower-cased whitespace tokenizer that also splits off punctuation.
/// Decoding joins tokens with single spaces, so decode(encode(s)) is the
/// normalized form of s.
class WhitespaceTokenizer : public Tokenizer {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kBos = "<bos>";
  static constexpr std::string_view kEos = "<eos>";

  WhitespaceTokenizer() { reset({}); }

  explicit WhitespaceTokenizer(const std::vector<std::string>& vocabulary) { reset(vocabulary); }

  /// Vocabulary sorted by descending frequency then lexicographically.
  template <typename Range>
  static WhitespaceTokenizer fit(const Range& texts, std::size_t min_count = 1) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : texts) {
      for (auto& w : split(t)) ++counts[w];
    }
    std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> vocab;
    for (auto& [w, c] : sorted) {
      if (c >= min_count) vocab.push_back(w);
    }
    return WhitespaceTokenizer(vocab);
  }

  static std::vector<std::string> split(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    };
    for (char ch : s) {
      const auto c = static_cast<unsigned char>(ch);
      if (std::isspace(c)) {
        flush();
      } else if (std::ispunct(c) && ch != '\'' && ch != '-' && ch != '/') {
        flush();
        out.emplace_back(1, ch);
      } else {
        cur.push_back(static_cast<char>(std::tolower(c)));
      }
    }
    flush();
    return out;
  }

  std::vector<TokenId> encode(std::string_view text) const override {
    std::vector<TokenId> ids;
    for (const auto& w : split(text)) {
      auto it = index_.find(w);
      ids.push_back(it == index_.end() ? unk() : it->second);
    }
    return ids;
  }

  std::string decode(std::span<const TokenId> ids) const override {
    std::string out;
    for (TokenId id : ids) {
      if (id == bos() || id == eos()) continue;
      if (!out.empty()) out += ' ';
      out += token(id);
    }
    return out;
  }

  /// Normal form of a text under this tokenizer (unknown words kept verbatim).
  static std::string normalize(std::string_view text) {
    auto words = split(text);
    return text::join(words, " ");
  }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw UnknownId("token id out of range: " + std::to_string(id));
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::optional<TokenId> find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  TokenId unk() const override { return 0; }
  TokenId bos() const override { return 1; }
  TokenId eos() const override { return 2; }
  std::size_t vocab_size() const override { return tokens_.size(); }

  /// Full token list including markers, index = token ID.
  const std::vector<std::string>& tokens() const { return tokens_; }

  static WhitespaceTokenizer from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < 3 || tokens[0] != kUnk || tokens[1] != kBos || tokens[2] != kEos) {
      throw InvalidArgument("token list must start with <unk>, <bos>, <eos>");
    }
    return WhitespaceTokenizer(std::vector<std::string>(tokens.begin() + 3, tokens.end()));
  }

 private:
  void reset(const std::vector<std::string>& vocabulary) {
    tokens_ = {std::string(kUnk), std::string(kBos), std::string(kEos)};
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<TokenId>(i);
    for (const auto& w : vocabulary) {
      if (index_.count(w)) continue;
      index_[w] = static_cast<TokenId>(tokens_.size());
      tokens_.push_back(w);
    }
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace aspex
