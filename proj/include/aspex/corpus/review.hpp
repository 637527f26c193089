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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aspex/common.hpp"

namespace aspex {

enum class Sentiment { kPositive, kNegative, kNeutral };

inline std::string_view to_string(Sentiment s) {
  switch (s) {
    case Sentiment::kPositive: return "positive";
    case Sentiment::kNegative: return "negative";
    case Sentiment::kNeutral: return "neutral";
  }
  return "neutral";
}

inline Sentiment parse_sentiment(std::string_view s) {
  const std::string v = text::lower(s);
  if (v == "positive" || v == "pos") return Sentiment::kPositive;
  if (v == "negative" || v == "neg") return Sentiment::kNegative;
  if (v == "neutral" || v == "neu" || v.empty()) return Sentiment::kNeutral;
  throw InvalidArgument("unknown sentiment: " + std::string(s));
}

struct SentimentTuple {
  std::string aspect_term;
  std::string opinion;
  Sentiment sentiment = Sentiment::kNeutral;
  CategoryId category = kUnmapped;

  bool operator==(const SentimentTuple&) const = default;
};

/// A review before segmentation, as read from the input JSON lines.
struct RawReview {
  std::string user;
  std::string item;
  std::string text;
  std::optional<double> rating;
  // Pre-mined tuples; category given by name and resolved against the
  // inventory. Absent means "run the extractor".
  struct Tuple {
    std::string aspect_term;
    std::string opinion;
    std::string sentiment;
    std::string category;
  };
  std::optional<std::vector<Tuple>> tuples;
};

/// A segmented review for one user-item pair.
struct ReviewRecord {
  std::string user;
  std::string item;
  std::string text;
  std::optional<double> rating;
  /// Every mapped tuple mined from the text.
  std::vector<SentimentTuple> tuples;
  /// One selected tuple per category present.
  std::map<CategoryId, SentimentTuple> selected;
  /// Explanation segment per category; a substring of (or equal to) `text`.
  std::map<CategoryId, std::string> segments;
};

/// One generation target E_{u,i,c}, bounded by begin/end markers at training
/// time (markers are not stored in `tokens`).
struct TrainingExample {
  UserId user = 0;
  ItemId item = 0;
  CategoryId category = 0;
  std::vector<TokenId> tokens;
  std::string text;
  std::string feature;

  bool operator==(const TrainingExample&) const = default;
};

}  // namespace aspex
