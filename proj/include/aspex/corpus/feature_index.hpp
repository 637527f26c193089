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

#include <array>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/corpus/inventory.hpp"
#include "aspex/corpus/review.hpp"

namespace aspex {

/// Overly generic or noisy keywords never counted as features.
inline constexpr std::array<std::string_view, 16> kDummyWords = {
    "and", "very", "the", "is", "a",  "an",  "it",   "this",
    "that", "of",  "in",  "that", "are", "were", "was", "food"};

inline constexpr std::size_t kMinFeatureLength = 4;

/// Canonical feature form: lower-cased words joined by single spaces.
inline std::string normalize_feature(std::string_view term) {
  const auto words = text::split_whitespace(text::lower(term));
  return text::join(words, " ");
}

/// True when `term` survives the length and dummy-word filter.
inline bool keep_feature(std::string_view term) {
  const std::string f = normalize_feature(term);
  if (f.size() < kMinFeatureLength) return false;
  for (auto d : kDummyWords) {
    if (f == d) return false;
  }
  return true;
}

/// Item "menus" and category feature sets, built from training reviews only.
struct FeatureIndex {
  std::map<ItemId, std::set<std::string>> per_item;
  std::set<std::string> global;
  std::vector<std::set<std::string>> per_category;
  /// Number of training segments labeled with each category.
  std::vector<std::size_t> category_counts;

  const std::set<std::string>& item_features(ItemId item) const {
    static const std::set<std::string> kEmpty;
    auto it = per_item.find(item);
    return it == per_item.end() ? kEmpty : it->second;
  }

  bool operator==(const FeatureIndex&) const = default;
};

/// `item_of` maps a record's raw item key to its integer ID.
template <typename ItemLookup>
FeatureIndex build_feature_index(const std::vector<ReviewRecord>& train,
                                 const AspectInventory& inventory, ItemLookup&& item_of) {
  FeatureIndex index;
  index.per_category.resize(inventory.size());
  index.category_counts.assign(inventory.size(), 0);
  for (const auto& rec : train) {
    const ItemId item = item_of(rec.item);
    auto& menu = index.per_item[item];
    for (const auto& t : rec.tuples) {
      if (!keep_feature(t.aspect_term)) continue;
      const std::string f = normalize_feature(t.aspect_term);
      menu.insert(f);
      index.global.insert(f);
      if (inventory.contains(t.category)) index.per_category[static_cast<std::size_t>(t.category)].insert(f);
    }
    for (const auto& [cat, seg] : rec.segments) {
      if (inventory.contains(cat)) ++index.category_counts[static_cast<std::size_t>(cat)];
    }
  }
  return index;
}

}  // namespace aspex
