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

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aspex/common.hpp"

namespace aspex {

/// Fixed, ordered list of aspect categories. A category's position is its ID.
class AspectInventory {
 public:
  AspectInventory() = default;

  explicit AspectInventory(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2) {
      throw InvalidArgument("aspect inventory needs at least two categories");
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw InvalidArgument("empty category name");
      auto [it, inserted] = index_.emplace(text::lower(names_[i]), static_cast<CategoryId>(i));
      if (!inserted) throw InvalidArgument("duplicate category name: " + names_[i]);
    }
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  const std::string& name(CategoryId id) const {
    if (!contains(id)) throw UnknownId("category id out of range: " + std::to_string(id));
    return names_[static_cast<std::size_t>(id)];
  }

  bool contains(CategoryId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < names_.size();
  }

  /// Case-insensitive lookup by name.
  std::optional<CategoryId> find(std::string_view name) const {
    auto it = index_.find(text::lower(text::trim(name)));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  CategoryId require(std::string_view name) const {
    auto id = find(name);
    if (!id) throw UnknownId("unknown category: " + std::string(name));
    return *id;
  }

  bool operator==(const AspectInventory& other) const { return names_ == other.names_; }

  static AspectInventory yelp19() {
    return AspectInventory({"American Cuisine", "Asian Cuisine", "Barbecue and Steakhouses",
                            "Bars", "Breakfast and Cafes", "Chinese Cuisine",
                            "Comfort Food and Diners", "European Cuisine",
                            "Gluten-Free, Vegan, Vegetarian", "Greek and Mediterranean Cuisine",
                            "Japanese and Sushi", "Korean Cuisine", "Latin American Cuisine",
                            "Live/Raw Food and Salad", "Middle Eastern Cuisine", "Seafood",
                            "location", "service"});
  }

  static AspectInventory yelp23() {
    return AspectInventory(
        {"African Cuisine", "American Cuisine", "Asian Cuisine", "Barbecue and Steakhouses",
         "Breakfast and Cafes", "Burmese and Mongolian Cuisine", "Chinese Cuisine",
         "Comfort Food and Diners", "European Cuisine", "Food Court and Stands",
         "Gastropubs and Modern European", "Gluten-Free, Vegan, Vegetarian",
         "Greek and Mediterranean Cuisine", "Halal and Kosher", "Hot Pot", "Japanese and Sushi",
         "Korean Cuisine", "Latin American Cuisine", "Live/Raw Food and Salad",
         "Middle Eastern Cuisine", "Seafood", "South Asian Cuisine", "Southeast Asian Cuisine",
         "Tapas Bars", "ambience", "location", "miscellaneous", "service"});
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, CategoryId> index_;
};

}  // namespace aspex
