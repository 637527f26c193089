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
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/corpus/review.hpp"
#include "aspex/corpus/tokenizer.hpp"

namespace aspex {

/// Bidirectional map between raw string keys and dense integer IDs.
class IdMap {
 public:
  int add(const std::string& key) {
    auto [it, inserted] = index_.emplace(key, static_cast<int>(keys_.size()));
    if (inserted) keys_.push_back(key);
    return it->second;
  }
  int at(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw UnknownId("unknown id: " + key);
    return it->second;
  }
  bool contains(const std::string& key) const { return index_.count(key) != 0; }
  const std::string& key(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= keys_.size()) {
      throw UnknownId("id out of range: " + std::to_string(id));
    }
    return keys_[static_cast<std::size_t>(id)];
  }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

  static IdMap from_keys(const std::vector<std::string>& keys) {
    IdMap m;
    for (const auto& k : keys) m.add(k);
    return m;
  }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, int> index_;
};

struct PruneStats {
  std::size_t passes = 0;
  std::size_t pairs_before = 0;
  std::size_t pairs_after = 0;
  std::size_t users_before = 0;
  std::size_t users_after = 0;
  std::size_t items_before = 0;
  std::size_t items_after = 0;
};

/// Repeatedly drops users and items with fewer than `min_interactions`
/// distinct user-item pairs until nothing changes.
inline std::vector<ReviewRecord> prune_interactions(std::vector<ReviewRecord> records,
                                                    std::size_t min_interactions,
                                                    PruneStats* stats = nullptr) {
  auto count = [](const std::vector<ReviewRecord>& recs) {
    std::map<std::string, std::set<std::string>> by_user;
    std::map<std::string, std::set<std::string>> by_item;
    for (const auto& r : recs) {
      by_user[r.user].insert(r.item);
      by_item[r.item].insert(r.user);
    }
    return std::make_pair(by_user, by_item);
  };
  PruneStats local;
  {
    auto [u, i] = count(records);
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& r : records) pairs.emplace(r.user, r.item);
    local.pairs_before = pairs.size();
    local.users_before = u.size();
    local.items_before = i.size();
  }
  for (;;) {
    auto [by_user, by_item] = count(records);
    std::vector<ReviewRecord> kept;
    kept.reserve(records.size());
    for (auto& r : records) {
      if (by_user[r.user].size() >= min_interactions && by_item[r.item].size() >= min_interactions) {
        kept.push_back(std::move(r));
      }
    }
    ++local.passes;
    const bool changed = kept.size() != records.size();
    records = std::move(kept);
    if (!changed) break;
  }
  {
    auto [u, i] = count(records);
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& r : records) pairs.emplace(r.user, r.item);
    local.pairs_after = pairs.size();
    local.users_after = u.size();
    local.items_after = i.size();
  }
  if (stats) *stats = local;
  return records;
}

struct SplitOptions {
  std::size_t min_interactions = 20;
  double train_ratio = 0.8;
  double valid_ratio = 0.1;
  double test_ratio = 0.1;
  int folds = 5;
  std::uint64_t seed = 0;
  std::size_t max_len = 20;
};

/// One fold: records per split plus the derived training examples.
struct SplitDataset {
  int fold = 0;
  std::uint64_t seed = 0;
  IdMap users;
  IdMap items;
  std::vector<ReviewRecord> train_records;
  std::vector<ReviewRecord> valid_records;
  std::vector<ReviewRecord> test_records;
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> valid;
  std::vector<TrainingExample> test;
  std::map<UserId, std::set<CategoryId>> user_history;
  std::map<ItemId, std::set<CategoryId>> item_history;
  PruneStats prune;
};

/// Examples for every segment of `records`, tokenized and truncated to
/// `max_len` tokens (markers excluded).
inline std::vector<TrainingExample> make_examples(const std::vector<ReviewRecord>& records,
                                                  const IdMap& users, const IdMap& items,
                                                  const Tokenizer& tokenizer, std::size_t max_len) {
  std::vector<TrainingExample> out;
  for (const auto& r : records) {
    for (const auto& [cat, seg] : r.segments) {
      TrainingExample ex;
      ex.user = users.at(r.user);
      ex.item = items.at(r.item);
      ex.category = cat;
      ex.tokens = tokenizer.encode(seg);
      if (ex.tokens.size() > max_len) ex.tokens.resize(max_len);
      ex.text = seg;
      if (auto it = r.selected.find(cat); it != r.selected.end()) ex.feature = it->second.aspect_term;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

/// Splits pairs so that every held-out user and item keeps at least one
/// training pair. Returns the index lists {train, valid, test} into `pairs`.
inline std::array<std::vector<std::size_t>, 3> warm_start_split(
    const std::vector<std::pair<std::string, std::string>>& pairs, const SplitOptions& opt,
    Rng& rng) {
  const double total_ratio = opt.train_ratio + opt.valid_ratio + opt.test_ratio;
  if (!(opt.train_ratio > 0) || opt.valid_ratio < 0 || opt.test_ratio < 0 || !(total_ratio > 0)) {
    throw InvalidArgument("invalid split ratios");
  }
  const std::size_t n = pairs.size();
  const auto n_valid = static_cast<std::size_t>(std::llround(n * opt.valid_ratio / total_ratio));
  const auto n_test = static_cast<std::size_t>(std::llround(n * opt.test_ratio / total_ratio));

  std::map<std::string, std::size_t> user_deg;
  std::map<std::string, std::size_t> item_deg;
  for (const auto& [u, i] : pairs) {
    ++user_deg[u];
    ++item_deg[i];
  }
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  rng.shuffle(order);

  std::array<std::vector<std::size_t>, 3> out;
  for (std::size_t k : order) {
    const auto& [u, i] = pairs[k];
    const bool want_valid = out[1].size() < n_valid;
    const bool want_test = !want_valid && out[2].size() < n_test;
    if ((want_valid || want_test) && user_deg[u] > 1 && item_deg[i] > 1) {
      --user_deg[u];
      --item_deg[i];
      out[want_valid ? 1 : 2].push_back(k);
    } else {
      out[0].push_back(k);
    }
  }
  if (out[1].size() < n_valid || out[2].size() < n_test) {
    throw InvalidArgument("warm-start split impossible: too few interactions per user/item");
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

/// Prunes the interaction graph, then builds `folds` independent random
/// warm-start splits by user-item pair. Examples are tokenized with a
/// tokenizer fitted on each fold's training segments.
inline std::vector<SplitDataset> prune_and_split(std::vector<ReviewRecord> records,
                                                 const SplitOptions& opt) {
  if (opt.folds < 1) throw InvalidArgument("folds must be >= 1");
  PruneStats stats;
  records = prune_interactions(std::move(records), opt.min_interactions, &stats);
  if (records.empty()) throw InvalidArgument("pruned interaction graph is empty");

  // One record per pair (merge_pairs runs upstream); later duplicates are ignored.
  std::vector<std::pair<std::string, std::string>> pairs;
  std::map<std::pair<std::string, std::string>, std::size_t> pair_index;
  std::vector<const ReviewRecord*> by_pair;
  for (const auto& r : records) {
    auto key = std::make_pair(r.user, r.item);
    if (pair_index.emplace(key, pairs.size()).second) {
      pairs.push_back(key);
      by_pair.push_back(&r);
    }
  }

  IdMap users;
  IdMap items;
  for (const auto& [u, i] : pairs) {
    users.add(u);
    items.add(i);
  }

  Rng root(opt.seed);
  std::vector<SplitDataset> folds;
  for (int f = 0; f < opt.folds; ++f) {
    SplitDataset ds;
    ds.fold = f;
    ds.seed = opt.seed;
    ds.users = users;
    ds.items = items;
    ds.prune = stats;
    Rng rng = root.fork(static_cast<std::uint64_t>(f));
    auto parts = warm_start_split(pairs, opt, rng);
    for (std::size_t k : parts[0]) ds.train_records.push_back(*by_pair[k]);
    for (std::size_t k : parts[1]) ds.valid_records.push_back(*by_pair[k]);
    for (std::size_t k : parts[2]) ds.test_records.push_back(*by_pair[k]);

    std::vector<std::string> train_text;
    for (const auto& r : ds.train_records) {
      for (const auto& [c, s] : r.segments) train_text.push_back(s);
    }
    const auto tokenizer = WhitespaceTokenizer::fit(train_text);
    ds.train = make_examples(ds.train_records, users, items, tokenizer, opt.max_len);
    ds.valid = make_examples(ds.valid_records, users, items, tokenizer, opt.max_len);
    ds.test = make_examples(ds.test_records, users, items, tokenizer, opt.max_len);
    for (const auto& ex : ds.train) {
      ds.user_history[ex.user].insert(ex.category);
      ds.item_history[ex.item].insert(ex.category);
    }
    folds.push_back(std::move(ds));
  }
  return folds;
}

/// Rebuilds the training tokenizer of a fold from its training segments.
inline WhitespaceTokenizer fit_fold_tokenizer(const SplitDataset& ds) {
  std::vector<std::string> train_text;
  for (const auto& r : ds.train_records) {
    for (const auto& [c, s] : r.segments) train_text.push_back(s);
  }
  return WhitespaceTokenizer::fit(train_text);
}

}  // namespace aspex
