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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspex/common.hpp"
#include "aspex/corpus/review.hpp"
#include "aspex/corpus/split.hpp"
#include "aspex/metrics/latent.hpp"
#include "aspex/model/explainer.hpp"

namespace aspex {

enum class PoolScope { kUser, kItem };

inline std::string_view to_string(PoolScope s) { return s == PoolScope::kUser ? "user" : "item"; }

struct PoolEntry {
  std::string text;
  std::string user;
  std::string item;
};

/// Reviews owned by one user or one item, with their encoded vectors.
class ReviewPool {
 public:
  ReviewPool() = default;
  ReviewPool(PoolScope scope, std::string owner, std::vector<PoolEntry> entries, Matrix vectors)
      : scope_(scope), owner_(std::move(owner)), entries_(std::move(entries)),
        vectors_(std::move(vectors)) {
    if (static_cast<std::size_t>(vectors_.rows()) != entries_.size()) {
      throw InvalidArgument("review pool: one vector per entry required");
    }
  }

  PoolScope scope() const { return scope_; }
  const std::string& owner() const { return owner_; }
  const std::vector<PoolEntry>& entries() const { return entries_; }
  const Matrix& vectors() const { return vectors_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  PoolScope scope_ = PoolScope::kItem;
  std::string owner_;
  std::vector<PoolEntry> entries_;
  Matrix vectors_;
};

/// Text -> vector memo for one encoder, persisted as an aspex archive.
class VectorCache {
 public:
  VectorCache(const SentenceEncoder& encoder, std::filesystem::path file = {})
      : encoder_(encoder), file_(std::move(file)) {
    if (!file_.empty() && std::filesystem::exists(file_)) load();
  }

  RowVector get(const std::string& text) {
    auto it = memo_.find(text);
    if (it != memo_.end()) return it->second;
    auto v = encoder_.encode(text);
    if (!v) throw Error("encoder failed on a pool review");
    dirty_ = true;
    return memo_.emplace(text, std::move(*v)).first->second;
  }

  void save() {
    if (file_.empty() || !dirty_) return;
    if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
    std::vector<std::string> texts;
    Matrix all(static_cast<Eigen::Index>(memo_.size()), static_cast<Eigen::Index>(encoder_.dim()));
    Eigen::Index r = 0;
    for (const auto& [t, v] : memo_) {
      texts.push_back(t);
      all.row(r++) = v;
    }
    const nlohmann::json meta{{"format", "aspex-vector-cache"},
                              {"encoder", encoder_.identity()},
                              {"texts", texts}};
    archive::write(file_, meta, {{"vectors", &all}});
    dirty_ = false;
  }

  std::size_t size() const { return memo_.size(); }

 private:
  void load() {
    auto c = archive::read(file_);
    if (c.meta.value("encoder", std::string{}) != encoder_.identity()) {
      warn("vector cache " + file_.string() + " was built by another encoder; ignoring it");
      return;
    }
    const auto texts = c.meta.at("texts").get<std::vector<std::string>>();
    const Matrix& m = c.tensors.at("vectors");
    for (std::size_t k = 0; k < texts.size(); ++k) memo_.emplace(texts[k], m.row(static_cast<Eigen::Index>(k)));
  }

  const SentenceEncoder& encoder_;
  std::filesystem::path file_;
  std::map<std::string, RowVector> memo_;
  bool dirty_ = false;
};

/// Per-user and per-item pools over training reviews.
struct PoolSet {
  std::map<std::string, ReviewPool> users;
  std::map<std::string, ReviewPool> items;

  const ReviewPool& user(const std::string& key) const {
    auto it = users.find(key);
    if (it == users.end()) throw UnknownId("no review pool for user " + key);
    return it->second;
  }
  const ReviewPool& item(const std::string& key) const {
    auto it = items.find(key);
    if (it == items.end()) throw UnknownId("no review pool for item " + key);
    return it->second;
  }
};

inline PoolSet build_pools(const std::vector<ReviewRecord>& train_records, VectorCache& cache) {
  std::map<std::string, std::vector<PoolEntry>> by_user;
  std::map<std::string, std::vector<PoolEntry>> by_item;
  for (const auto& r : train_records) {
    PoolEntry e{r.text, r.user, r.item};
    by_user[r.user].push_back(e);
    by_item[r.item].push_back(std::move(e));
  }
  auto make = [&](PoolScope scope, const std::string& owner, std::vector<PoolEntry> entries) {
    Matrix m;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      RowVector v = cache.get(entries[k].text);
      if (k == 0) m.resize(static_cast<Eigen::Index>(entries.size()), v.cols());
      m.row(static_cast<Eigen::Index>(k)) = v;
    }
    return ReviewPool(scope, owner, std::move(entries), std::move(m));
  };
  PoolSet set;
  for (auto& [u, e] : by_user) set.users.emplace(u, make(PoolScope::kUser, u, std::move(e)));
  for (auto& [i, e] : by_item) set.items.emplace(i, make(PoolScope::kItem, i, std::move(e)));
  cache.save();
  return set;
}

struct Retrieved {
  std::size_t index = 0;
  PoolEntry entry;
  double similarity = 0.0;
};

/// Top-k pool entries by cosine to the encoded query, stable by pool order.
inline std::vector<Retrieved> retrieve_reviews(std::string_view query, const ReviewPool& pool,
                                               std::size_t k, const SentenceEncoder& encoder) {
  if (pool.empty()) throw InvalidArgument("cannot retrieve from an empty pool");
  const auto q = encoder.encode(query);
  if (!q) throw Error("encoder failed on the query");
  std::vector<Retrieved> all;
  all.reserve(pool.size());
  for (std::size_t r = 0; r < pool.size(); ++r) {
    all.push_back({r, pool.entries()[r], cosine(*q, pool.vectors().row(static_cast<Eigen::Index>(r)))});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Retrieved& a, const Retrieved& b) { return a.similarity > b.similarity; });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace aspex
