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
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/metrics/ranking.hpp"
#include "aspex/model/aspect_head.hpp"
#include "aspex/model/explainer.hpp"

namespace aspex {

enum class Strategy { kSupervised, kHeuristic, kGroundTruth };

inline std::string to_string(Strategy s, std::size_t k) {
  switch (s) {
    case Strategy::kSupervised:
      return "Supervised@" + std::to_string(k);
    case Strategy::kHeuristic:
      return "Heuristic@" + std::to_string(k);
    case Strategy::kGroundTruth:
      return "GT@1";
  }
  return "unknown";
}

/// Accepts "supervised", "heuristic", "gt" (any case).
inline Strategy parse_strategy(std::string_view s) {
  const std::string v = text::lower(s);
  if (v == "supervised") return Strategy::kSupervised;
  if (v == "heuristic") return Strategy::kHeuristic;
  if (v == "gt" || v == "ground-truth" || v == "groundtruth") return Strategy::kGroundTruth;
  throw InvalidArgument("unknown strategy '" + std::string(s) + "'");
}

/// Source of per-category scores for a (user, item) pair.
class AspectScorer {
 public:
  virtual ~AspectScorer() = default;
  virtual AspectDistribution aspect_scores(UserId u, ItemId i) const = 0;
  virtual std::size_t n_aspect() const = 0;
};

class ModelScorer : public AspectScorer {
 public:
  explicit ModelScorer(const ExplainerModel& model) : model_(model) {}
  AspectDistribution aspect_scores(UserId u, ItemId i) const override {
    return model_.aspect_scores(u, i);
  }
  std::size_t n_aspect() const override { return model_.config().n_aspect; }

 private:
  const ExplainerModel& model_;
};

/// Category histories observed in the training split.
struct AspectHistories {
  std::map<UserId, std::set<CategoryId>> user;
  std::map<ItemId, std::set<CategoryId>> item;
};

struct AspectSelection {
  Strategy strategy = Strategy::kSupervised;
  /// Chosen categories in draw order, repeats kept.
  std::vector<CategoryId> chosen;
  /// Candidate categories and the sampling weight of each.
  std::vector<CategoryId> candidates;
  std::vector<double> weights;
  /// Candidates ranked by score (Supervised only), for ranking metrics.
  std::vector<CategoryId> ranked;
};

inline constexpr std::size_t kTrimTop = 5;
inline constexpr std::size_t kMaxAspects = 5;

/// Keeps the `top` highest scores (lower index wins ties) and renormalizes
/// them to sum to 1.
inline std::pair<std::vector<CategoryId>, std::vector<double>> trimmed_weights(
    std::span<const double> scores, std::size_t top = kTrimTop) {
  std::vector<CategoryId> keep = top_k_categories(scores, top);
  std::vector<double> w;
  double total = 0.0;
  for (CategoryId c : keep) {
    const double s = std::max(0.0, scores[static_cast<std::size_t>(c)]);
    w.push_back(s);
    total += s;
  }
  if (!(total > 0.0)) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
  } else {
    for (double& x : w) x /= total;
  }
  return {std::move(keep), std::move(w)};
}

/// Supervised@K draw from already-computed scores: K draws with replacement
/// from the renormalized top-5.
inline AspectSelection sample_supervised(std::span<const double> scores, std::size_t k, Rng& rng) {
  if (k < 1 || k > kMaxAspects) throw InvalidArgument("Supervised@K needs 1 <= K <= 5");
  if (scores.empty()) throw InvalidArgument("empty aspect distribution");
  AspectSelection sel;
  sel.strategy = Strategy::kSupervised;
  auto [cands, w] = trimmed_weights(scores);
  sel.candidates = cands;
  sel.weights = w;
  sel.ranked = std::move(cands);
  for (std::size_t n = 0; n < k; ++n) sel.chosen.push_back(sel.candidates[rng.weighted(sel.weights)]);
  return sel;
}

/// Heuristic@K: K distinct draws from user-history ∩ item-history, or from the
/// item history alone when the intersection has fewer than K categories.
inline AspectSelection sample_heuristic(UserId u, ItemId i, std::size_t k,
                                        const AspectHistories& histories, Rng& rng) {
  if (k < 1) throw InvalidArgument("Heuristic@K needs K >= 1");
  auto it_item = histories.item.find(i);
  if (it_item == histories.item.end() || it_item->second.empty()) {
    throw InvalidArgument("Heuristic: item " + std::to_string(i) + " has no category history");
  }
  const std::set<CategoryId>& item_hist = it_item->second;
  std::vector<CategoryId> pool;
  if (auto it_user = histories.user.find(u); it_user != histories.user.end()) {
    std::set_intersection(it_user->second.begin(), it_user->second.end(), item_hist.begin(),
                          item_hist.end(), std::back_inserter(pool));
  }
  if (pool.size() < k) pool.assign(item_hist.begin(), item_hist.end());
  AspectSelection sel;
  sel.strategy = Strategy::kHeuristic;
  sel.candidates = pool;
  sel.weights.assign(pool.size(), 1.0 / static_cast<double>(pool.size()));
  rng.shuffle(pool);
  pool.resize(std::min(k, pool.size()));
  sel.chosen = std::move(pool);
  return sel;
}

/// Runs one of the three strategies. `scorer` is consulted only by
/// Supervised; `histories` only by Heuristic; `gt` only by GT@1.
inline AspectSelection recommend_aspects(UserId u, ItemId i, std::size_t k, Strategy strategy,
                                         const AspectScorer* scorer,
                                         const AspectHistories* histories,
                                         std::optional<CategoryId> gt, Rng& rng) {
  switch (strategy) {
    case Strategy::kSupervised: {
      if (!scorer) throw InvalidArgument("Supervised needs a trained aspect head");
      const AspectDistribution d = scorer->aspect_scores(u, i);
      return sample_supervised(d.scores, k, rng);
    }
    case Strategy::kHeuristic:
      if (!histories) throw InvalidArgument("Heuristic needs training histories");
      return sample_heuristic(u, i, k, *histories, rng);
    case Strategy::kGroundTruth: {
      if (!gt) throw InvalidArgument("GT@1 needs a ground-truth category");
      AspectSelection sel;
      sel.strategy = Strategy::kGroundTruth;
      sel.chosen = {*gt};
      sel.candidates = {*gt};
      sel.weights = {1.0};
      return sel;
    }
  }
  throw InvalidArgument("unknown strategy");
}

}  // namespace aspex
