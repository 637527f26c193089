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
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "aspex/common.hpp"

namespace aspex {

/// Indices of the k largest scores, descending; lower index wins ties.
inline std::vector<CategoryId> top_k_categories(std::span<const double> scores, std::size_t k) {
  std::vector<CategoryId> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](CategoryId a, CategoryId b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

struct RankingMetrics {
  double hit_ratio = 0.0;
  double f1 = 0.0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;
};

/// HR@K: share of pairs whose first K predictions intersect the truth set.
/// F1: mean per-pair F1 between the first-K prediction set and the truth set.
/// Pairs with an empty truth set are skipped.
inline RankingMetrics aspect_ranking_metrics(const std::vector<std::vector<CategoryId>>& predicted,
                                             const std::vector<std::set<CategoryId>>& truth,
                                             std::size_t k = 3) {
  if (k == 0) throw InvalidArgument("aspect_ranking_metrics: K must be >= 1");
  if (predicted.size() != truth.size()) {
    throw InvalidArgument("aspect_ranking_metrics: predicted/truth size mismatch");
  }
  RankingMetrics m;
  double hits = 0.0;
  double f1_sum = 0.0;
  for (std::size_t p = 0; p < predicted.size(); ++p) {
    if (truth[p].empty()) {
      ++m.skipped;
      continue;
    }
    std::set<CategoryId> pred;
    for (std::size_t j = 0; j < predicted[p].size() && pred.size() < k; ++j) {
      pred.insert(predicted[p][j]);
    }
    std::size_t overlap = 0;
    for (CategoryId c : pred) overlap += truth[p].count(c);
    if (overlap > 0) hits += 1.0;
    if (overlap > 0 && !pred.empty()) {
      const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
      const double recall = static_cast<double>(overlap) / static_cast<double>(truth[p].size());
      f1_sum += 2.0 * precision * recall / (precision + recall);
    }
    ++m.pairs;
  }
  if (m.pairs > 0) {
    m.hit_ratio = hits / static_cast<double>(m.pairs);
    m.f1 = f1_sum / static_cast<double>(m.pairs);
  }
  return m;
}

}  // namespace aspex
