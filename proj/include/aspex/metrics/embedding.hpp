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
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/corpus/feature_index.hpp"
#include "aspex/corpus/tokenizer.hpp"
#include "aspex/metrics/latent.hpp"
#include "aspex/model/explainer.hpp"

namespace aspex {

struct FeatureVector {
  std::string feature;
  RowVector vector;
};

/// Mean token embedding of each feature. Features with any out-of-vocabulary
/// word are left out.
inline std::vector<FeatureVector> feature_embeddings(const std::set<std::string>& features,
                                                     const WhitespaceTokenizer& tokenizer,
                                                     const Matrix& token_embeddings) {
  std::vector<FeatureVector> out;
  for (const auto& f : features) {
    const auto words = WhitespaceTokenizer::split(f);
    if (words.empty()) continue;
    RowVector sum = RowVector::Zero(token_embeddings.cols());
    bool known = true;
    for (const auto& w : words) {
      auto id = tokenizer.find(w);
      if (!id) {
        known = false;
        break;
      }
      sum += token_embeddings.row(*id);
    }
    if (known) out.push_back({f, sum / static_cast<double>(words.size())});
  }
  return out;
}

struct Neighbor {
  std::string feature;
  double similarity = 0.0;
};

/// Top-k features by cosine to `anchor`; stable by input order on ties.
inline std::vector<Neighbor> nearest_features(const RowVector& anchor,
                                              const std::vector<FeatureVector>& candidates,
                                              std::size_t k = 20) {
  std::vector<Neighbor> all;
  all.reserve(candidates.size());
  for (const auto& c : candidates) all.push_back({c.feature, cosine(anchor, c.vector)});
  std::stable_sort(all.begin(), all.end(),
                   [](const Neighbor& a, const Neighbor& b) { return a.similarity > b.similarity; });
  if (all.size() > k) all.resize(k);
  return all;
}

/// Neighbors of category `c`'s aspect row among the features mined for `c`.
inline std::vector<Neighbor> nearest_features(CategoryId c, const ExplainerModel& model,
                                              const WhitespaceTokenizer& tokenizer,
                                              const FeatureIndex& index, std::size_t k = 20) {
  const Matrix& table = model.tables().aspects.value;
  if (c < 0 || c >= table.rows()) throw UnknownId("unknown category id " + std::to_string(c));
  if (static_cast<std::size_t>(c) >= index.per_category.size()) return {};
  const auto vecs = feature_embeddings(index.per_category[static_cast<std::size_t>(c)], tokenizer,
                                       model.decoder().token_embeddings());
  return nearest_features(table.row(c), vecs, k);
}

/// One TSV row per category prototype and per category feature:
/// name, category, kind, then the vector components.
inline void export_embeddings_tsv(std::ostream& out, const ExplainerModel& model,
                                  const WhitespaceTokenizer& tokenizer, const FeatureIndex& index,
                                  const AspectInventory& inventory) {
  const Matrix& table = model.tables().aspects.value;
  auto row = [&](const std::string& name, const std::string& cat, const char* kind,
                 const RowVector& v) {
    out << name << '\t' << cat << '\t' << kind;
    for (Eigen::Index k = 0; k < v.cols(); ++k) out << '\t' << v(k);
    out << '\n';
  };
  out.precision(9);
  for (std::size_t c = 0; c < inventory.size(); ++c) {
    const std::string& cat = inventory.name(static_cast<CategoryId>(c));
    row(cat, cat, "category", table.row(static_cast<Eigen::Index>(c)));
    if (c >= index.per_category.size()) continue;
    for (const auto& fv : feature_embeddings(index.per_category[c], tokenizer,
                                             model.decoder().token_embeddings())) {
      row(fv.feature, cat, "feature", fv.vector);
    }
  }
}

}  // namespace aspex
