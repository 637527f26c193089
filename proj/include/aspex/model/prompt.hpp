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

#include <span>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/corpus/review.hpp"
#include "aspex/model/autograd.hpp"
#include "aspex/model/decoder.hpp"

namespace aspex {

/// Learnable prompt rows for users (|U| x d), items (|I| x d) and aspect
/// categories (n_aspect x d). Looking up row k is the product of the table with the
/// one-hot vector of k.
struct PromptTables {
  Parameter users;
  Parameter items;
  Parameter aspects;

  PromptTables() = default;
  PromptTables(std::size_t n_users, std::size_t n_items, std::size_t n_aspect, std::size_t width,
               double init_std, Rng& rng)
      : users("prompt.user", random(n_users, width, init_std, rng)),
        items("prompt.item", random(n_items, width, init_std, rng)),
        aspects("prompt.aspect", random(n_aspect, width, init_std, rng)) {}

  std::size_t width() const { return static_cast<std::size_t>(aspects.value.cols()); }
  std::size_t n_users() const { return static_cast<std::size_t>(users.value.rows()); }
  std::size_t n_items() const { return static_cast<std::size_t>(items.value.rows()); }
  std::size_t n_aspect() const { return static_cast<std::size_t>(aspects.value.rows()); }

  std::vector<Parameter*> parameters() { return {&users, &items, &aspects}; }

  void check_ids(UserId u, ItemId i) const {
    if (u < 0 || static_cast<std::size_t>(u) >= n_users()) {
      throw UnknownId("unknown user id " + std::to_string(u));
    }
    if (i < 0 || static_cast<std::size_t>(i) >= n_items()) {
      throw UnknownId("unknown item id " + std::to_string(i));
    }
  }

 private:
  static Matrix random(std::size_t rows, std::size_t cols, double std, Rng& rng) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal() * std;
    return m;
  }
};

/// Arithmetic mean of the chosen categories' rows, counting repeats.
inline Graph::Var fuse_aspect_signal(Graph& g, PromptTables& tables,
                                     std::span<const CategoryId> chosen) {
  if (chosen.empty()) throw InvalidArgument("fuse_aspect_signal: no categories chosen");
  for (CategoryId c : chosen) {
    if (c < 0 || static_cast<std::size_t>(c) >= tables.n_aspect()) {
      throw UnknownId("unknown category id " + std::to_string(c));
    }
  }
  Graph::Var rows = g.gather_rows(tables.aspects, chosen);
  return chosen.size() == 1 ? rows : g.mean_rows(rows);
}

/// Plain-matrix version of fuse_aspect_signal.
inline RowVector fuse_aspect_signal(const Matrix& aspect_table, std::span<const CategoryId> chosen) {
  if (chosen.empty()) throw InvalidArgument("fuse_aspect_signal: no categories chosen");
  RowVector sum = RowVector::Zero(aspect_table.cols());
  for (CategoryId c : chosen) {
    if (c < 0 || c >= aspect_table.rows()) throw UnknownId("unknown category id " + std::to_string(c));
    sum += aspect_table.row(c);
  }
  return sum / static_cast<double>(chosen.size());
}

/// [u, i, aspect, <bos>, e_1 .. e_n (, <eos>)] as a (4 + n [+1]) x d sequence.
/// Explanation token t (1-based) sits at row 3 + t.
inline Graph::Var assemble_sequence(Graph& g, PromptTables& tables, Backbone& backbone, UserId u,
                                    ItemId i, Graph::Var aspect_signal,
                                    std::span<const TokenId> tokens_with_markers) {
  tables.check_ids(u, i);
  if (static_cast<std::size_t>(g.value(aspect_signal).cols()) != tables.width() ||
      g.value(aspect_signal).rows() != 1) {
    throw InvalidArgument("aspect signal must be a 1 x d row");
  }
  if (tables.width() != backbone.width()) throw InvalidArgument("prompt/backbone width mismatch");
  const int uid[] = {u};
  const int iid[] = {i};
  return g.concat_rows({g.gather_rows(tables.users, uid), g.gather_rows(tables.items, iid),
                        aspect_signal, backbone.embed_tokens(g, tokens_with_markers)});
}

/// Number of prompt positions preceding <bos>.
inline constexpr int kPromptLength = 3;

/// Mean over examples of the mean per-token negative log-likelihood of
/// e_1 .. e_n and <eos>, teacher-forced. The score for the token at row p is
/// read from output row p - 1.
inline Graph::Var generation_loss(Graph& g, std::span<const TrainingExample> batch,
                                  PromptTables& tables, Backbone& backbone, TokenId bos,
                                  TokenId eos) {
  if (batch.empty()) throw InvalidArgument("generation_loss: empty batch");
  std::vector<Graph::Var> losses;
  losses.reserve(batch.size());
  std::vector<TokenId> seq;
  for (const auto& ex : batch) {
    seq.clear();
    seq.push_back(bos);
    seq.insert(seq.end(), ex.tokens.begin(), ex.tokens.end());
    seq.push_back(eos);
    const CategoryId cat[] = {ex.category};
    Graph::Var signal = fuse_aspect_signal(g, tables, cat);
    Graph::Var x = assemble_sequence(g, tables, backbone, ex.user, ex.item, signal, seq);
    Graph::Var logits = backbone.forward(g, x);
    std::vector<std::pair<int, int>> targets;
    targets.reserve(seq.size() - 1);
    for (std::size_t t = 1; t < seq.size(); ++t) {
      const int row = kPromptLength + static_cast<int>(t);
      targets.emplace_back(row - 1, seq[t]);
    }
    losses.push_back(g.nll(logits, targets));
  }
  return g.scale(g.sum(losses), 1.0 / static_cast<double>(batch.size()));
}

}  // namespace aspex
