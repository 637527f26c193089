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

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/model/autograd.hpp"
#include "aspex/model/prompt.hpp"

namespace aspex {

/// Independent per-category sigmoid scores in [0, 1]; they need not sum to 1.
struct AspectDistribution {
  std::vector<double> scores;

  std::size_t size() const { return scores.size(); }
};

/// MLP over the concatenated user and item prompt rows:
///   scores = sigmoid(W_c relu(... relu(W_h [u; i] + b_h) ...) + b_c)
/// Weights are stored out x in.
class AspectHead {
 public:
  AspectHead() = default;

  AspectHead(std::size_t input_width, std::vector<std::size_t> hidden, std::size_t n_aspect,
             Rng& rng)
      : input_width_(input_width), hidden_(std::move(hidden)), n_aspect_(n_aspect) {
    if (n_aspect_ == 0 || input_width_ == 0) throw InvalidArgument("aspect head: empty shape");
    std::size_t in = input_width_;
    std::vector<std::size_t> outs = hidden_;
    outs.push_back(n_aspect_);
    for (std::size_t l = 0; l < outs.size(); ++l) {
      const std::size_t out = outs[l];
      // He-normal initialization.
      const double std = std::sqrt(2.0 / static_cast<double>(in));
      Matrix w(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = rng.normal() * std;
      const std::string p = "head." + std::to_string(l) + ".";
      layers_.push_back(std::make_unique<Layer>(
          Layer{Parameter(p + "weight", std::move(w)),
                Parameter(p + "bias", Matrix::Zero(1, static_cast<Eigen::Index>(out)))}));
      in = out;
    }
  }

  AspectHead(AspectHead&&) = default;
  AspectHead& operator=(AspectHead&&) = default;

  std::size_t n_aspect() const { return n_aspect_; }
  std::size_t input_width() const { return input_width_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  std::size_t depth() const { return layers_.size(); }

  Parameter& weight(std::size_t l) { return layers_.at(l)->weight; }
  Parameter& bias(std::size_t l) { return layers_.at(l)->bias; }
  const Parameter& weight(std::size_t l) const { return layers_.at(l)->weight; }
  const Parameter& bias(std::size_t l) const { return layers_.at(l)->bias; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_) {
      out.push_back(&l->weight);
      out.push_back(&l->bias);
    }
    return out;
  }

  /// Pre-sigmoid logits, one row per input row (B x n_aspect).
  Graph::Var logits(Graph& g, Graph::Var input) {
    if (static_cast<std::size_t>(g.value(input).cols()) != input_width_) {
      throw InvalidArgument("aspect head: input width mismatch");
    }
    Graph::Var x = input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      x = g.add_row(g.matmul_nt(x, g.param(layers_[l]->weight)), g.param(layers_[l]->bias));
      if (l + 1 < layers_.size()) x = g.relu(x);
    }
    return x;
  }

  /// Logits for (user, item) pairs read from the prompt tables.
  Graph::Var logits(Graph& g, PromptTables& tables, std::span<const UserId> users,
                    std::span<const ItemId> items) {
    if (users.size() != items.size() || users.empty()) {
      throw InvalidArgument("aspect head: users/items length mismatch");
    }
    for (std::size_t k = 0; k < users.size(); ++k) tables.check_ids(users[k], items[k]);
    Graph::Var input = g.concat_cols({g.gather_rows(tables.users, users),
                                      g.gather_rows(tables.items, items)});
    return logits(g, input);
  }

  /// Direct dense evaluation, no tape.
  RowVector logits(const RowVector& input) const {
    if (static_cast<std::size_t>(input.cols()) != input_width_) {
      throw InvalidArgument("aspect head: input width mismatch");
    }
    RowVector x = input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      RowVector y = x * layers_[l]->weight.value.transpose() + layers_[l]->bias.value;
      if (l + 1 < layers_.size()) y = y.cwiseMax(0.0);
      x = std::move(y);
    }
    return x;
  }

  AspectDistribution scores(const PromptTables& tables, UserId u, ItemId i) const {
    tables.check_ids(u, i);
    RowVector input(static_cast<Eigen::Index>(input_width_));
    const auto d = tables.users.value.cols();
    if (2 * static_cast<std::size_t>(d) != input_width_) {
      throw InvalidArgument("aspect head: expects [u; i] of width " + std::to_string(input_width_));
    }
    input << tables.users.value.row(u), tables.items.value.row(i);
    const RowVector z = logits(input);
    AspectDistribution out;
    out.scores.resize(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index k = 0; k < z.cols(); ++k) out.scores[static_cast<std::size_t>(k)] = sigmoid(z(k));
    return out;
  }

 private:
  struct Layer {
    Parameter weight;
    Parameter bias;
  };

  std::size_t input_width_ = 0;
  std::vector<std::size_t> hidden_;
  std::size_t n_aspect_ = 0;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace aspex
