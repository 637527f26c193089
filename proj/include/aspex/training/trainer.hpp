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

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <vector>

#include <json.hpp>

#include "aspex/common.hpp"
#include "aspex/corpus/review.hpp"
#include "aspex/metrics/ranking.hpp"
#include "aspex/model/explainer.hpp"
#include "aspex/model/losses.hpp"
#include "aspex/training/optimizer.hpp"

namespace aspex {

struct TrainConfig {
  double lr = 0.001;
  std::size_t batch_size = 196;
  std::size_t max_len = 20;
  std::size_t stage1_epochs = 30;
  std::size_t stage1_patience = 5;
  std::size_t stage2_epochs = 20;
  std::size_t stage2_patience = 2;
  double alpha = 0.01;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  DBLossConfig db;

  void validate() const {
    if (!(lr > 0)) throw InvalidArgument("learning rate must be > 0");
    if (batch_size == 0) throw InvalidArgument("batch size must be > 0");
    if (stage1_patience >= stage1_epochs) throw InvalidArgument("stage-1 patience must be < epochs");
    if (stage2_patience >= stage2_epochs) throw InvalidArgument("stage-2 patience must be < epochs");
    if (!(alpha >= 0)) throw InvalidArgument("alpha must be >= 0");
  }
};

class TrainingDiverged : public NumericError {
 public:
  using NumericError::NumericError;
};

struct EpochRecord {
  int stage = 1;
  std::size_t epoch = 0;
  double train_gen_loss = 0.0;
  std::optional<double> train_aspect_loss;
  double valid_gen_loss = 0.0;
  std::optional<double> valid_aspect_loss;
  std::optional<double> valid_hit_ratio;
  bool improved = false;

  bool operator==(const EpochRecord&) const = default;
};

inline nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j{{"stage", r.stage},
                   {"epoch", r.epoch},
                   {"train_L_T", r.train_gen_loss},
                   {"valid_L_T", r.valid_gen_loss},
                   {"improved", r.improved}};
  j["train_L_DB"] = r.train_aspect_loss ? nlohmann::json(*r.train_aspect_loss) : nlohmann::json();
  j["valid_L_DB"] = r.valid_aspect_loss ? nlohmann::json(*r.valid_aspect_loss) : nlohmann::json();
  j["valid_HR@3"] = r.valid_hit_ratio ? nlohmann::json(*r.valid_hit_ratio) : nlohmann::json();
  return j;
}

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_value = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
};

/// One representative example per (user, item) pair with the multi-hot
/// union of the pair's categories.
struct PairExample {
  TrainingExample example;
  std::vector<double> labels;
};

/// Collapses examples to one per pair. The representative is the pair's
/// example whose category is most frequent in `examples` (lowest category ID
/// on ties). Output follows first appearance of each pair.
inline std::vector<PairExample> dedup_pairs(std::span<const TrainingExample> examples,
                                            std::size_t n_aspect) {
  std::vector<std::size_t> freq(n_aspect, 0);
  for (const auto& ex : examples) {
    if (ex.category < 0 || static_cast<std::size_t>(ex.category) >= n_aspect) {
      throw UnknownId("category out of range in dedup_pairs");
    }
    ++freq[static_cast<std::size_t>(ex.category)];
  }
  std::map<std::pair<UserId, ItemId>, std::size_t> index;
  std::vector<PairExample> out;
  for (const auto& ex : examples) {
    auto key = std::make_pair(ex.user, ex.item);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      PairExample pe{ex, std::vector<double>(n_aspect, 0.0)};
      pe.labels[static_cast<std::size_t>(ex.category)] = 1.0;
      out.push_back(std::move(pe));
      continue;
    }
    auto& pe = out[it->second];
    pe.labels[static_cast<std::size_t>(ex.category)] = 1.0;
    const auto fc = freq[static_cast<std::size_t>(ex.category)];
    const auto fr = freq[static_cast<std::size_t>(pe.example.category)];
    if (fc > fr || (fc == fr && ex.category < pe.example.category)) pe.example = ex;
  }
  return out;
}

inline Matrix label_matrix(std::span<const PairExample> pairs, std::size_t n_aspect) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(pairs.size()), static_cast<Eigen::Index>(n_aspect));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (std::size_t c = 0; c < n_aspect; ++c) y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = pairs[k].labels[c];
  }
  return y;
}

/// Two-stage schedule: stage 1 fits the generation loss alone; stage 2 adds
/// the aspect-recommendation loss with weight alpha on a one-example-per-pair
/// dataset. Both stages restore the best monitored epoch on exit.
class Trainer {
 public:
  using EpochCallback = std::function<void(const EpochRecord&)>;

  Trainer(ExplainerModel& model, TokenId bos, TokenId eos, TrainConfig config)
      : model_(model), bos_(bos), eos_(eos), config_(std::move(config)) {
    config_.validate();
    config_.db.validate(model_.config().n_aspect);
  }

  void on_epoch(EpochCallback cb) { callback_ = std::move(cb); }

  /// Generation-only training; monitors validation generation loss.
  TrainHistory train_stage1(std::span<const TrainingExample> train,
                            std::span<const TrainingExample> valid) {
    if (valid.empty()) throw InvalidArgument("stage 1 needs a non-empty validation split");
    if (train.empty()) throw InvalidArgument("stage 1 needs training examples");
    check_lengths(train);
    AdamW opt(model_.parameters(), optimizer_options());
    Rng rng = Rng(config_.seed).fork(101);
    EarlyStopping stopper(config_.stage1_patience);
    TrainHistory history;
    std::vector<Matrix> best = model_.snapshot();

    std::vector<std::size_t> order(train.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::vector<TrainingExample> batch;
    for (std::size_t epoch = 1; epoch <= config_.stage1_epochs; ++epoch) {
      rng.shuffle(order);
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
        const std::size_t end = std::min(order.size(), start + config_.batch_size);
        batch.clear();
        for (std::size_t k = start; k < end; ++k) batch.push_back(train[order[k]]);
        opt.zero_grad();
        Graph g;
        Graph::Var loss;
        try {
          loss = model_.generation_loss(g, batch, bos_, eos_);
        } catch (const NumericError& e) {
          throw TrainingDiverged(diagnose(1, epoch, e.what()));
        }
        const double value = g.scalar(loss);
        if (!std::isfinite(value)) throw TrainingDiverged(diagnose(1, epoch, "training L_T", value));
        g.backward(loss);
        if (config_.clip_norm > 0) opt.clip_grad_norm(config_.clip_norm);
        opt.step();
        loss_sum += value * static_cast<double>(batch.size());
      }
      EpochRecord rec;
      rec.stage = 1;
      rec.epoch = epoch;
      rec.train_gen_loss = loss_sum / static_cast<double>(train.size());
      rec.valid_gen_loss = evaluate_generation_loss(valid);
      if (!std::isfinite(rec.valid_gen_loss)) {
        throw TrainingDiverged(diagnose(1, epoch, "validation L_T", rec.valid_gen_loss));
      }
      rec.improved = stopper.update(rec.valid_gen_loss);
      if (rec.improved) best = model_.snapshot();
      history.epochs.push_back(rec);
      if (callback_) callback_(rec);
      if (stopper.should_stop()) {
        history.early_stopped = true;
        break;
      }
    }
    model_.restore(best);
    history.best_epoch = stopper.best_epoch();
    history.best_value = stopper.best();
    return history;
  }

  /// Joint training on L_T + alpha * L_DB; monitors the validation L_DB only.
  /// `valid` is collapsed to one example per pair internally.
  TrainHistory train_stage2(std::span<const PairExample> train,
                            std::span<const TrainingExample> valid) {
    if (valid.empty()) throw InvalidArgument("stage 2 needs a non-empty validation split");
    if (train.empty()) throw InvalidArgument("stage 2 needs training pairs");
    const std::size_t n_aspect = model_.config().n_aspect;
    const Matrix train_labels = label_matrix(train, n_aspect);
    const std::vector<double> counts = class_counts(train_labels);
    const Matrix train_weights = compute_rebalance_weights(train_labels, config_.db, counts);
    const auto valid_pairs = dedup_pairs(valid, n_aspect);
    const Matrix valid_labels = label_matrix(valid_pairs, n_aspect);
    const Matrix valid_weights = compute_rebalance_weights(valid_labels, config_.db, counts);

    AdamW opt(model_.parameters(), optimizer_options());
    Rng rng = Rng(config_.seed).fork(202);
    EarlyStopping stopper(config_.stage2_patience);
    TrainHistory history;
    std::vector<Matrix> best = model_.snapshot();

    std::vector<std::size_t> order(train.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::vector<TrainingExample> batch;
    std::vector<UserId> users;
    std::vector<ItemId> items;
    for (std::size_t epoch = 1; epoch <= config_.stage2_epochs; ++epoch) {
      rng.shuffle(order);
      double gen_sum = 0.0;
      double asp_sum = 0.0;
      for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
        const std::size_t end = std::min(order.size(), start + config_.batch_size);
        const auto rows = static_cast<Eigen::Index>(end - start);
        batch.clear();
        users.clear();
        items.clear();
        Matrix y(rows, static_cast<Eigen::Index>(n_aspect));
        Matrix w(rows, static_cast<Eigen::Index>(n_aspect));
        for (std::size_t k = start; k < end; ++k) {
          const auto& pe = train[order[k]];
          batch.push_back(pe.example);
          users.push_back(pe.example.user);
          items.push_back(pe.example.item);
          y.row(static_cast<Eigen::Index>(k - start)) = train_labels.row(static_cast<Eigen::Index>(order[k]));
          w.row(static_cast<Eigen::Index>(k - start)) = train_weights.row(static_cast<Eigen::Index>(order[k]));
        }
        opt.zero_grad();
        Graph g;
        Graph::Var gen;
        Graph::Var asp;
        try {
          gen = model_.generation_loss(g, batch, bos_, eos_);
          asp = db_loss(g, model_.aspect_logits(g, users, items), y, w, config_.db);
        } catch (const NumericError& e) {
          throw TrainingDiverged(diagnose(2, epoch, e.what()));
        }
        Graph::Var total = g.add(gen, g.scale(asp, config_.alpha));
        const double value = g.scalar(total);
        if (!std::isfinite(value)) throw TrainingDiverged(diagnose(2, epoch, "training loss", value));
        g.backward(total);
        if (config_.clip_norm > 0) opt.clip_grad_norm(config_.clip_norm);
        opt.step();
        gen_sum += g.scalar(gen) * static_cast<double>(batch.size());
        asp_sum += g.scalar(asp) * static_cast<double>(batch.size());
      }
      EpochRecord rec;
      rec.stage = 2;
      rec.epoch = epoch;
      rec.train_gen_loss = gen_sum / static_cast<double>(train.size());
      rec.train_aspect_loss = asp_sum / static_cast<double>(train.size());
      rec.valid_gen_loss = evaluate_generation_loss(valid);
      rec.valid_aspect_loss = evaluate_aspect_loss(valid_pairs, valid_labels, valid_weights);
      rec.valid_hit_ratio = evaluate_hit_ratio(valid_pairs, 3);
      if (!std::isfinite(*rec.valid_aspect_loss)) {
        throw TrainingDiverged(diagnose(2, epoch, "validation L_DB", *rec.valid_aspect_loss));
      }
      rec.improved = stopper.update(*rec.valid_aspect_loss);
      if (rec.improved) best = model_.snapshot();
      history.epochs.push_back(rec);
      if (callback_) callback_(rec);
      if (stopper.should_stop()) {
        history.early_stopped = true;
        break;
      }
    }
    model_.restore(best);
    history.best_epoch = stopper.best_epoch();
    history.best_value = stopper.best();
    return history;
  }

  double evaluate_generation_loss(std::span<const TrainingExample> examples) {
    if (examples.empty()) return 0.0;
    double total = 0.0;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < examples.size(); start += kChunk) {
      const auto chunk = examples.subspan(start, std::min(kChunk, examples.size() - start));
      Graph g(false);
      total += g.scalar(model_.generation_loss(g, chunk, bos_, eos_)) *
               static_cast<double>(chunk.size());
    }
    return total / static_cast<double>(examples.size());
  }

  double evaluate_aspect_loss(std::span<const PairExample> pairs, const Matrix& labels,
                              const Matrix& weights) {
    if (pairs.empty()) return 0.0;
    std::vector<UserId> users;
    std::vector<ItemId> items;
    for (const auto& pe : pairs) {
      users.push_back(pe.example.user);
      items.push_back(pe.example.item);
    }
    Graph g(false);
    return g.scalar(db_loss(g, model_.aspect_logits(g, users, items), labels, weights, config_.db));
  }

  double evaluate_hit_ratio(std::span<const PairExample> pairs, std::size_t k) {
    std::vector<std::vector<CategoryId>> predicted;
    std::vector<std::set<CategoryId>> truth;
    for (const auto& pe : pairs) {
      const auto dist = model_.aspect_scores(pe.example.user, pe.example.item);
      predicted.push_back(top_k_categories(dist.scores, k));
      std::set<CategoryId> t;
      for (std::size_t c = 0; c < pe.labels.size(); ++c) {
        if (pe.labels[c] > 0.5) t.insert(static_cast<CategoryId>(c));
      }
      truth.push_back(std::move(t));
    }
    return aspect_ranking_metrics(predicted, truth, k).hit_ratio;
  }

  const TrainConfig& config() const { return config_; }

 private:
  AdamW::Options optimizer_options() const {
    AdamW::Options o;
    o.lr = config_.lr;
    o.weight_decay = config_.weight_decay;
    return o;
  }

  void check_lengths(std::span<const TrainingExample> examples) const {
    const std::size_t max_positions = model_.decoder().max_positions();
    for (const auto& ex : examples) {
      if (ex.tokens.size() > config_.max_len) {
        throw InvalidArgument("example longer than max_len");
      }
      if (ex.tokens.size() + kPromptLength + 2 > max_positions) {
        throw InvalidArgument("decoder has too few positions for max_len");
      }
    }
  }

  static std::string diagnose(int stage, std::size_t epoch, const char* what) {
    return "stage " + std::to_string(stage) + " diverged at epoch " + std::to_string(epoch) + ": " + what;
  }

  static std::string diagnose(int stage, std::size_t epoch, const char* what, double value) {
    return "stage " + std::to_string(stage) + " diverged at epoch " + std::to_string(epoch) +
           ": " + what + " = " + std::to_string(value);
  }

  ExplainerModel& model_;
  TokenId bos_;
  TokenId eos_;
  TrainConfig config_;
  EpochCallback callback_;
};

}  // namespace aspex
