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
#include <span>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/model/autograd.hpp"

namespace aspex {

/// Distribution-balanced loss settings.
///
/// `lambda` scales the negative branch, `nu` is the per-class logit bias
/// (a single value is broadcast to every class) and the smoothing triple
/// maps raw rebalance ratios r to alpha_s + sigmoid(beta_s * (r - mu_s)).
struct DBLossConfig {
  double lambda = 2.0;
  std::vector<double> nu = {0.05};
  double alpha_s = 0.1;
  double beta_s = 10.0;
  double mu_s = 0.2;

  double class_bias(std::size_t cls) const {
    if (nu.empty()) return 0.0;
    return nu.size() == 1 ? nu[0] : nu.at(cls);
  }

  void validate(std::size_t n_aspect) const {
    if (!(lambda > 0.0)) throw InvalidArgument("DB loss: lambda must be > 0");
    if (nu.size() != 1 && nu.size() != n_aspect && !nu.empty()) {
      throw InvalidArgument("DB loss: nu must have 1 or n_aspect entries");
    }
    for (double v : nu) {
      if (!std::isfinite(v)) throw InvalidArgument("DB loss: nu must be finite");
    }
  }
};

/// Positive-label count of every class.
inline std::vector<double> class_counts(const Matrix& labels) {
  std::vector<double> counts(static_cast<std::size_t>(labels.cols()), 0.0);
  for (Eigen::Index k = 0; k < labels.rows(); ++k) {
    for (Eigen::Index i = 0; i < labels.cols(); ++i) {
      if (labels(k, i) > 0.5) counts[static_cast<std::size_t>(i)] += 1.0;
    }
  }
  return counts;
}

/// Raw re-sampling ratio r_i = P^C_i / P^I(x) for one sample, with
/// P^C_i proportional to 1/n_i and P^I(x) proportional to the sum of 1/n_j over
/// the sample's positive classes. Classes with a zero count get r = 0 and add
/// nothing to P^I(x). Returns an empty vector for a sample with no positive
/// label of non-zero count.
inline std::vector<double> rebalance_ratios(std::span<const double> label_row,
                                            std::span<const double> counts) {
  double instance = 0.0;
  for (std::size_t j = 0; j < label_row.size(); ++j) {
    if (label_row[j] > 0.5 && counts[j] > 0.0) instance += 1.0 / counts[j];
  }
  if (instance == 0.0) return {};
  std::vector<double> r(label_row.size(), 0.0);
  for (std::size_t i = 0; i < label_row.size(); ++i) {
    if (counts[i] > 0.0) r[i] = (1.0 / counts[i]) / instance;
  }
  return r;
}

/// Smoothed per-sample, per-class weights r-hat in (alpha_s, alpha_s + 1).
/// `counts` defaults to the positive counts of `labels` itself; pass the
/// training counts when weighting a held-out set.
inline Matrix compute_rebalance_weights(const Matrix& labels, const DBLossConfig& cfg,
                                        std::vector<double> counts = {}) {
  if (counts.empty()) counts = class_counts(labels);
  if (counts.size() != static_cast<std::size_t>(labels.cols())) {
    throw InvalidArgument("rebalance: counts/labels width mismatch");
  }
  Matrix w(labels.rows(), labels.cols());
  std::size_t degenerate = 0;
  std::vector<double> row(static_cast<std::size_t>(labels.cols()));
  for (Eigen::Index k = 0; k < labels.rows(); ++k) {
    for (Eigen::Index i = 0; i < labels.cols(); ++i) row[static_cast<std::size_t>(i)] = labels(k, i);
    const auto r = rebalance_ratios(row, counts);
    if (r.empty()) ++degenerate;
    for (Eigen::Index i = 0; i < labels.cols(); ++i) {
      // A sample without positives falls back to the weight of r = 0.
      const double ri = r.empty() ? 0.0 : r[static_cast<std::size_t>(i)];
      w(k, i) = cfg.alpha_s + sigmoid(cfg.beta_s * (ri - cfg.mu_s));
    }
  }
  if (degenerate) warn(std::to_string(degenerate) + " sample(s) without positive labels weighted uniformly");
  return w;
}

/// Loss for one sample:
///   (1/n) sum_i w_i [ y_i softplus(-d_i) + (1/lambda)(1 - y_i) softplus(lambda d_i) ]
/// with d_i = z_i - nu_i.
inline double db_loss(std::span<const double> logits, std::span<const double> labels,
                      std::span<const double> weights, const DBLossConfig& cfg) {
  const std::size_t n = logits.size();
  if (labels.size() != n || weights.size() != n || n == 0) {
    throw InvalidArgument("db_loss: length mismatch");
  }
  cfg.validate(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double delta = logits[i] - cfg.class_bias(i);
    const double pos = labels[i] * softplus(-delta);
    const double neg = (1.0 - labels[i]) * softplus(cfg.lambda * delta) / cfg.lambda;
    total += weights[i] * (pos + neg);
  }
  return total / static_cast<double>(n);
}

/// d loss / d logits for db_loss.
inline std::vector<double> db_loss_grad(std::span<const double> logits,
                                        std::span<const double> labels,
                                        std::span<const double> weights, const DBLossConfig& cfg) {
  const std::size_t n = logits.size();
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double delta = logits[i] - cfg.class_bias(i);
    const double dpos = -labels[i] * sigmoid(-delta);
    const double dneg = (1.0 - labels[i]) * sigmoid(cfg.lambda * delta);
    g[i] = weights[i] * (dpos + dneg) / static_cast<double>(n);
  }
  return g;
}

/// Batch mean of db_loss over the rows of `logits`.
inline double db_loss(const Matrix& logits, const Matrix& labels, const Matrix& weights,
                      const DBLossConfig& cfg) {
  if (logits.rows() == 0) throw InvalidArgument("db_loss: empty batch");
  double total = 0.0;
  const auto n = static_cast<std::size_t>(logits.cols());
  for (Eigen::Index k = 0; k < logits.rows(); ++k) {
    total += db_loss(std::span(logits.row(k).data(), n), std::span(labels.row(k).data(), n),
                     std::span(weights.row(k).data(), n), cfg);
  }
  return total / static_cast<double>(logits.rows());
}

/// Tape node for the batch-mean distribution-balanced loss.
inline Graph::Var db_loss(Graph& g, Graph::Var logits, const Matrix& labels, const Matrix& weights,
                          const DBLossConfig& cfg) {
  const Matrix& z = g.value(logits);
  if (labels.rows() != z.rows() || labels.cols() != z.cols() || weights.rows() != z.rows() ||
      weights.cols() != z.cols()) {
    throw InvalidArgument("db_loss: shape mismatch");
  }
  const double value = db_loss(z, labels, weights, cfg);
  if (!std::isfinite(value)) throw NumericError("db_loss: non-finite value");
  Matrix local(z.rows(), z.cols());
  const auto n = static_cast<std::size_t>(z.cols());
  for (Eigen::Index k = 0; k < z.rows(); ++k) {
    const auto gk = db_loss_grad(std::span(z.row(k).data(), n), std::span(labels.row(k).data(), n),
                                 std::span(weights.row(k).data(), n), cfg);
    for (std::size_t i = 0; i < n; ++i) {
      local(k, static_cast<Eigen::Index>(i)) = gk[i] / static_cast<double>(z.rows());
    }
  }
  return g.scalar_op(logits, value, std::move(local));
}

}  // namespace aspex
