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
#include <limits>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/model/autograd.hpp"

namespace aspex {

/// Adam with decoupled weight decay.
class AdamW {
 public:
  struct Options {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW(std::vector<Parameter*> params, Options opt) : params_(std::move(params)), opt_(opt) {
    for (auto* p : params_) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Parameter& p = *params_[k];
      if (p.grad.size() != p.value.size()) continue;
      if (opt_.weight_decay != 0.0) p.value *= 1.0 - opt_.lr * opt_.weight_decay;
      m_[k] = opt_.beta1 * m_[k] + (1.0 - opt_.beta1) * p.grad;
      v_[k] = opt_.beta2 * v_[k] + (1.0 - opt_.beta2) * p.grad.cwiseAbs2();
      p.value.array() -= opt_.lr * (m_[k].array() / bc1) /
                         ((v_[k].array() / bc2).sqrt() + opt_.eps);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  /// Rescales all gradients so their joint L2 norm is at most `max_norm`.
  /// Returns the norm before clipping.
  double clip_grad_norm(double max_norm) {
    double sq = 0.0;
    for (auto* p : params_) {
      if (p->grad.size()) sq += p->grad.squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
      const double s = max_norm / (norm + 1e-12);
      for (auto* p : params_) {
        if (p->grad.size()) p->grad *= s;
      }
    }
    return norm;
  }

  const Options& options() const { return opt_; }
  std::size_t steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  Options opt_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t t_ = 0;
};

/// Tracks the best (lowest) monitored value; signals a stop after
/// `patience` consecutive epochs without improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when `value` is a new best.
  bool update(double value) {
    ++epochs_;
    if (value < best_) {
      best_ = value;
      best_epoch_ = epochs_;
      bad_ = 0;
      return true;
    }
    ++bad_;
    return false;
  }

  bool should_stop() const { return bad_ >= patience_; }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t epochs() const { return epochs_; }

 private:
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t epochs_ = 0;
  std::size_t bad_ = 0;
};

}  // namespace aspex
