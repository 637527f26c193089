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

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "aspex/model/losses.hpp"

namespace aspex {
namespace {

TEST(DbLoss, ZeroMarginPositiveIsLog2) {
  DBLossConfig cfg;
  cfg.nu = {0.05};
  const std::vector<double> z = {0.05}, y = {1.0}, w = {1.0};
  EXPECT_NEAR(db_loss(z, y, w, cfg), std::numbers::ln2, 1e-12);
}

TEST(DbLoss, ZeroMarginNegativeIsLog2OverLambda) {
  for (double lambda : {0.5, 2.0, 5.0}) {
    DBLossConfig cfg;
    cfg.lambda = lambda;
    cfg.nu = {0.05};
    const std::vector<double> z = {0.05}, y = {0.0}, w = {1.0};
    EXPECT_NEAR(db_loss(z, y, w, cfg), std::numbers::ln2 / lambda, 1e-12);
  }
}

TEST(DbLoss, TwoClassHandValue) {
  // Frozen from an independent scalar evaluation of the two branch terms.
  DBLossConfig cfg;
  const std::vector<double> z = {2.0, -1.0}, y = {1.0, 0.0}, w = {1.0, 1.0};
  EXPECT_NEAR(db_loss(z, y, w, cfg), 0.09539041833137236, 1e-12);
}

TEST(DbLoss, LargeMarginsStayFinite) {
  DBLossConfig cfg;
  const std::vector<double> z = {800.0, -800.0}, y = {0.0, 1.0}, w = {1.0, 1.0};
  const double v = db_loss(z, y, w, cfg);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, ((800.0 - 0.05) * 2.0 / 2.0 + (800.0 + 0.05)) / 2.0, 1e-9);
}

TEST(DbLoss, PerClassBias) {
  DBLossConfig cfg;
  cfg.nu = {0.0, 1.0};
  const std::vector<double> z = {0.0, 1.0}, y = {1.0, 0.0}, w = {1.0, 1.0};
  EXPECT_NEAR(db_loss(z, y, w, cfg), (std::numbers::ln2 + std::numbers::ln2 / 2.0) / 2.0, 1e-12);
}

TEST(DbLoss, RejectsBadConfig) {
  DBLossConfig cfg;
  cfg.lambda = 0.0;
  EXPECT_THROW(cfg.validate(3), InvalidArgument);
  cfg.lambda = 2.0;
  cfg.nu = {0.1, 0.2};
  EXPECT_THROW(cfg.validate(3), InvalidArgument);
}

TEST(DbLoss, GradientMatchesFiniteDifference) {
  DBLossConfig cfg;
  const std::vector<double> y = {1.0, 0.0, 1.0}, w = {0.7, 1.1, 0.3};
  std::vector<double> z = {0.4, -1.2, 2.5};
  const auto g = db_loss_grad(z, y, w, cfg);
  for (std::size_t i = 0; i < z.size(); ++i) {
    auto zp = z, zm = z;
    zp[i] += 1e-6;
    zm[i] -= 1e-6;
    const double numeric = (db_loss(zp, y, w, cfg) - db_loss(zm, y, w, cfg)) / 2e-6;
    EXPECT_NEAR(g[i], numeric, 1e-8);
  }
}

TEST(Rebalance, FrozenWeights) {
  // Oracle: r_i = (1/n_i) / sum_{positive j} (1/n_j), r-hat = 0.1 + sigmoid(10 (r - 0.2)).
  Matrix y(3, 3);
  y << 1, 0, 1, 1, 0, 0, 0, 1, 1;
  const Matrix w = compute_rebalance_weights(y, DBLossConfig{});
  Matrix want(3, 3);
  want << 1.0525741268224333, 1.0996646498695337, 1.0525741268224333,  //
      1.0996646498695337, 1.0999999847700206, 1.0996646498695337,      //
      0.891391472673955, 1.0906840406549334, 0.891391472673955;
  EXPECT_LT((w - want).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Rebalance, SampleWithoutPositivesUsesZeroRatioWeight) {
  Matrix y(2, 2);
  y << 1, 0, 0, 0;
  const Matrix w = compute_rebalance_weights(y, DBLossConfig{});
  EXPECT_NEAR(w(1, 0), 0.21920292202211755, 1e-12);
  EXPECT_NEAR(w(1, 1), 0.21920292202211755, 1e-12);
}

TEST(Rebalance, ZeroCountClassGetsZeroRatio) {
  Matrix y(2, 3);
  y << 1, 0, 0, 1, 1, 0;
  const Matrix w = compute_rebalance_weights(y, DBLossConfig{});
  EXPECT_NEAR(w(0, 2), 0.21920292202211755, 1e-12);
}

TEST(Rebalance, HeldOutUsesTrainingCounts) {
  Matrix train(4, 2);
  train << 1, 0, 1, 0, 1, 0, 0, 1;
  Matrix held(1, 2);
  held << 1, 1;
  const auto counts = class_counts(train);
  ASSERT_EQ(counts, (std::vector<double>{3.0, 1.0}));
  const Matrix w = compute_rebalance_weights(held, DBLossConfig{}, counts);
  // r = (1/3, 1) / (1/3 + 1) = (0.25, 0.75)
  auto smooth = [](double r) { return 0.1 + 1.0 / (1.0 + std::exp(-10.0 * (r - 0.2))); };
  EXPECT_NEAR(w(0, 0), smooth(0.25), 1e-12);
  EXPECT_NEAR(w(0, 1), smooth(0.75), 1e-12);
}

TEST(DbLoss, BatchIsMeanOfRows) {
  DBLossConfig cfg;
  Matrix z(2, 2), y(2, 2), w(2, 2);
  z << 0.3, -0.2, 1.5, 0.1;
  y << 1, 0, 0, 1;
  w << 1, 0.5, 0.8, 1.2;
  const double r0 = db_loss(std::vector<double>{0.3, -0.2}, std::vector<double>{1, 0},
                            std::vector<double>{1, 0.5}, cfg);
  const double r1 = db_loss(std::vector<double>{1.5, 0.1}, std::vector<double>{0, 1},
                            std::vector<double>{0.8, 1.2}, cfg);
  EXPECT_NEAR(db_loss(z, y, w, cfg), (r0 + r1) / 2.0, 1e-14);
}

}  // namespace
}  // namespace aspex
