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

#include <iterator>
#include <limits>
#include <map>
#include <string>

#include "aspex/common.hpp"

namespace aspex {

struct ElbowResult {
  int k = 0;
  double drop = 0.0;
  bool flat = false;
};

/// K* = argmax over consecutive pairs of (b_K - b_{K+1}); the smallest K wins
/// ties, and drops within `tolerance` count as equal. A curve with no
/// positive drop returns the smallest K and warns.
inline ElbowResult select_elbow_K(const std::map<int, double>& bleu_by_k,
                                  double tolerance = 1e-12) {
  if (bleu_by_k.size() < 3) throw InvalidArgument("elbow rule needs at least 3 K values");
  int prev = bleu_by_k.begin()->first;
  for (auto it = std::next(bleu_by_k.begin()); it != bleu_by_k.end(); ++it) {
    if (it->first != prev + 1) throw InvalidArgument("elbow rule needs consecutive K values");
    prev = it->first;
  }
  ElbowResult best;
  best.k = bleu_by_k.begin()->first;
  best.drop = -std::numeric_limits<double>::infinity();
  for (auto it = bleu_by_k.begin(); std::next(it) != bleu_by_k.end(); ++it) {
    const double drop = it->second - std::next(it)->second;
    if (drop > best.drop + tolerance) {
      best.drop = drop;
      best.k = it->first;
    }
  }
  if (!(best.drop > 0.0)) {
    best.flat = true;
    best.k = bleu_by_k.begin()->first;
    warn("elbow: BLEU curve has no decline; using K=" + std::to_string(best.k));
  }
  return best;
}

}  // namespace aspex
