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
#include <optional>
#include <string>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/corpus/tokenizer.hpp"
#include "aspex/model/autograd.hpp"

namespace aspex {

/// Maps a sentence to a fixed-width vector.
class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual std::size_t dim() const = 0;
  /// Stable identifier used to key on-disk vector caches.
  virtual std::string identity() const = 0;
  /// Empty optional when the sentence cannot be encoded.
  virtual std::optional<RowVector> encode(std::string_view text) const = 0;
};

/// Feature-hashing bag of words: each token adds +1 or -1 (sign from a second
/// hash bit) at bucket fnv1a(token) mod dim. Deterministic across platforms.
class HashingEncoder : public SentenceEncoder {
 public:
  explicit HashingEncoder(std::size_t dim = 256) : dim_(dim) {
    if (dim_ == 0) throw InvalidArgument("encoder dimension must be > 0");
  }

  std::size_t dim() const override { return dim_; }
  std::string identity() const override { return "hashing-bow-v1-" + std::to_string(dim_); }

  std::optional<RowVector> encode(std::string_view text) const override {
    RowVector v = RowVector::Zero(static_cast<Eigen::Index>(dim_));
    for (const auto& tok : WhitespaceTokenizer::split(text)) {
      const std::uint64_t h = fnv1a(tok);
      const auto bucket = static_cast<Eigen::Index>(h % dim_);
      v(bucket) += (h >> 63) ? -1.0 : 1.0;
    }
    return v;
  }

 private:
  std::size_t dim_;
};

inline double cosine(const RowVector& a, const RowVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return (na == 0.0 && nb == 0.0) ? 1.0 : 0.0;
  return a.dot(b) / (na * nb);
}

struct LatentMetrics {
  double mse = 0.0;
  double cosine = 0.0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;
};

/// Mean over pairs of the element-wise MSE and of the cosine between the
/// encoded generation and the encoded reference.
inline LatentMetrics latent_metrics(const std::vector<std::string>& generated,
                                    const std::vector<std::string>& references,
                                    const SentenceEncoder& encoder) {
  if (generated.size() != references.size()) throw InvalidArgument("latent metrics: size mismatch");
  LatentMetrics m;
  for (std::size_t k = 0; k < generated.size(); ++k) {
    const auto a = encoder.encode(generated[k]);
    const auto b = encoder.encode(references[k]);
    if (!a || !b || a->cols() != b->cols()) {
      ++m.skipped;
      continue;
    }
    m.mse += (*a - *b).squaredNorm() / static_cast<double>(a->cols());
    m.cosine += cosine(*a, *b);
    ++m.pairs;
  }
  if (m.skipped) warn(std::to_string(m.skipped) + " pair(s) could not be encoded");
  if (m.pairs) {
    m.mse /= static_cast<double>(m.pairs);
    m.cosine /= static_cast<double>(m.pairs);
  }
  return m;
}

}  // namespace aspex
