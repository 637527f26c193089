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
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/corpus/feature_index.hpp"
#include "aspex/corpus/tokenizer.hpp"

namespace aspex {

/// One evaluated (user, item) pair.
struct EvalEntry {
  UserId user = 0;
  ItemId item = 0;
  std::string generated;
  std::vector<std::string> references;
  /// Ground-truth features f_{u,i}, unfiltered.
  std::set<std::string> features;
  std::set<CategoryId> categories;
  /// Ranked category predictions, if the strategy produced any.
  std::vector<CategoryId> predicted;
};

struct EvalCorpus {
  std::vector<EvalEntry> entries;
  FeatureIndex index;
};

/// Shards are merged by concatenation; every metric is recomputed from the
/// merged corpus. Both shards must share one FeatureIndex.
inline EvalCorpus merge_corpora(const EvalCorpus& a, const EvalCorpus& b) {
  if (!(a.index == b.index)) throw InvalidArgument("cannot merge corpora with different indexes");
  EvalCorpus out = a;
  out.entries.insert(out.entries.end(), b.entries.begin(), b.entries.end());
  return out;
}

inline std::vector<std::string> metric_tokens(std::string_view text) {
  return WhitespaceTokenizer::split(text);
}

/// Filtered, normalized features of `raw`.
inline std::set<std::string> filter_features(const std::set<std::string>& raw) {
  std::set<std::string> out;
  for (const auto& f : raw) {
    if (keep_feature(f)) out.insert(normalize_feature(f));
  }
  return out;
}

inline bool mentions_any(std::string_view text, const std::set<std::string>& features) {
  for (const auto& f : features) {
    if (text::contains_word(text, f)) return true;
  }
  return false;
}

struct FeatureMatch {
  double ifmr = 0.0;
  double gt_fmr = 0.0;
};

inline FeatureMatch feature_match_metrics(const EvalCorpus& corpus) {
  FeatureMatch m;
  if (corpus.entries.empty()) return m;
  std::size_t hits = 0;
  std::size_t gt_hits = 0;
  std::size_t empty_menus = 0;
  for (const auto& e : corpus.entries) {
    const auto& menu = corpus.index.item_features(e.item);
    if (menu.empty()) ++empty_menus;
    if (mentions_any(e.generated, menu)) ++hits;
    if (mentions_any(e.generated, filter_features(e.features))) ++gt_hits;
  }
  if (empty_menus) warn(std::to_string(empty_menus) + " pair(s) have an empty item menu");
  const auto n = static_cast<double>(corpus.entries.size());
  m.ifmr = static_cast<double>(hits) / n;
  m.gt_fmr = static_cast<double>(gt_hits) / n;
  return m;
}

struct Coverage {
  double fcr = 0.0;
  double ifcr = 0.0;
  double head_fcr = 0.0;
  double tail_fcr = 0.0;
};

/// Categories with a non-zero training count, most frequent first; lower
/// index wins ties.
inline std::vector<CategoryId> categories_by_frequency(const FeatureIndex& index) {
  std::vector<CategoryId> cats;
  for (std::size_t c = 0; c < index.category_counts.size(); ++c) {
    if (index.category_counts[c] > 0) cats.push_back(static_cast<CategoryId>(c));
  }
  std::stable_sort(cats.begin(), cats.end(), [&](CategoryId a, CategoryId b) {
    return index.category_counts[static_cast<std::size_t>(a)] >
           index.category_counts[static_cast<std::size_t>(b)];
  });
  return cats;
}

inline Coverage coverage_metrics(const EvalCorpus& corpus, std::size_t head_tail = 5) {
  Coverage m;
  std::map<ItemId, std::vector<const EvalEntry*>> by_item;
  for (const auto& e : corpus.entries) by_item[e.item].push_back(&e);

  std::set<std::string> universe;
  for (const auto& [item, _] : by_item) {
    const auto& menu = corpus.index.item_features(item);
    universe.insert(menu.begin(), menu.end());
  }
  std::set<std::string> matched;
  double item_sum = 0.0;
  std::size_t item_n = 0;
  std::size_t skipped = 0;
  for (const auto& [item, entries] : by_item) {
    const auto& menu = corpus.index.item_features(item);
    for (const auto& f : universe) {
      if (matched.count(f)) continue;
      for (const auto* e : entries) {
        if (text::contains_word(e->generated, f)) {
          matched.insert(f);
          break;
        }
      }
    }
    if (menu.empty()) {
      ++skipped;
      continue;
    }
    std::size_t hit = 0;
    for (const auto& f : menu) {
      for (const auto* e : entries) {
        if (text::contains_word(e->generated, f)) {
          ++hit;
          break;
        }
      }
    }
    item_sum += static_cast<double>(hit) / static_cast<double>(menu.size());
    ++item_n;
  }
  if (skipped) warn(std::to_string(skipped) + " item(s) with an empty menu skipped in iFCR");
  if (!universe.empty()) m.fcr = static_cast<double>(matched.size()) / static_cast<double>(universe.size());
  if (item_n) m.ifcr = item_sum / static_cast<double>(item_n);

  const auto ranked = categories_by_frequency(corpus.index);
  auto restricted = [&](std::span<const CategoryId> cats) {
    std::set<std::string> sub;
    for (CategoryId c : cats) {
      for (const auto& f : corpus.index.per_category[static_cast<std::size_t>(c)]) {
        if (universe.count(f)) sub.insert(f);
      }
    }
    if (sub.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& f : sub) hit += matched.count(f);
    return static_cast<double>(hit) / static_cast<double>(sub.size());
  };
  const std::size_t n = std::min(head_tail, ranked.size());
  m.head_fcr = restricted(std::span<const CategoryId>(ranked).first(n));
  m.tail_fcr = restricted(std::span<const CategoryId>(ranked).last(n));
  return m;
}

struct Uniqueness {
  double usr = 0.0;
  double uusr = 0.0;
  double iusr = 0.0;
};

inline Uniqueness uniqueness_metrics(const EvalCorpus& corpus) {
  if (corpus.entries.empty()) throw InvalidArgument("uniqueness metrics need at least one sentence");
  auto ratio = [](const std::vector<const std::string*>& sents) {
    std::set<std::string> distinct;
    for (const auto* s : sents) distinct.insert(*s);
    return static_cast<double>(distinct.size()) / static_cast<double>(sents.size());
  };
  std::vector<const std::string*> all;
  std::map<UserId, std::vector<const std::string*>> by_user;
  std::map<ItemId, std::vector<const std::string*>> by_item;
  for (const auto& e : corpus.entries) {
    all.push_back(&e.generated);
    by_user[e.user].push_back(&e.generated);
    by_item[e.item].push_back(&e.generated);
  }
  Uniqueness m;
  m.usr = ratio(all);
  for (const auto& [_, s] : by_user) m.uusr += ratio(s);
  for (const auto& [_, s] : by_item) m.iusr += ratio(s);
  m.uusr /= static_cast<double>(by_user.size());
  m.iusr /= static_cast<double>(by_item.size());
  return m;
}

using NGram = std::vector<std::string>;

/// Counts of every n-gram inside each sentence (no n-gram crosses sentences).
inline std::map<NGram, std::size_t> ngram_counts(const std::vector<std::vector<std::string>>& sentences,
                                                 std::size_t n) {
  std::map<NGram, std::size_t> counts;
  for (const auto& s : sentences) {
    if (s.size() < n) continue;
    for (std::size_t k = 0; k + n <= s.size(); ++k) {
      ++counts[NGram(s.begin() + static_cast<std::ptrdiff_t>(k),
                     s.begin() + static_cast<std::ptrdiff_t>(k + n))];
    }
  }
  return counts;
}

inline double distinct_n(const std::vector<std::vector<std::string>>& sentences, std::size_t n) {
  const auto counts = ngram_counts(sentences, n);
  std::size_t total = 0;
  for (const auto& [_, c] : counts) total += c;
  if (total == 0) {
    warn("Distinct-" + std::to_string(n) + ": corpus has no " + std::to_string(n) + "-grams");
    return 0.0;
  }
  return static_cast<double>(counts.size()) / static_cast<double>(total);
}

/// Shannon entropy in bits of the corpus n-gram distribution.
inline double entropy_n(const std::vector<std::vector<std::string>>& sentences, std::size_t n = 1) {
  const auto counts = ngram_counts(sentences, n);
  std::size_t total = 0;
  for (const auto& [_, c] : counts) total += c;
  if (total == 0) {
    warn("ENTR: corpus has no " + std::to_string(n) + "-grams");
    return 0.0;
  }
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

struct Diversity {
  double distinct2 = 0.0;
  double distinct3 = 0.0;
  double entr = 0.0;
};

inline Diversity diversity_metrics(const EvalCorpus& corpus, std::size_t entr_n = 1) {
  std::vector<std::vector<std::string>> sents;
  for (const auto& e : corpus.entries) sents.push_back(metric_tokens(e.generated));
  return {distinct_n(sents, 2), distinct_n(sents, 3), entropy_n(sents, entr_n)};
}

/// Corpus BLEU-4 with per-pair multi-reference clipping, uniform weights and
/// the standard brevity penalty. The effective reference length of a pair is
/// the reference length closest to the candidate (shorter wins ties).
/// Returns a fraction in [0, 1].
inline double bleu4_multiref(const std::vector<std::vector<std::string>>& candidates,
                             const std::vector<std::vector<std::vector<std::string>>>& references) {
  if (candidates.size() != references.size()) throw InvalidArgument("BLEU: size mismatch");
  std::array<std::size_t, 4> clipped{};
  std::array<std::size_t, 4> total{};
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
  for (std::size_t p = 0; p < candidates.size(); ++p) {
    const auto& cand = candidates[p];
    const auto& refs = references[p];
    if (refs.empty()) throw InvalidArgument("BLEU: pair without references");
    cand_len += cand.size();
    std::size_t best = refs[0].size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) {
        return len > cand.size() ? len - cand.size() : cand.size() - len;
      };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    ref_len += best;
    for (std::size_t n = 1; n <= 4; ++n) {
      const std::vector<std::vector<std::string>> one{cand};
      const auto cand_counts = ngram_counts(one, n);
      std::map<NGram, std::size_t> max_ref;
      for (const auto& r : refs) {
        const std::vector<std::vector<std::string>> rr{r};
        for (const auto& [g, c] : ngram_counts(rr, n)) max_ref[g] = std::max(max_ref[g], c);
      }
      for (const auto& [g, c] : cand_counts) {
        total[n - 1] += c;
        auto it = max_ref.find(g);
        if (it != max_ref.end()) clipped[n - 1] += std::min(c, it->second);
      }
    }
  }
  double log_p = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (total[n] == 0 || clipped[n] == 0) return 0.0;
    log_p += 0.25 * std::log(static_cast<double>(clipped[n]) / static_cast<double>(total[n]));
  }
  const double bp = cand_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return bp * std::exp(log_p);
}

inline double bleu4_multiref(const EvalCorpus& corpus) {
  std::vector<std::vector<std::string>> cands;
  std::vector<std::vector<std::vector<std::string>>> refs;
  for (const auto& e : corpus.entries) {
    cands.push_back(metric_tokens(e.generated));
    auto& r = refs.emplace_back();
    for (const auto& t : e.references) r.push_back(metric_tokens(t));
  }
  return bleu4_multiref(cands, refs);
}

}  // namespace aspex
