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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/corpus/inventory.hpp"
#include "aspex/corpus/review.hpp"

namespace aspex {

/// Raised by an extractor or classifier backend for a single review/term.
/// The pipeline treats it as recoverable: the review is skipped and counted.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Mines (aspect term, opinion, sentiment[, category]) tuples from text.
/// Tuples may leave `category` as kUnmapped; the classifier fills it in.
class TupleExtractor {
 public:
  virtual ~TupleExtractor() = default;
  virtual std::vector<SentimentTuple> extract(std::string_view review_text) = 0;
};

/// Scores an aspect term against every category of the inventory.
/// std::nullopt means the classifier abstains.
class CategoryClassifier {
 public:
  virtual ~CategoryClassifier() = default;
  virtual std::optional<std::vector<double>> score(std::string_view aspect_term,
                                                   const AspectInventory& inventory) = 0;
};

/// Deterministic lexicon matcher standing in for a trained extractor.
///
/// Aspect terms are matched case-insensitively on word boundaries, longest
/// term first, and never overlap. The opinion is the nearest opinion-lexicon
/// word in the same sentence, preferring the words just before the term.
class LexiconExtractor : public TupleExtractor {
 public:
  struct Entry {
    CategoryId category = kUnmapped;
    Sentiment sentiment = Sentiment::kNeutral;
  };

  LexiconExtractor() = default;
  LexiconExtractor(std::map<std::string, Entry> terms, std::map<std::string, Sentiment> opinions)
      : opinions_(std::move(opinions)) {
    for (auto& [term, entry] : terms) terms_.emplace_back(text::lower(term), entry);
    std::stable_sort(terms_.begin(), terms_.end(), [](const auto& a, const auto& b) {
      return a.first.size() > b.first.size();
    });
    std::map<std::string, Sentiment> lowered;
    for (auto& [w, s] : opinions_) lowered.emplace(text::lower(w), s);
    opinions_ = std::move(lowered);
  }

  void add_term(std::string term, Entry entry) {
    terms_.emplace_back(text::lower(term), entry);
    std::stable_sort(terms_.begin(), terms_.end(), [](const auto& a, const auto& b) {
      return a.first.size() > b.first.size();
    });
  }
  void add_opinion(std::string word, Sentiment s) { opinions_[text::lower(word)] = s; }

  std::vector<SentimentTuple> extract(std::string_view review_text) override {
    const std::string lowered = text::lower(review_text);
    struct Match {
      std::size_t begin;
      std::size_t end;
      const std::pair<std::string, Entry>* entry;
    };
    std::vector<Match> matches;
    for (const auto& term : terms_) {
      std::size_t from = 0;
      while (from < lowered.size()) {
        const std::size_t pos = text::find_word(std::string_view(lowered).substr(from), term.first);
        if (pos == std::string::npos) break;
        const std::size_t begin = from + pos;
        const std::size_t end = begin + term.first.size();
        const bool overlaps = std::any_of(matches.begin(), matches.end(), [&](const Match& m) {
          return begin < m.end && m.begin < end;
        });
        if (!overlaps) matches.push_back({begin, end, &term});
        from = end;
      }
    }
    std::sort(matches.begin(), matches.end(),
              [](const Match& a, const Match& b) { return a.begin < b.begin; });

    std::vector<SentimentTuple> out;
    out.reserve(matches.size());
    for (const auto& m : matches) {
      SentimentTuple t;
      t.aspect_term = std::string(review_text.substr(m.begin, m.end - m.begin));
      t.category = m.entry->second.category;
      t.sentiment = m.entry->second.sentiment;
      if (auto op = nearest_opinion(lowered, m.begin, m.end)) {
        t.opinion = op->first;
        t.sentiment = op->second;
      }
      out.push_back(std::move(t));
    }
    return out;
  }

 private:
  struct Word {
    std::size_t begin;
    std::string text;
  };

  std::optional<std::pair<std::string, Sentiment>> nearest_opinion(const std::string& lowered,
                                                                   std::size_t term_begin,
                                                                   std::size_t term_end) const {
    const auto [sent_begin, sent_end] = sentence_bounds(lowered, term_begin);
    std::vector<Word> before;
    std::vector<Word> after;
    std::size_t i = sent_begin;
    while (i < sent_end) {
      while (i < sent_end && !text::is_word_char(lowered[i])) ++i;
      std::size_t j = i;
      while (j < sent_end && text::is_word_char(lowered[j])) ++j;
      if (j > i) {
        if (j <= term_begin) before.push_back({i, lowered.substr(i, j - i)});
        else if (i >= term_end) after.push_back({i, lowered.substr(i, j - i)});
      }
      i = j;
    }
    for (auto it = before.rbegin(); it != before.rend(); ++it) {
      if (auto o = opinions_.find(it->text); o != opinions_.end()) return *o;
    }
    for (const auto& w : after) {
      if (auto o = opinions_.find(w.text); o != opinions_.end()) return *o;
    }
    return std::nullopt;
  }

  static std::pair<std::size_t, std::size_t> sentence_bounds(std::string_view s, std::size_t at) {
    auto is_end = [](char c) { return c == '.' || c == '!' || c == '?' || c == '\n'; };
    std::size_t b = at;
    while (b > 0 && !is_end(s[b - 1])) --b;
    std::size_t e = at;
    while (e < s.size() && !is_end(s[e])) ++e;
    return {b, e};
  }

  std::vector<std::pair<std::string, Entry>> terms_;
  std::map<std::string, Sentiment> opinions_;
};

/// Keyword-map classifier: a term equal to a category name, or containing a
/// registered keyword on word boundaries, scores 1 for that category.
/// Abstains when nothing matches.
class KeywordClassifier : public CategoryClassifier {
 public:
  KeywordClassifier() = default;
  explicit KeywordClassifier(std::map<std::string, std::string> keyword_to_category)
      : keywords_(std::move(keyword_to_category)) {}

  void add(std::string keyword, std::string category) {
    keywords_[std::move(keyword)] = std::move(category);
  }

  std::optional<std::vector<double>> score(std::string_view aspect_term,
                                           const AspectInventory& inventory) override {
    std::vector<double> scores(inventory.size(), 0.0);
    bool any = false;
    if (auto exact = inventory.find(aspect_term)) {
      scores[static_cast<std::size_t>(*exact)] = 2.0;
      any = true;
    }
    for (const auto& [keyword, category] : keywords_) {
      if (!text::contains_word(aspect_term, keyword)) continue;
      if (auto id = inventory.find(category)) {
        scores[static_cast<std::size_t>(*id)] += 1.0;
        any = true;
      }
    }
    if (!any) return std::nullopt;
    return scores;
  }

 private:
  std::map<std::string, std::string> keywords_;
};

/// Argmax over the classifier's per-category scores, lowest index on ties.
/// Returns kUnmapped when the classifier abstains.
inline CategoryId assign_category(std::string_view aspect_term, const AspectInventory& inventory,
                                  CategoryClassifier& classifier) {
  if (text::trim(aspect_term).empty()) throw InvalidArgument("assign_category: empty aspect term");
  auto scores = classifier.score(aspect_term, inventory);
  if (!scores) return kUnmapped;
  if (scores->size() != inventory.size()) {
    throw BackendError("classifier returned " + std::to_string(scores->size()) +
                       " scores for " + std::to_string(inventory.size()) + " categories");
  }
  const auto best = std::max_element(scores->begin(), scores->end());
  return static_cast<CategoryId>(best - scores->begin());
}

/// Keeps the tuple with the longest aspect term per category; the earliest
/// tuple wins a tie. Tuples with kUnmapped categories are ignored.
inline std::map<CategoryId, SentimentTuple> select_tuple_per_category(
    const std::vector<SentimentTuple>& tuples) {
  std::map<CategoryId, SentimentTuple> out;
  for (const auto& t : tuples) {
    if (t.category == kUnmapped) continue;
    auto it = out.find(t.category);
    if (it == out.end() || t.aspect_term.size() > it->second.aspect_term.size()) {
      out[t.category] = t;
    }
  }
  return out;
}

enum class SegmentMode {
  kSentence,  // sentence(s) around the selected aspect term
  kFullText,  // whole review text for every category
};

struct SegmentationStats {
  std::size_t reviews_in = 0;
  std::size_t reviews_kept = 0;
  std::size_t discarded_no_tuples = 0;
  std::size_t extractor_errors = 0;
  std::size_t classifier_errors = 0;
  std::size_t tuples_unmapped = 0;
};

/// Extract -> classify -> select-per-category -> segment.
class SegmentationPipeline {
 public:
  SegmentationPipeline(const AspectInventory& inventory, TupleExtractor* extractor,
                       CategoryClassifier* classifier, SegmentMode mode = SegmentMode::kSentence)
      : inventory_(inventory), extractor_(extractor), classifier_(classifier), mode_(mode) {}

  std::optional<ReviewRecord> process(const RawReview& raw) {
    ++stats_.reviews_in;
    ReviewRecord rec;
    rec.user = raw.user;
    rec.item = raw.item;
    rec.text = raw.text;
    rec.rating = raw.rating;

    std::vector<SentimentTuple> mined;
    if (raw.tuples) {
      for (const auto& t : *raw.tuples) {
        if (text::trim(t.aspect_term).empty()) continue;
        SentimentTuple st;
        st.aspect_term = t.aspect_term;
        st.opinion = t.opinion;
        st.sentiment = parse_sentiment(t.sentiment);
        if (!t.category.empty()) {
          if (auto id = inventory_.find(t.category)) st.category = *id;
        }
        mined.push_back(std::move(st));
      }
    } else {
      if (extractor_ == nullptr) throw InvalidArgument("no tuple extractor configured");
      if (text::trim(raw.text).empty()) {
        ++stats_.discarded_no_tuples;
        return std::nullopt;
      }
      try {
        mined = extractor_->extract(raw.text);
      } catch (const BackendError&) {
        ++stats_.extractor_errors;
        return std::nullopt;
      }
    }

    for (auto& t : mined) {
      if (t.category == kUnmapped && classifier_ != nullptr) {
        try {
          t.category = assign_category(t.aspect_term, inventory_, *classifier_);
        } catch (const BackendError&) {
          ++stats_.classifier_errors;
          return std::nullopt;
        }
      }
      if (t.category != kUnmapped && !inventory_.contains(t.category)) t.category = kUnmapped;
      if (t.category == kUnmapped) {
        ++stats_.tuples_unmapped;
        continue;
      }
      rec.tuples.push_back(t);
    }
    if (rec.tuples.empty()) {
      ++stats_.discarded_no_tuples;
      return std::nullopt;
    }
    rec.selected = select_tuple_per_category(rec.tuples);
    for (const auto& [cat, tuple] : rec.selected) {
      rec.segments[cat] = mode_ == SegmentMode::kFullText ? rec.text
                                                          : sentence_span(rec.text, tuple.aspect_term);
    }
    ++stats_.reviews_kept;
    return rec;
  }

  const SegmentationStats& stats() const { return stats_; }

  /// The sentence of `text` holding the first occurrence of `term`; the whole
  /// text when the term cannot be located.
  static std::string sentence_span(const std::string& text, std::string_view term) {
    const std::size_t pos = text::find_word(text, term);
    if (pos == std::string::npos) return text::trim(text);
    auto is_end = [](char c) { return c == '.' || c == '!' || c == '?' || c == '\n'; };
    std::size_t b = pos;
    while (b > 0 && !is_end(text[b - 1])) --b;
    std::size_t e = pos;
    while (e < text.size() && !is_end(text[e])) ++e;
    if (e < text.size() && text[e] != '\n') ++e;  // keep the terminator
    std::string span = text::trim(std::string_view(text).substr(b, e - b));
    return span.empty() ? text::trim(text) : span;
  }

 private:
  const AspectInventory& inventory_;
  TupleExtractor* extractor_;
  CategoryClassifier* classifier_;
  SegmentMode mode_;
  SegmentationStats stats_;
};

/// Merges records sharing a (user, item) pair: texts are joined with a space
/// and tuples concatenated, then selection and segmentation are redone.
inline std::vector<ReviewRecord> merge_pairs(std::vector<ReviewRecord> records,
                                             SegmentMode mode = SegmentMode::kSentence) {
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<ReviewRecord> out;
  for (auto& r : records) {
    auto key = std::make_pair(r.user, r.item);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      out.push_back(std::move(r));
      continue;
    }
    auto& dst = out[it->second];
    dst.text += " " + r.text;
    dst.tuples.insert(dst.tuples.end(), r.tuples.begin(), r.tuples.end());
    dst.selected = select_tuple_per_category(dst.tuples);
    dst.segments.clear();
    for (const auto& [cat, tuple] : dst.selected) {
      dst.segments[cat] = mode == SegmentMode::kFullText
                              ? dst.text
                              : SegmentationPipeline::sentence_span(dst.text, tuple.aspect_term);
    }
  }
  return out;
}

}  // namespace aspex
