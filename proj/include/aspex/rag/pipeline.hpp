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

#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspex/inference/aspect_selection.hpp"
#include "aspex/inference/generate.hpp"
#include "aspex/rag/pool.hpp"
#include "aspex/rag/reader.hpp"

namespace aspex {

struct RagConfig {
  Strategy strategy = Strategy::kSupervised;
  std::size_t k_aspects = 3;
  std::size_t k_reviews = 10;
  std::size_t max_len = 20;
};

struct RagResult {
  std::string user;
  std::string item;
  std::vector<CategoryId> chosen;
  std::string query;
  std::vector<Retrieved> user_reviews;
  std::vector<Retrieved> item_reviews;
  ReaderPrompt prompt;
  std::string reader;
  std::string explanation;
};

inline nlohmann::json to_json(const RagResult& r) {
  auto list = [](const std::vector<Retrieved>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : v) {
      a.push_back({{"index", x.index},
                   {"user", x.entry.user},
                   {"item", x.entry.item},
                   {"similarity", x.similarity},
                   {"text", x.entry.text}});
    }
    return a;
  };
  return {{"user", r.user},
          {"item", r.item},
          {"chosen", r.chosen},
          {"query", r.query},
          {"user_reviews", list(r.user_reviews)},
          {"item_reviews", list(r.item_reviews)},
          {"prompt", r.prompt.text},
          {"reader", r.reader},
          {"explanation", r.explanation}};
}

/// Everything explain_with_reader reads; none of it is modified.
struct RagContext {
  ExplainerModel* model = nullptr;
  const WhitespaceTokenizer* tokenizer = nullptr;
  const IdMap* users = nullptr;
  const IdMap* items = nullptr;
  const AspectHistories* histories = nullptr;
  const PoolSet* pools = nullptr;
  const SentenceEncoder* encoder = nullptr;
  const AspectInventory* inventory = nullptr;
};

/// aspect selection -> greedy explanation -> retrieval from both pools ->
/// prompt -> reader. A ReaderError keeps the prompt for a retry.
inline RagResult explain_with_reader(const RagContext& ctx, const std::string& user,
                                     const std::string& item, const RagConfig& cfg, Reader& reader,
                                     Rng& rng, std::optional<CategoryId> gt = std::nullopt) {
  if (!ctx.model || !ctx.tokenizer || !ctx.users || !ctx.items || !ctx.pools || !ctx.encoder) {
    throw InvalidArgument("rag context is incomplete");
  }
  if (!ctx.users->contains(user)) throw UnknownId("unknown user " + user);
  if (!ctx.items->contains(item)) throw UnknownId("unknown item " + item);
  const UserId u = ctx.users->at(user);
  const ItemId i = ctx.items->at(item);
  ModelScorer scorer(*ctx.model);
  const AspectSelection sel =
      recommend_aspects(u, i, cfg.k_aspects, cfg.strategy, &scorer, ctx.histories, gt, rng);
  RagResult r;
  r.user = user;
  r.item = item;
  r.chosen = sel.chosen;
  r.query = generate_explanation(*ctx.model, *ctx.tokenizer, u, i, sel.chosen, cfg.max_len).text;
  if (text::trim(r.query).empty()) {
    warn("empty generated query for " + user + "/" + item + "; using the chosen category names");
    std::vector<std::string> names;
    for (CategoryId c : sel.chosen) {
      names.push_back(ctx.inventory ? ctx.inventory->name(c) : "category " + std::to_string(c));
    }
    r.query = text::join(names, ", ");
  }
  r.user_reviews = retrieve_reviews(r.query, ctx.pools->user(user), cfg.k_reviews, *ctx.encoder);
  r.item_reviews = retrieve_reviews(r.query, ctx.pools->item(item), cfg.k_reviews, *ctx.encoder);
  std::vector<std::string> ur;
  std::vector<std::string> ir;
  for (const auto& x : r.user_reviews) ur.push_back(x.entry.text);
  for (const auto& x : r.item_reviews) ir.push_back(x.entry.text);
  r.prompt = build_reader_prompt(user, item, r.query, std::move(ir), std::move(ur));
  r.reader = reader.name();
  try {
    r.explanation = reader.complete(r.prompt);
  } catch (const ReaderError&) {
    throw;
  } catch (const std::exception& e) {
    throw ReaderError(std::string("reader ") + r.reader + " failed: " + e.what(), r.prompt.text);
  }
  return r;
}

/// One JSON object per line.
inline void write_transcript(std::ostream& out, const std::vector<RagResult>& results) {
  for (const auto& r : results) out << to_json(r).dump() << '\n';
}

}  // namespace aspex
