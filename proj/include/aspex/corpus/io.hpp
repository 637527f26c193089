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

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspex/corpus/feature_index.hpp"
#include "aspex/corpus/inventory.hpp"
#include "aspex/corpus/review.hpp"
#include "aspex/corpus/segmentation.hpp"
#include "aspex/corpus/split.hpp"
#include "aspex/corpus/tokenizer.hpp"

namespace aspex::io {

using nlohmann::json;

class FormatError : public Error {
 public:
  using Error::Error;
};

inline std::string key_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw FormatError("user/item must be a string or integer");
}

/// Parses one review per line: {user, item, text, rating?, tuples?}.
inline std::vector<RawReview> read_raw_reviews(std::istream& in) {
  std::vector<RawReview> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("user") || !j.contains("item") || !j.contains("text")) {
      throw FormatError("line " + std::to_string(lineno) + ": missing user/item/text");
    }
    RawReview r;
    r.user = key_string(j["user"]);
    r.item = key_string(j["item"]);
    r.text = j["text"].get<std::string>();
    if (j.contains("rating") && j["rating"].is_number()) r.rating = j["rating"].get<double>();
    if (j.contains("tuples") && j["tuples"].is_array()) {
      std::vector<RawReview::Tuple> tuples;
      for (const auto& t : j["tuples"]) {
        RawReview::Tuple rt;
        if (t.is_array()) {
          // [aspect_term, opinion, sentiment, category]
          if (t.size() > 0) rt.aspect_term = t[0].get<std::string>();
          if (t.size() > 1) rt.opinion = t[1].get<std::string>();
          if (t.size() > 2) rt.sentiment = t[2].get<std::string>();
          if (t.size() > 3) rt.category = t[3].get<std::string>();
        } else {
          rt.aspect_term = t.value("aspect_term", std::string{});
          rt.opinion = t.value("opinion", std::string{});
          rt.sentiment = t.value("sentiment", std::string{});
          rt.category = t.value("category", std::string{});
        }
        tuples.push_back(std::move(rt));
      }
      r.tuples = std::move(tuples);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<RawReview> read_raw_reviews(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_raw_reviews(in);
}

inline json to_json(const SentimentTuple& t, const AspectInventory& inv) {
  return json{{"aspect_term", t.aspect_term},
              {"opinion", t.opinion},
              {"sentiment", std::string(to_string(t.sentiment))},
              {"category", inv.name(t.category)}};
}

inline SentimentTuple tuple_from_json(const json& j, const AspectInventory& inv) {
  SentimentTuple t;
  t.aspect_term = j.at("aspect_term").get<std::string>();
  t.opinion = j.value("opinion", std::string{});
  t.sentiment = parse_sentiment(j.value("sentiment", std::string{}));
  t.category = inv.require(j.at("category").get<std::string>());
  return t;
}

inline json to_json(const ReviewRecord& r, const AspectInventory& inv) {
  json tuples = json::array();
  for (const auto& t : r.tuples) tuples.push_back(to_json(t, inv));
  json selected = json::object();
  for (const auto& [c, t] : r.selected) selected[inv.name(c)] = t.aspect_term;
  json segments = json::object();
  for (const auto& [c, s] : r.segments) segments[inv.name(c)] = s;
  json j{{"user", r.user}, {"item", r.item}, {"text", r.text},
         {"tuples", tuples}, {"selected", selected}, {"segments", segments}};
  if (r.rating) j["rating"] = *r.rating;
  return j;
}

inline ReviewRecord record_from_json(const json& j, const AspectInventory& inv) {
  ReviewRecord r;
  r.user = key_string(j.at("user"));
  r.item = key_string(j.at("item"));
  r.text = j.at("text").get<std::string>();
  if (j.contains("rating") && j["rating"].is_number()) r.rating = j["rating"].get<double>();
  for (const auto& t : j.at("tuples")) r.tuples.push_back(tuple_from_json(t, inv));
  r.selected = select_tuple_per_category(r.tuples);
  for (auto& [name, seg] : j.at("segments").items()) {
    r.segments[inv.require(name)] = seg.get<std::string>();
  }
  return r;
}

inline json to_json(const TrainingExample& ex, const SplitDataset& ds, const AspectInventory& inv) {
  return json{{"user", ds.users.key(ex.user)}, {"item", ds.items.key(ex.item)},
              {"user_id", ex.user},              {"item_id", ex.item},
              {"category", inv.name(ex.category)}, {"category_id", ex.category},
              {"tokens", ex.tokens},             {"text", ex.text},
              {"feature", ex.feature}};
}

inline TrainingExample example_from_json(const json& j) {
  TrainingExample ex;
  ex.user = j.at("user_id").get<int>();
  ex.item = j.at("item_id").get<int>();
  ex.category = j.at("category_id").get<int>();
  ex.tokens = j.at("tokens").get<std::vector<TokenId>>();
  ex.text = j.value("text", std::string{});
  ex.feature = j.value("feature", std::string{});
  return ex;
}

template <typename T, typename F>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& values, F&& to) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& v : values) out << to(v).dump() << '\n';
}

inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(json::parse(line));
  }
  return out;
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return json::parse(in);
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline json inventory_to_json(const AspectInventory& inv) { return json(inv.names()); }

inline AspectInventory inventory_from_json(const json& j) {
  if (j.is_object() && j.contains("categories")) {
    return AspectInventory(j["categories"].get<std::vector<std::string>>());
  }
  return AspectInventory(j.get<std::vector<std::string>>());
}

/// {item key -> [features]} with features sorted.
inline json feature_index_to_json(const FeatureIndex& index, const IdMap& items) {
  json j = json::object();
  for (const auto& [item, feats] : index.per_item) {
    j[items.key(item)] = std::vector<std::string>(feats.begin(), feats.end());
  }
  return j;
}

/// Everything a fold directory holds, loaded back.
struct FoldData {
  SplitDataset split;
  AspectInventory inventory;
  WhitespaceTokenizer tokenizer;
  FeatureIndex features;
  json manifest;
};

/// Writes everything needed to rebuild the fold into `dir`, including a
/// manifest. Records and examples go in one JSONL file per split.
inline void save_fold(const std::filesystem::path& dir, const SplitDataset& ds,
                      const AspectInventory& inv, json manifest_extra = json::object()) {
  std::filesystem::create_directories(dir);
  const auto tokenizer = fit_fold_tokenizer(ds);
  auto ex = [&](const TrainingExample& e) { return to_json(e, ds, inv); };
  auto rec = [&](const ReviewRecord& r) { return to_json(r, inv); };
  write_jsonl(dir / "train.jsonl", ds.train, ex);
  write_jsonl(dir / "valid.jsonl", ds.valid, ex);
  write_jsonl(dir / "test.jsonl", ds.test, ex);
  write_jsonl(dir / "train_records.jsonl", ds.train_records, rec);
  write_jsonl(dir / "valid_records.jsonl", ds.valid_records, rec);
  write_jsonl(dir / "test_records.jsonl", ds.test_records, rec);
  write_json(dir / "ids.json", json{{"users", ds.users.keys()}, {"items", ds.items.keys()}});
  write_json(dir / "vocab.json", json(tokenizer.tokens()));
  write_json(dir / "inventory.json", inventory_to_json(inv));
  const auto features = build_feature_index(ds.train_records, inv,
                                            [&](const std::string& k) { return ds.items.at(k); });
  write_json(dir / "features.json", feature_index_to_json(features, ds.items));

  json manifest = std::move(manifest_extra);
  manifest["fold"] = ds.fold;
  manifest["seed"] = ds.seed;
  manifest["pruning"] = {{"passes", ds.prune.passes},
                         {"pairs_before", ds.prune.pairs_before},
                         {"pairs_after", ds.prune.pairs_after},
                         {"users_before", ds.prune.users_before},
                         {"users_after", ds.prune.users_after},
                         {"items_before", ds.prune.items_before},
                         {"items_after", ds.prune.items_after}};
  manifest["sizes"] = {{"train_pairs", ds.train_records.size()},
                       {"valid_pairs", ds.valid_records.size()},
                       {"test_pairs", ds.test_records.size()},
                       {"train_examples", ds.train.size()},
                       {"valid_examples", ds.valid.size()},
                       {"test_examples", ds.test.size()}};
  manifest["vocab_size"] = tokenizer.vocab_size();
  write_json(dir / "manifest.json", manifest);
}

inline FoldData load_fold(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json")) {
    throw Error("not a fold directory (no manifest.json): " + dir.string());
  }
  FoldData fd;
  fd.manifest = read_json(dir / "manifest.json");
  fd.inventory = inventory_from_json(read_json(dir / "inventory.json"));
  fd.tokenizer = WhitespaceTokenizer::from_tokens(
      read_json(dir / "vocab.json").get<std::vector<std::string>>());
  const auto ids = read_json(dir / "ids.json");
  auto& ds = fd.split;
  ds.fold = fd.manifest.value("fold", 0);
  ds.seed = fd.manifest.value("seed", std::uint64_t{0});
  ds.users = IdMap::from_keys(ids.at("users").get<std::vector<std::string>>());
  ds.items = IdMap::from_keys(ids.at("items").get<std::vector<std::string>>());
  for (const auto& j : read_jsonl(dir / "train.jsonl")) ds.train.push_back(example_from_json(j));
  for (const auto& j : read_jsonl(dir / "valid.jsonl")) ds.valid.push_back(example_from_json(j));
  for (const auto& j : read_jsonl(dir / "test.jsonl")) ds.test.push_back(example_from_json(j));
  for (const auto& j : read_jsonl(dir / "train_records.jsonl")) {
    ds.train_records.push_back(record_from_json(j, fd.inventory));
  }
  for (const auto& j : read_jsonl(dir / "valid_records.jsonl")) {
    ds.valid_records.push_back(record_from_json(j, fd.inventory));
  }
  for (const auto& j : read_jsonl(dir / "test_records.jsonl")) {
    ds.test_records.push_back(record_from_json(j, fd.inventory));
  }
  for (const auto& ex : ds.train) {
    ds.user_history[ex.user].insert(ex.category);
    ds.item_history[ex.item].insert(ex.category);
  }
  fd.features = build_feature_index(ds.train_records, fd.inventory,
                                    [&](const std::string& k) { return ds.items.at(k); });
  return fd;
}

}  // namespace aspex::io
