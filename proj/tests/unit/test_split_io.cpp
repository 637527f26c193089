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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "aspex/corpus/io.hpp"
#include "aspex/corpus/split.hpp"
#include "support/synthetic.hpp"

namespace aspex {
namespace {

namespace fs = std::filesystem;
using testing::grid_records;

ReviewRecord pair(const std::string& u, const std::string& i) {
  ReviewRecord r;
  r.user = u;
  r.item = i;
  r.text = "x";
  r.segments[0] = "x";
  return r;
}

TEST(Prune, IteratesToFixpoint) {
  // u3 has one item; removing it leaves item C with one user, which cascades.
  std::vector<ReviewRecord> recs = {pair("u1", "A"), pair("u1", "B"), pair("u2", "A"),
                                    pair("u2", "B"), pair("u3", "C"), pair("u1", "C")};
  PruneStats st;
  const auto kept = prune_interactions(recs, 2, &st);
  EXPECT_EQ(kept.size(), 4u);
  EXPECT_EQ(st.pairs_before, 6u);
  EXPECT_EQ(st.pairs_after, 4u);
  EXPECT_EQ(st.users_after, 2u);
  EXPECT_EQ(st.items_after, 2u);
  EXPECT_GE(st.passes, 2u);
}

TEST(Prune, CountsDistinctPairsNotReviews) {
  std::vector<ReviewRecord> recs = {pair("u1", "A"), pair("u1", "A"), pair("u2", "A")};
  EXPECT_TRUE(prune_interactions(recs, 2).empty());
}

TEST(WarmStart, HeldOutUsersAndItemsAppearInTrain) {
  auto folds = prune_and_split(grid_records(12, 9, 4), SplitOptions{3, 0.8, 0.1, 0.1, 3, 17, 20});
  ASSERT_EQ(folds.size(), 3u);
  for (const auto& ds : folds) {
    std::set<std::string> tu, ti;
    std::set<std::pair<std::string, std::string>> train_pairs;
    for (const auto& r : ds.train_records) {
      tu.insert(r.user);
      ti.insert(r.item);
      train_pairs.emplace(r.user, r.item);
    }
    for (const auto* split : {&ds.valid_records, &ds.test_records}) {
      for (const auto& r : *split) {
        EXPECT_TRUE(tu.count(r.user));
        EXPECT_TRUE(ti.count(r.item));
        EXPECT_FALSE(train_pairs.count({r.user, r.item}));
      }
    }
    EXPECT_EQ(ds.train_records.size() + ds.valid_records.size() + ds.test_records.size(), 108u);
    EXPECT_EQ(ds.valid_records.size(), 11u);
    EXPECT_EQ(ds.test_records.size(), 11u);
  }
}

TEST(WarmStart, FoldsDifferAndSeedReproduces) {
  SplitOptions opt{3, 0.8, 0.1, 0.1, 2, 5, 20};
  auto a = prune_and_split(grid_records(10, 8, 3), opt);
  auto b = prune_and_split(grid_records(10, 8, 3), opt);
  for (int f = 0; f < 2; ++f) {
    EXPECT_EQ(a[f].test, b[f].test);
    EXPECT_EQ(a[f].train, b[f].train);
  }
  EXPECT_NE(a[0].test, a[1].test);
  opt.seed = 6;
  auto c = prune_and_split(grid_records(10, 8, 3), opt);
  EXPECT_NE(a[0].test, c[0].test);
}

TEST(WarmStart, ImpossibleSplitThrows) {
  std::vector<std::pair<std::string, std::string>> pairs = {{"u1", "A"}, {"u2", "B"}, {"u3", "C"}};
  Rng rng(1);
  EXPECT_THROW(warm_start_split(pairs, SplitOptions{1, 0.4, 0.3, 0.3, 1, 0, 20}, rng), InvalidArgument);
}

TEST(WarmStart, ExamplesTruncatedToMaxLen) {
  auto folds = prune_and_split(grid_records(6, 6, 3), SplitOptions{2, 0.8, 0.1, 0.1, 1, 1, 4});
  for (const auto& ex : folds[0].train) EXPECT_LE(ex.tokens.size(), 4u);
}

TEST(WarmStart, HistoriesComeFromTrainOnly) {
  auto ds = prune_and_split(grid_records(8, 8, 5, true), SplitOptions{3, 0.8, 0.1, 0.1, 1, 9, 20})[0];
  std::map<UserId, std::set<CategoryId>> uh;
  for (const auto& ex : ds.train) uh[ex.user].insert(ex.category);
  EXPECT_EQ(uh, ds.user_history);
}

TEST(Io, ReadsArrayAndObjectTuples) {
  std::istringstream in(
      R"({"user": 7, "item": "b1", "text": "Good tacos.", "rating": 4, "tuples": [["tacos", "good", "positive", "food"]]})"
      "\n\n"
      R"({"user": "u2", "item": "b1", "text": "Slow.", "tuples": [{"aspect_term": "staff", "category": "service"}]})"
      "\n"
      R"({"user": "u3", "item": "b2", "text": "No tuples."})");
  const auto reviews = io::read_raw_reviews(in);
  ASSERT_EQ(reviews.size(), 3u);
  EXPECT_EQ(reviews[0].user, "7");
  EXPECT_EQ(*reviews[0].rating, 4.0);
  ASSERT_TRUE(reviews[0].tuples);
  EXPECT_EQ((*reviews[0].tuples)[0].category, "food");
  EXPECT_EQ((*reviews[1].tuples)[0].aspect_term, "staff");
  EXPECT_FALSE(reviews[2].tuples.has_value());
}

TEST(Io, MalformedLineReportsLineNumber) {
  std::istringstream in("{\"user\":1,\"item\":2,\"text\":\"a\"}\n{broken\n");
  try {
    io::read_raw_reviews(in);
    FAIL() << "expected FormatError";
  } catch (const io::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Io, FoldRoundTrip) {
  const auto dir = fs::temp_directory_path() / "aspex_fold_rt";
  fs::remove_all(dir);
  const auto inv = testing::numbered_inventory(4);
  auto ds = prune_and_split(grid_records(8, 6, 4, true), SplitOptions{3, 0.8, 0.1, 0.1, 1, 2, 20})[0];
  io::save_fold(dir, ds, inv, {{"source", "grid"}});
  for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "train_records.jsonl", "ids.json",
                        "vocab.json", "inventory.json", "features.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto fd = io::load_fold(dir);
  EXPECT_EQ(fd.split.train, ds.train);
  EXPECT_EQ(fd.split.test, ds.test);
  EXPECT_EQ(fd.split.user_history, ds.user_history);
  EXPECT_EQ(fd.inventory, inv);
  EXPECT_EQ(fd.manifest["source"], "grid");
  EXPECT_EQ(fd.manifest["fold"], 0);
  EXPECT_EQ(fd.manifest["sizes"]["test_pairs"], ds.test_records.size());
  EXPECT_EQ(fd.tokenizer.tokens(), fit_fold_tokenizer(ds).tokens());
  ASSERT_EQ(fd.split.train_records.size(), ds.train_records.size());
  EXPECT_EQ(fd.split.train_records[0].segments, ds.train_records[0].segments);
  EXPECT_EQ(fd.split.train_records[0].tuples, ds.train_records[0].tuples);
  EXPECT_FALSE(fd.features.global.empty());
}

TEST(Io, SaveFoldIsByteStable) {
  const auto a = fs::temp_directory_path() / "aspex_fold_a";
  const auto b = fs::temp_directory_path() / "aspex_fold_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto inv = testing::numbered_inventory(3);
  io::save_fold(a, prune_and_split(grid_records(6, 6, 3), SplitOptions{3, 0.8, 0.1, 0.1, 1, 4, 20})[0], inv);
  io::save_fold(b, prune_and_split(grid_records(6, 6, 3), SplitOptions{3, 0.8, 0.1, 0.1, 1, 4, 20})[0], inv);
  for (const auto& entry : fs::directory_iterator(a)) {
    std::ifstream fa(entry.path()), fb(b / entry.path().filename());
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << entry.path().filename();
  }
}

}  // namespace
}  // namespace aspex
