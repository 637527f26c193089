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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "aspex/rag/pipeline.hpp"
#include "support/synthetic.hpp"

namespace aspex {
namespace {

namespace fs = std::filesystem;

class WarningCapture {
 public:
  WarningCapture() : saved_(warning_sink()) {
    warning_sink() = [this](std::string_view m) { messages.emplace_back(m); };
  }
  ~WarningCapture() { warning_sink() = saved_; }
  std::vector<std::string> messages;

 private:
  WarningSink saved_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Encodes "v<a>_<b>" as the vector (a, b); anything else is unencodable.
class StubEncoder : public SentenceEncoder {
 public:
  std::size_t dim() const override { return 2; }
  std::string identity() const override { return "stub"; }
  std::optional<RowVector> encode(std::string_view s) const override {
    int a = 0, b = 0;
    if (std::sscanf(std::string(s).c_str(), "v%d_%d", &a, &b) != 2) return std::nullopt;
    RowVector v(2);
    v << a, b;
    return v;
  }
};

TEST(Retrieve, QueryEqualToReviewRanksFirst) {
  HashingEncoder enc(64);
  std::vector<PoolEntry> entries = {{"slow service today", "u", "a"}, {"great pasta here", "u", "b"},
                                    {"noisy patio", "u", "c"}};
  Matrix m(3, 64);
  for (int k = 0; k < 3; ++k) m.row(k) = *enc.encode(entries[static_cast<std::size_t>(k)].text);
  const ReviewPool pool(PoolScope::kUser, "u", entries, m);
  const auto r = retrieve_reviews("great pasta here", pool, 2, enc);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].index, 1u);
  EXPECT_NEAR(r[0].similarity, 1.0, 1e-12);
  EXPECT_EQ(retrieve_reviews("x", pool, 10, enc).size(), 3u);
}

TEST(Retrieve, SingleEntryPool) {
  StubEncoder enc;
  RowVector v(2);
  v << 1, 0;
  const ReviewPool pool(PoolScope::kItem, "i", {{"v1_0", "u", "i"}}, v);
  const auto r = retrieve_reviews("v0_1", pool, 1, enc);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].entry.text, "v1_0");
}

TEST(Retrieve, MatchesBruteForceCosineSort) {
  StubEncoder enc;
  Rng rng(12);
  std::vector<PoolEntry> entries;
  Matrix m(20, 2);
  for (int k = 0; k < 20; ++k) {
    // Small integer grid so that exact ties occur.
    const int a = static_cast<int>(rng.below(5)) - 2, b = static_cast<int>(rng.below(5)) - 2;
    entries.push_back({"v" + std::to_string(a) + "_" + std::to_string(b), "u", "i"});
    m.row(k) << a, b;
  }
  const ReviewPool pool(PoolScope::kUser, "u", entries, m);
  const auto got = retrieve_reviews("v2_1", pool, 20, enc);
  std::vector<std::pair<double, int>> want;
  for (int k = 0; k < 20; ++k) {
    const double na = std::hypot(m(k, 0), m(k, 1));
    const double cos = na == 0 ? 0.0 : (2 * m(k, 0) + m(k, 1)) / (na * std::sqrt(5.0));
    want.emplace_back(-cos, k);
  }
  std::sort(want.begin(), want.end(), [](const auto& x, const auto& y) {
    if (std::abs(x.first - y.first) > 1e-12) return x.first < y.first;
    return x.second < y.second;
  });
  ASSERT_EQ(got.size(), 20u);
  for (std::size_t k = 0; k < 20; ++k) {
    EXPECT_EQ(got[k].index, static_cast<std::size_t>(want[k].second)) << k;
  }
}

TEST(Retrieve, EmptyPoolThrows) {
  HashingEncoder enc(8);
  EXPECT_THROW(retrieve_reviews("q", ReviewPool(), 3, enc), InvalidArgument);
}

TEST(ReaderPromptTest, MatchesGoldenFile) {
  const auto p = build_reader_prompt("user3", "place7", "the pasta was great at place7 .",
                                     {"Great pasta.\nSlow service.", "A {user} placeholder and a back\\slash"},
                                     {"I like tacos.", "Cozy patio, cold beer."});
  EXPECT_EQ(p.text, read_file(fs::path(ASPEX_GOLDEN_DIR) / "reader_prompt_v1.txt"));
}

TEST(ReaderPromptTest, ContainsInstructionAndOneBulletPerReview) {
  const auto p = build_reader_prompt("u", "i", "q", {"a"}, {"b"});
  EXPECT_NE(p.text.find("Begin your explanation with"), std::string::npos);
  EXPECT_NE(p.text.find("\n- a\n"), std::string::npos);
  EXPECT_NE(p.text.find("\n- b\n"), std::string::npos);
}

TEST(ReaderPromptTest, PreconditionsAndTemplateErrors) {
  EXPECT_THROW(build_reader_prompt("u", "i", "  ", {"a"}, {"b"}), InvalidArgument);
  EXPECT_THROW(build_reader_prompt("u", "i", "q", {}, {"b"}), InvalidArgument);
  EXPECT_THROW(build_reader_prompt("u", "i", "q", {"a"}, {}), InvalidArgument);
  const std::map<std::string, std::string> v = {{"a", "1"}};
  EXPECT_THROW(render_template("{a} {b}", v, {}), TemplateError);
  EXPECT_THROW(render_template("{a} {a}", v, {"a"}), TemplateError);
  EXPECT_THROW(render_template("none", v, {"a"}), TemplateError);
  EXPECT_EQ(render_template("{a} {not a name} {}", v, {"a"}), "1 {not a name} {}");
}

TEST(ReaderPromptTest, DistinctListsRenderDistinctly) {
  const auto one = build_reader_prompt("u", "i", "q", {"x\n- y"}, {"b"});
  const auto two = build_reader_prompt("u", "i", "q", {"x", "y"}, {"b"});
  EXPECT_NE(one.text, two.text);
}

TEST(VectorCacheTest, PersistsAndRejectsOtherEncoder) {
  const auto dir = fs::temp_directory_path() / "aspex_vcache";
  fs::remove_all(dir);
  HashingEncoder enc(16);
  {
    VectorCache cache(enc, dir / "vec.bin");
    cache.get("good pasta");
    cache.get("bad service");
    cache.save();
  }
  VectorCache again(enc, dir / "vec.bin");
  EXPECT_EQ(again.size(), 2u);
  EXPECT_EQ(again.get("good pasta"), *enc.encode("good pasta"));
  WarningCapture cap;
  HashingEncoder other(8);
  VectorCache mismatch(other, dir / "vec.bin");
  EXPECT_EQ(mismatch.size(), 0u);
  EXPECT_EQ(cap.messages.size(), 1u);
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    records = testing::grid_records(12, 12, 4, true);
    for (const auto& r : records) {
      users.add(r.user);
      items.add(r.item);
    }
    std::vector<std::string> segs;
    for (const auto& r : records) {
      for (const auto& [c, s] : r.segments) {
        segs.push_back(s);
        histories.user[users.at(r.user)].insert(c);
        histories.item[items.at(r.item)].insert(c);
      }
    }
    tok = WhitespaceTokenizer::fit(segs);
    ModelConfig mc;
    mc.n_users = users.size();
    mc.n_items = items.size();
    mc.n_aspect = 4;
    mc.decoder.vocab_size = tok.vocab_size();
    mc.decoder.width = 16;
    mc.decoder.layers = 1;
    mc.decoder.heads = 2;
    mc.decoder.max_positions = 32;
    mc.head_hidden = {8};
    mc.seed = 4;
    model = std::make_unique<ExplainerModel>(mc);
    cache = std::make_unique<VectorCache>(enc);
    pools = build_pools(records, *cache);
    inventory = testing::numbered_inventory(4);
    ctx = RagContext{model.get(), &tok, &users, &items, &histories, &pools, &enc, &inventory};
  }

  std::vector<ReviewRecord> records;
  IdMap users, items;
  AspectHistories histories;
  WhitespaceTokenizer tok;
  std::unique_ptr<ExplainerModel> model;
  HashingEncoder enc{64};
  std::unique_ptr<VectorCache> cache;
  PoolSet pools;
  AspectInventory inventory;
  RagContext ctx;
};

TEST_F(PipelineTest, EchoReaderReturnsGeneratedQuery) {
  WarningCapture cap;
  EchoReader echo;
  Rng rng(3);
  RagConfig cfg;
  cfg.strategy = Strategy::kHeuristic;
  const auto r = explain_with_reader(ctx, "user2", "place5", cfg, echo, rng);
  EXPECT_EQ(r.explanation, r.query);
  const auto direct = generate_explanation(*model, tok, users.at("user2"), items.at("place5"), r.chosen);
  if (!direct.text.empty()) {
    EXPECT_EQ(r.query, direct.text);
  }
  EXPECT_EQ(r.reader, "echo");
}

TEST_F(PipelineTest, CannedReaderKeepsTenAndTenReviews) {
  CannedReader canned("You may be interested in the pasta.");
  Rng rng(3);
  const auto r = explain_with_reader(ctx, "user1", "place3", RagConfig{}, canned, rng);
  EXPECT_EQ(r.explanation, "You may be interested in the pasta.");
  EXPECT_EQ(r.user_reviews.size(), 10u);
  EXPECT_EQ(r.item_reviews.size(), 10u);
  for (const auto& x : r.user_reviews) EXPECT_EQ(x.entry.user, "user1");
  for (const auto& x : r.item_reviews) EXPECT_EQ(x.entry.item, "place3");
  EXPECT_NE(r.prompt.text.find("User: user1 Restaurant: place3"), std::string::npos);
}

TEST_F(PipelineTest, TranscriptIsReproducibleForOneSeed) {
  auto run = [&] {
    EchoReader echo;
    Rng rng(21);
    std::vector<RagResult> rs;
    for (const char* u : {"user0", "user4", "user9"}) {
      rs.push_back(explain_with_reader(ctx, u, "place2", RagConfig{}, echo, rng));
    }
    std::ostringstream out;
    write_transcript(out, rs);
    return out.str();
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 3);
}

class FailingReader : public Reader {
 public:
  std::string complete(const ReaderPrompt&) override { throw std::runtime_error("connection refused"); }
  std::string name() const override { return "failing"; }
};

TEST_F(PipelineTest, ReaderFailureKeepsPrompt) {
  FailingReader bad;
  Rng rng(1);
  try {
    explain_with_reader(ctx, "user0", "place0", RagConfig{}, bad, rng);
    FAIL() << "expected ReaderError";
  } catch (const ReaderError& e) {
    EXPECT_NE(e.prompt().find("User: user0 Restaurant: place0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("connection refused"), std::string::npos);
  }
}

TEST_F(PipelineTest, UnknownIdsThrow) {
  EchoReader echo;
  Rng rng(1);
  EXPECT_THROW(explain_with_reader(ctx, "nobody", "place0", RagConfig{}, echo, rng), UnknownId);
  EXPECT_THROW(explain_with_reader(ctx, "user0", "nowhere", RagConfig{}, echo, rng), UnknownId);
}

}  // namespace
}  // namespace aspex
