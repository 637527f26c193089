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
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "aspex/cli/app.hpp"

namespace aspex::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "aspex");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string toy(const char* name) { return (fs::path(ASPEX_SOURCE_DIR) / "data" / "toy" / name).string(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// JSON part of a dry-run printout.
json dry_config(const Result& r) {
  const auto brace = r.out.find('{');
  EXPECT_NE(brace, std::string::npos) << r.out << r.err;
  return json::parse(r.out.substr(brace));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("aspex_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write(const char* name, const std::string& body) {
    std::ofstream(dir / name) << body;
    return dir / name;
  }

  Result prepare(const fs::path& out, const std::string& seed = "7") {
    return invoke({"--seed", seed, "prepare-data", "--input", toy("reviews.jsonl"), "--inventory",
                   toy("inventory.json"), "--lexicon", toy("lexicon.json"), "--min-interactions", "5",
                   "--out", out.string()});
  }

  fs::path dir;
};

TEST_F(CliTest, UnknownAndMissingCommands) {
  auto r = invoke({"fly"});
  EXPECT_EQ(r.code, kExitUnknownCommand);
  EXPECT_NE(r.err.find("unknown command 'fly'"), std::string::npos);
  EXPECT_EQ(invoke({}).code, kExitUnknownCommand);
  EXPECT_EQ(invoke({"--seed", "3"}).code, kExitUnknownCommand);
}

TEST_F(CliTest, HelpExitsCleanly) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("rag-explain"), std::string::npos);
}

TEST_F(CliTest, BadFlagsAndValuesAreConfigErrors) {
  EXPECT_EQ(invoke({"train", "--no-such-flag"}).code, kExitInvalidConfig);
  EXPECT_EQ(invoke({"train", "--lr", "fast"}).code, kExitInvalidConfig);
  EXPECT_EQ(invoke({"prepare-data", "--input", "/nonexistent.jsonl"}).code, kExitInvalidConfig);
  EXPECT_EQ(invoke({"--config", (dir / "missing.toml").string(), "train"}).code, kExitInvalidConfig);
}

TEST_F(CliTest, PrepareDataWritesFoldsWithSeededManifests) {
  const auto out = dir / "prep";
  const auto r = prepare(out);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (int k = 0; k < 5; ++k) {
    const auto m = io::read_json(out / ("fold_" + std::to_string(k)) / "manifest.json");
    EXPECT_EQ(m["fold"], k);
    EXPECT_EQ(m["seed"], 7);
    EXPECT_EQ(m["sizes"]["train_pairs"], 80);
    EXPECT_EQ(m["segmentation"]["reviews_in"], 100);
  }
  const auto root = io::read_json(out / "manifest.json");
  EXPECT_EQ(root["seed"], 7);
  EXPECT_EQ(root["folds"], 5);
}

TEST_F(CliTest, PrepareDataIsIdempotent) {
  ASSERT_EQ(prepare(dir / "a").code, kExitOk);
  const auto first = slurp(dir / "a" / "fold_3" / "train.jsonl");
  ASSERT_EQ(prepare(dir / "a").code, kExitOk);
  EXPECT_EQ(slurp(dir / "a" / "fold_3" / "train.jsonl"), first);
  ASSERT_EQ(prepare(dir / "b", "8").code, kExitOk);
  EXPECT_NE(slurp(dir / "b" / "fold_3" / "train.jsonl"), first);
}

TEST_F(CliTest, ConfigFileSuppliesValuesAndFlagsWin) {
  ASSERT_EQ(prepare(dir / "prep").code, kExitOk);
  const auto ckpt = write("model.ckpt", "placeholder");
  const auto cfg = write("run.toml",
                         "seed = 11\n"
                         "[generate]\n"
                         "strategy = \"heuristic\"\n"
                         "k = 2\n"
                         "max-len = 9\n");
  const std::vector<std::string> base = {"--config", cfg.string(), "--dry-run", "generate", "--data",
                                         (dir / "prep").string(), "--checkpoint", ckpt.string(), "--out",
                                         (dir / "gen.jsonl").string()};
  auto r = invoke(base);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto j = dry_config(r);
  EXPECT_EQ(j["seed"], 11);
  EXPECT_EQ(j["strategy"], "heuristic");
  EXPECT_EQ(j["k"], 2);
  EXPECT_EQ(j["max_len"], 9);
  EXPECT_EQ(j["split"], "test");

  auto args = base;
  for (const char* a : {"--k", "4", "--strategy", "gt"}) args.push_back(a);
  args.insert(args.begin(), {"--seed", "5"});
  j = dry_config(invoke(args));
  EXPECT_EQ(j["seed"], 5);
  EXPECT_EQ(j["k"], 4);
  EXPECT_EQ(j["strategy"], "gt");
  EXPECT_EQ(j["max_len"], 9);
}

TEST_F(CliTest, IniConfigAndListValues) {
  ASSERT_EQ(prepare(dir / "prep").code, kExitOk);
  const auto cfg = write("run.ini",
                         "[train]\n"
                         "width=16\n"
                         "heads=2\n"
                         "head-hidden=8,4\n"
                         "lr=0.02\n");
  const auto r = invoke({"--config", cfg.string(), "--dry-run", "train", "--data", (dir / "prep").string(),
                         "--out", (dir / "run").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = dry_config(r);
  EXPECT_EQ(j["model"]["width"], 16);
  EXPECT_EQ(j["model"]["head_hidden"], (std::vector<int>{8, 4}));
  EXPECT_EQ(j["train"]["lr"], 0.02);
  EXPECT_EQ(j["model"]["max_positions"], 20 + kPromptLength + 2);
}

TEST_F(CliTest, DryRunWritesNothing) {
  const auto out = dir / "prep";
  const auto r = invoke({"--dry-run", "prepare-data", "--input", toy("reviews.jsonl"), "--inventory",
                         toy("inventory.json"), "--out", out.string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("configuration is valid"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, ValidationFailures) {
  ASSERT_EQ(prepare(dir / "prep").code, kExitOk);
  const std::string data = (dir / "prep").string();
  const auto ckpt = write("model.ckpt", "placeholder");
  auto gen = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = {"--dry-run", "generate", "--data", data, "--out", (dir / "g").string()};
    a.insert(a.end(), extra.begin(), extra.end());
    return invoke(a).code;
  };
  EXPECT_EQ(gen({"--checkpoint", (dir / "none.ckpt").string()}), kExitMissingCheckpoint);
  EXPECT_EQ(gen({"--checkpoint", ckpt.string(), "--fold", "5"}), kExitInvalidConfig);
  EXPECT_EQ(gen({"--checkpoint", ckpt.string(), "--strategy", "random"}), kExitInvalidConfig);
  EXPECT_EQ(gen({"--checkpoint", ckpt.string(), "--split", "dev"}), kExitInvalidConfig);
  EXPECT_EQ(gen({"--checkpoint", ckpt.string(), "--k", "0"}), kExitInvalidConfig);
  EXPECT_EQ(gen({"--checkpoint", ckpt.string()}), kExitOk);
  EXPECT_EQ(invoke({"--dry-run", "train", "--data", data, "--out", "r", "--width", "10", "--heads", "4"}).code,
            kExitInvalidConfig);
  EXPECT_EQ(invoke({"--dry-run", "train", "--data", data, "--out", "r", "--stage1-epochs", "3",
                    "--stage1-patience", "3"})
                .code,
            kExitInvalidConfig);
  EXPECT_EQ(invoke({"--dry-run", "rag-explain", "--data", data, "--checkpoint", ckpt.string(), "--out", "t",
                    "--reader", "canned"})
                .code,
            kExitInvalidConfig);
  EXPECT_EQ(invoke({"--dry-run", "rag-explain", "--data", data, "--checkpoint", ckpt.string(), "--out", "t",
                    "--user", "u01"})
                .code,
            kExitInvalidConfig);
}

TEST_F(CliTest, CorruptCheckpointIsARuntimeError) {
  ASSERT_EQ(prepare(dir / "prep").code, kExitOk);
  const auto ckpt = write("model.ckpt", "not an archive");
  const auto r = invoke({"generate", "--data", (dir / "prep").string(), "--checkpoint", ckpt.string(),
                         "--out", (dir / "g.jsonl").string()});
  EXPECT_EQ(r.code, kExitRuntimeError);
  EXPECT_FALSE(r.err.empty());
}

TEST(DeriveSeed, StreamsDifferAndRepeat) {
  EXPECT_EQ(derive_seed(7, SeedStream::kModel), derive_seed(7, SeedStream::kModel));
  EXPECT_NE(derive_seed(7, SeedStream::kModel), derive_seed(7, SeedStream::kTraining));
  EXPECT_NE(derive_seed(7, SeedStream::kModel), derive_seed(8, SeedStream::kModel));
}

}  // namespace
}  // namespace aspex::cli
