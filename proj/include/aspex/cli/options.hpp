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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aspex/common.hpp"
#include "aspex/inference/aspect_selection.hpp"
#include "aspex/model/prompt.hpp"
#include "aspex/training/trainer.hpp"

namespace aspex::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Process exit statuses.
enum ExitCode : int {
  kExitOk = 0,
  kExitRuntimeError = 1,
  kExitInvalidConfig = 2,
  kExitUnknownCommand = 3,
  kExitMissingCheckpoint = 4,
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingCheckpoint : public Error {
 public:
  using Error::Error;
};

/// Named seed streams forked off the root seed.
enum class SeedStream : std::uint64_t { kModel = 1, kTraining = 2, kGeneration = 3, kRag = 4 };

inline std::uint64_t derive_seed(std::uint64_t root, SeedStream s) {
  Rng rng = Rng(root).fork(static_cast<std::uint64_t>(s));
  return rng();
}

inline void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(flag) + ": no such file: " + path);
}

inline void require_output(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
}

// ---------------------------------------------------------------------------

struct PrepareOptions {
  std::string input;
  std::string inventory;
  std::string lexicon;
  std::string out;
  int folds = 5;
  std::size_t min_interactions = 20;
  double train_ratio = 0.8;
  double valid_ratio = 0.1;
  double test_ratio = 0.1;
  std::size_t max_len = 20;
  std::string segment = "sentence";

  void bind(CLI::App& app) {
    app.add_option("--input", input, "raw reviews, one JSON object per line");
    app.add_option("--inventory", inventory, "JSON list of category names");
    app.add_option("--lexicon", lexicon, "JSON lexicon with terms, opinions and keywords");
    app.add_option("--out", out, "output directory; folds go to fold_<k>/");
    app.add_option("--folds", folds, "number of random splits")->capture_default_str();
    app.add_option("--min-interactions", min_interactions, "k-core threshold for users and items")
        ->capture_default_str();
    app.add_option("--train-ratio", train_ratio)->capture_default_str();
    app.add_option("--valid-ratio", valid_ratio)->capture_default_str();
    app.add_option("--test-ratio", test_ratio)->capture_default_str();
    app.add_option("--max-len", max_len, "segment length cap in tokens")->capture_default_str();
    app.add_option("--segment", segment, "sentence | full")->capture_default_str();
  }

  void validate() const {
    require_file(input, "--input");
    require_file(inventory, "--inventory");
    if (!lexicon.empty()) require_file(lexicon, "--lexicon");
    require_output(out, "--out");
    if (folds < 1) throw ConfigError("--folds must be >= 1");
    if (max_len == 0) throw ConfigError("--max-len must be > 0");
    if (segment != "sentence" && segment != "full") throw ConfigError("--segment must be sentence or full");
    if (!(train_ratio > 0) || valid_ratio < 0 || test_ratio < 0) {
      throw ConfigError("split ratios must be non-negative with a positive train ratio");
    }
  }

  json to_json() const {
    return {{"input", input},         {"inventory", inventory},     {"lexicon", lexicon},
            {"out", out},             {"folds", folds},             {"min_interactions", min_interactions},
            {"train_ratio", train_ratio}, {"valid_ratio", valid_ratio}, {"test_ratio", test_ratio},
            {"max_len", max_len},     {"segment", segment}};
  }
};

/// --data names either one fold directory or a prepare-data output root, in
/// which case --fold picks fold_<k>.
struct DataOptions {
  std::string data;
  int fold = 0;

  void bind(CLI::App& app) {
    app.add_option("--data", data, "fold directory or prepare-data output");
    app.add_option("--fold", fold, "fold index when --data is a prepare-data output")
        ->capture_default_str();
  }

  fs::path fold_dir() const {
    if (data.empty()) throw ConfigError("--data is required");
    const fs::path root(data);
    if (fs::exists(root / "train.jsonl") && fs::exists(root / "manifest.json")) return root;
    if (fold < 0) throw ConfigError("--fold must be >= 0");
    if (fs::exists(root / "manifest.json")) {
      std::ifstream in(root / "manifest.json");
      const json m = json::parse(in, nullptr, false);
      if (m.is_object() && m.contains("folds") && fold >= m["folds"].get<int>()) {
        throw ConfigError("--fold " + std::to_string(fold) + " out of range [0, " +
                          std::to_string(m["folds"].get<int>()) + ")");
      }
    }
    const fs::path dir = root / ("fold_" + std::to_string(fold));
    if (!fs::exists(dir / "manifest.json")) throw ConfigError("no fold directory at " + dir.string());
    return dir;
  }

  json to_json() const { return {{"data", data}, {"fold", fold}}; }
};

struct TrainOptions {
  DataOptions data;
  std::string out;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff = 0;
  std::size_t max_positions = 0;
  std::vector<std::size_t> head_hidden = {256, 128};
  TrainConfig train;

  void bind(CLI::App& app) {
    data.bind(app);
    app.add_option("--out", out, "run directory for model.ckpt, history.jsonl, manifest.json");
    app.add_option("--width", width)->capture_default_str();
    app.add_option("--layers", layers)->capture_default_str();
    app.add_option("--heads", heads)->capture_default_str();
    app.add_option("--ff", ff, "feed-forward width, 0 for 4*width")->capture_default_str();
    app.add_option("--max-positions", max_positions, "0 sizes it from --max-len")->capture_default_str();
    app.add_option("--head-hidden", head_hidden, "hidden sizes of the aspect head")
        ->delimiter(',')
        ->capture_default_str();
    app.add_option("--lr", train.lr)->capture_default_str();
    app.add_option("--batch-size", train.batch_size)->capture_default_str();
    app.add_option("--max-len", train.max_len)->capture_default_str();
    app.add_option("--stage1-epochs", train.stage1_epochs)->capture_default_str();
    app.add_option("--stage1-patience", train.stage1_patience)->capture_default_str();
    app.add_option("--stage2-epochs", train.stage2_epochs)->capture_default_str();
    app.add_option("--stage2-patience", train.stage2_patience)->capture_default_str();
    app.add_option("--alpha", train.alpha, "weight of the aspect loss in stage 2")->capture_default_str();
    app.add_option("--weight-decay", train.weight_decay)->capture_default_str();
    app.add_option("--clip-norm", train.clip_norm, "0 disables clipping")->capture_default_str();
    app.add_option("--lambda", train.db.lambda)->capture_default_str();
    app.add_option("--nu", train.db.nu, "one value, or one per category")
        ->delimiter(',')
        ->capture_default_str();
    app.add_option("--alpha-s", train.db.alpha_s)->capture_default_str();
    app.add_option("--beta-s", train.db.beta_s)->capture_default_str();
    app.add_option("--mu-s", train.db.mu_s)->capture_default_str();
  }

  std::size_t resolved_max_positions() const {
    return max_positions ? max_positions : train.max_len + kPromptLength + 2;
  }

  void validate() const {
    data.fold_dir();
    require_output(out, "--out");
    if (width == 0 || layers == 0 || heads == 0) throw ConfigError("model sizes must be > 0");
    if (width % heads != 0) throw ConfigError("--width must be a multiple of --heads");
    if (resolved_max_positions() < train.max_len + kPromptLength + 2) {
      throw ConfigError("--max-positions too small for --max-len");
    }
    try {
      train.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }

  json to_json() const {
    json j = data.to_json();
    j["out"] = out;
    j["model"] = {{"width", width},
                  {"layers", layers},
                  {"heads", heads},
                  {"ff", ff},
                  {"max_positions", resolved_max_positions()},
                  {"head_hidden", head_hidden}};
    j["train"] = {{"lr", train.lr},
                  {"batch_size", train.batch_size},
                  {"max_len", train.max_len},
                  {"stage1_epochs", train.stage1_epochs},
                  {"stage1_patience", train.stage1_patience},
                  {"stage2_epochs", train.stage2_epochs},
                  {"stage2_patience", train.stage2_patience},
                  {"alpha", train.alpha},
                  {"weight_decay", train.weight_decay},
                  {"clip_norm", train.clip_norm},
                  {"lambda", train.db.lambda},
                  {"nu", train.db.nu},
                  {"alpha_s", train.db.alpha_s},
                  {"beta_s", train.db.beta_s},
                  {"mu_s", train.db.mu_s}};
    return j;
  }
};

inline void check_checkpoint(const std::string& path) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  if (!fs::is_regular_file(path)) throw MissingCheckpoint("checkpoint not found: " + path);
}

inline void check_split(const std::string& split) {
  if (split != "train" && split != "valid" && split != "test") {
    throw ConfigError("--split must be train, valid or test");
  }
}

struct GenerateOptions {
  DataOptions data;
  std::string checkpoint;
  std::string strategy = "supervised";
  std::size_t k = 3;
  std::string split = "test";
  std::string out;
  std::size_t max_len = 20;
  std::size_t limit = 0;

  void bind(CLI::App& app) {
    data.bind(app);
    app.add_option("--checkpoint", checkpoint);
    app.add_option("--strategy", strategy, "supervised | heuristic | gt")->capture_default_str();
    app.add_option("--k", k, "aspects per explanation")->capture_default_str();
    app.add_option("--split", split)->capture_default_str();
    app.add_option("--out", out, "generations file (JSON lines)");
    app.add_option("--max-len", max_len)->capture_default_str();
    app.add_option("--limit", limit, "stop after this many pairs, 0 for all")->capture_default_str();
  }

  void validate() const {
    data.fold_dir();
    check_checkpoint(checkpoint);
    require_output(out, "--out");
    check_split(split);
    try {
      parse_strategy(strategy);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (k == 0) throw ConfigError("--k must be > 0");
    if (max_len == 0) throw ConfigError("--max-len must be > 0");
  }

  json to_json() const {
    json j = data.to_json();
    j.update({{"checkpoint", checkpoint}, {"strategy", strategy}, {"k", k},         {"split", split},
              {"out", out},               {"max_len", max_len},   {"limit", limit}});
    return j;
  }
};

struct EvaluateOptions {
  DataOptions data;
  std::string generations;
  std::string out = "report.json";
  std::size_t entr_n = 1;
  std::size_t rank_k = 3;
  std::string encoder = "hashing";
  std::size_t encoder_dim = 256;
  bool table = false;

  void bind(CLI::App& app) {
    data.bind(app);
    app.add_option("--generations", generations, "output of the generate command");
    app.add_option("--out", out, "report JSON")->capture_default_str();
    app.add_option("--entr-n", entr_n, "n-gram order of ENTR")->capture_default_str();
    app.add_option("--rank-k", rank_k, "cutoff of HR@k and F1")->capture_default_str();
    app.add_option("--encoder", encoder, "sentence encoder for MSE/Cos Sim: hashing | none")
        ->capture_default_str();
    app.add_option("--encoder-dim", encoder_dim)->capture_default_str();
    app.add_flag("--table", table, "also print the grouped table");
  }

  void validate() const {
    data.fold_dir();
    require_file(generations, "--generations");
    require_output(out, "--out");
    if (entr_n == 0 || rank_k == 0) throw ConfigError("--entr-n and --rank-k must be > 0");
    if (encoder != "hashing" && encoder != "none") throw ConfigError("--encoder must be hashing or none");
    if (encoder_dim == 0) throw ConfigError("--encoder-dim must be > 0");
  }

  json to_json() const {
    json j = data.to_json();
    j.update({{"generations", generations}, {"out", out},         {"entr_n", entr_n},
              {"rank_k", rank_k},           {"encoder", encoder}, {"encoder_dim", encoder_dim}});
    return j;
  }
};

struct RagOptions {
  DataOptions data;
  std::string checkpoint;
  std::string user;
  std::string item;
  std::string split = "test";
  std::size_t limit = 0;
  std::string strategy = "supervised";
  std::size_t k = 3;
  std::size_t k_reviews = 10;
  std::size_t max_len = 20;
  std::size_t encoder_dim = 256;
  std::string cache;
  std::string reader = "echo";
  std::string canned_text;
  std::string endpoint;
  std::string endpoint_path = "/v1/chat/completions";
  std::string reader_model;
  std::string api_key_env = "ASPEX_READER_API_KEY";
  int timeout = 60;
  std::string out;

  void bind(CLI::App& app) {
    data.bind(app);
    app.add_option("--checkpoint", checkpoint);
    app.add_option("--user", user, "explain one pair; needs --item too");
    app.add_option("--item", item);
    app.add_option("--split", split, "pairs to explain when --user/--item are absent")
        ->capture_default_str();
    app.add_option("--limit", limit)->capture_default_str();
    app.add_option("--strategy", strategy)->capture_default_str();
    app.add_option("--k", k)->capture_default_str();
    app.add_option("--k-reviews", k_reviews, "reviews retrieved from each pool")->capture_default_str();
    app.add_option("--max-len", max_len)->capture_default_str();
    app.add_option("--encoder-dim", encoder_dim)->capture_default_str();
    app.add_option("--cache", cache, "vector cache file");
    app.add_option("--reader", reader, "echo | canned | http")->capture_default_str();
    app.add_option("--canned-text", canned_text);
    app.add_option("--endpoint", endpoint, "base URL of a chat-completions server");
    app.add_option("--endpoint-path", endpoint_path)->capture_default_str();
    app.add_option("--reader-model", reader_model);
    app.add_option("--api-key-env", api_key_env)->capture_default_str();
    app.add_option("--timeout", timeout, "seconds")->capture_default_str();
    app.add_option("--out", out, "transcript (JSON lines)");
  }

  void validate() const {
    data.fold_dir();
    check_checkpoint(checkpoint);
    require_output(out, "--out");
    check_split(split);
    if (user.empty() != item.empty()) throw ConfigError("--user and --item go together");
    if (reader != "echo" && reader != "canned" && reader != "http") {
      throw ConfigError("--reader must be echo, canned or http");
    }
    if (reader == "canned" && canned_text.empty()) throw ConfigError("--reader canned needs --canned-text");
    if (reader == "http" && endpoint.empty()) throw ConfigError("--reader http needs --endpoint");
    if (k == 0 || k_reviews == 0 || max_len == 0 || encoder_dim == 0) {
      throw ConfigError("--k, --k-reviews, --max-len and --encoder-dim must be > 0");
    }
    Strategy s;
    try {
      s = parse_strategy(strategy);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    if (s == Strategy::kGroundTruth) throw ConfigError("rag-explain takes supervised or heuristic");
  }

  json to_json() const {
    json j = data.to_json();
    j.update({{"checkpoint", checkpoint}, {"user", user},
              {"item", item},             {"split", split},
              {"limit", limit},           {"strategy", strategy},
              {"k", k},                   {"k_reviews", k_reviews},
              {"max_len", max_len},       {"encoder_dim", encoder_dim},
              {"cache", cache},           {"reader", reader},
              {"endpoint", endpoint},     {"endpoint_path", endpoint_path},
              {"reader_model", reader_model}, {"out", out}});
    return j;
  }
};

struct AnalyzeOptions {
  DataOptions data;
  std::string checkpoint;
  std::string out;
  std::size_t top = 20;
  std::size_t curve_max_k = 0;
  std::string split = "valid";
  std::size_t max_len = 20;
  std::vector<double> bleu;

  void bind(CLI::App& app) {
    data.bind(app);
    app.add_option("--checkpoint", checkpoint);
    app.add_option("--out", out, "output directory");
    app.add_option("--top", top, "nearest features per category")->capture_default_str();
    app.add_option("--curve-max-k", curve_max_k,
                   "measure Supervised@K BLEU-4 for K=1..N and pick the elbow (N >= 3)")
        ->capture_default_str();
    app.add_option("--split", split, "pairs used for the BLEU curve")->capture_default_str();
    app.add_option("--max-len", max_len)->capture_default_str();
    app.add_option("--bleu", bleu, "known BLEU-4 values for K=1,2,...; skips measuring")
        ->delimiter(',');
  }

  void validate() const {
    data.fold_dir();
    check_checkpoint(checkpoint);
    require_output(out, "--out");
    check_split(split);
    if (curve_max_k != 0 && curve_max_k < 3) throw ConfigError("--curve-max-k must be 0 or >= 3");
    if (!bleu.empty() && bleu.size() < 3) throw ConfigError("--bleu needs at least 3 values");
    if (top == 0) throw ConfigError("--top must be > 0");
  }

  json to_json() const {
    json j = data.to_json();
    j.update({{"checkpoint", checkpoint}, {"out", out}, {"top", top}, {"curve_max_k", curve_max_k},
              {"split", split}, {"max_len", max_len}, {"bleu", bleu}});
    return j;
  }
};

}  // namespace aspex::cli
