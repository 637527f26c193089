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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspex/common.hpp"
#include "aspex/corpus/inventory.hpp"
#include "aspex/corpus/tokenizer.hpp"
#include "aspex/model/aspect_head.hpp"
#include "aspex/model/autograd.hpp"
#include "aspex/model/decoder.hpp"
#include "aspex/model/losses.hpp"
#include "aspex/model/prompt.hpp"

namespace aspex {

struct ModelConfig {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_aspect = 0;
  DecoderConfig decoder;
  std::vector<std::size_t> head_hidden = {256, 128};
  double prompt_init_std = 0.02;
  std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"n_users", c.n_users},
          {"n_items", c.n_items},
          {"n_aspect", c.n_aspect},
          {"head_hidden", c.head_hidden},
          {"prompt_init_std", c.prompt_init_std},
          {"seed", c.seed},
          {"decoder",
           {{"vocab_size", c.decoder.vocab_size},
            {"width", c.decoder.width},
            {"layers", c.decoder.layers},
            {"heads", c.decoder.heads},
            {"ff", c.decoder.ff},
            {"max_positions", c.decoder.max_positions},
            {"init_std", c.decoder.init_std}}}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_users = j.at("n_users").get<std::size_t>();
  c.n_items = j.at("n_items").get<std::size_t>();
  c.n_aspect = j.at("n_aspect").get<std::size_t>();
  c.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
  c.prompt_init_std = j.value("prompt_init_std", 0.02);
  c.seed = j.value("seed", std::uint64_t{0});
  const auto& d = j.at("decoder");
  c.decoder.vocab_size = d.at("vocab_size").get<std::size_t>();
  c.decoder.width = d.at("width").get<std::size_t>();
  c.decoder.layers = d.at("layers").get<std::size_t>();
  c.decoder.heads = d.at("heads").get<std::size_t>();
  c.decoder.ff = d.value("ff", std::size_t{0});
  c.decoder.max_positions = d.at("max_positions").get<std::size_t>();
  c.decoder.init_std = d.value("init_std", 0.02);
  return c;
}

/// Prompt tables + decoder backbone + aspect-recommendation head sharing one
/// set of user/item rows.
class ExplainerModel {
 public:
  explicit ExplainerModel(const ModelConfig& config) : config_(config) {
    Rng rng(config_.seed);
    Rng decoder_rng = rng.fork(1);
    Rng prompt_rng = rng.fork(2);
    Rng head_rng = rng.fork(3);
    decoder_ = std::make_unique<TinyDecoder>(config_.decoder, decoder_rng);
    tables_ = PromptTables(config_.n_users, config_.n_items, config_.n_aspect,
                           config_.decoder.width, config_.prompt_init_std, prompt_rng);
    head_ = AspectHead(2 * config_.decoder.width, config_.head_hidden, config_.n_aspect, head_rng);
  }

  ExplainerModel(const ExplainerModel&) = delete;
  ExplainerModel& operator=(const ExplainerModel&) = delete;
  ExplainerModel(ExplainerModel&&) = default;
  ExplainerModel& operator=(ExplainerModel&&) = default;

  const ModelConfig& config() const { return config_; }
  PromptTables& tables() { return tables_; }
  const PromptTables& tables() const { return tables_; }
  TinyDecoder& decoder() { return *decoder_; }
  const TinyDecoder& decoder() const { return *decoder_; }
  AspectHead& head() { return head_; }
  const AspectHead& head() const { return head_; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out = tables_.parameters();
    for (auto* p : decoder_->parameters()) out.push_back(p);
    for (auto* p : head_.parameters()) out.push_back(p);
    return out;
  }

  std::vector<Matrix> snapshot() {
    std::vector<Matrix> out;
    for (auto* p : parameters()) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Matrix>& values) {
    auto params = parameters();
    if (values.size() != params.size()) throw InvalidArgument("snapshot size mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = values[k];
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  Graph::Var generation_loss(Graph& g, std::span<const TrainingExample> batch, TokenId bos,
                             TokenId eos) {
    return aspex::generation_loss(g, batch, tables_, *decoder_, bos, eos);
  }

  Graph::Var aspect_logits(Graph& g, std::span<const UserId> users, std::span<const ItemId> items) {
    return head_.logits(g, tables_, users, items);
  }

  AspectDistribution aspect_scores(UserId u, ItemId i) const { return head_.scores(tables_, u, i); }

  /// All named tensors, in parameters() order.
  std::map<std::string, const Matrix*> named_tensors() {
    std::map<std::string, const Matrix*> out;
    for (auto* p : parameters()) out[p->name] = &p->value;
    return out;
  }

 private:
  ModelConfig config_;
  PromptTables tables_;
  std::unique_ptr<TinyDecoder> decoder_;
  AspectHead head_;
};

/// Binary archive: magic, version, JSON metadata, then named float64 tensors.
namespace archive {

inline constexpr char kMagic[8] = {'A', 'S', 'P', 'X', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kVersion = 1;

class ArchiveError : public Error {
 public:
  using Error::Error;
};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ArchiveError("truncated archive");
  return v;
}

inline void write(const std::filesystem::path& path, const nlohmann::json& meta,
                  const std::map<std::string, const Matrix*>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArchiveError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string m = meta.dump();
  put<std::uint64_t>(out, m.size());
  out.write(m.data(), static_cast<std::streamsize>(m.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, mat] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(mat->rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(mat->cols()));
    out.write(reinterpret_cast<const char*>(mat->data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(mat->size())));
  }
  if (!out) throw ArchiveError("write failed: " + path.string());
}

struct Contents {
  nlohmann::json meta;
  std::map<std::string, Matrix> tensors;
};

inline Contents read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ArchiveError("not an aspex archive: " + path.string());
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) {
    throw ArchiveError("unsupported archive version " + std::to_string(version));
  }
  Contents c;
  const auto meta_len = get<std::uint64_t>(in);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw ArchiveError("truncated archive metadata");
  c.meta = nlohmann::json::parse(meta);
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name_len = get<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw ArchiveError("truncated tensor " + name);
    c.tensors.emplace(std::move(name), std::move(m));
  }
  return c;
}

}  // namespace archive

/// Everything needed to run inference after training.
struct Checkpoint {
  std::unique_ptr<ExplainerModel> model;
  WhitespaceTokenizer tokenizer;
  AspectInventory inventory;
  std::vector<std::string> users;
  std::vector<std::string> items;
  nlohmann::json extra;
};

inline void save_checkpoint(const std::filesystem::path& path, ExplainerModel& model,
                            const WhitespaceTokenizer& tokenizer, const AspectInventory& inventory,
                            const std::vector<std::string>& users,
                            const std::vector<std::string>& items,
                            const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json meta{{"format", "aspex-checkpoint"},
                      {"model", to_json(model.config())},
                      {"tokenizer", {{"kind", "whitespace"}, {"tokens", tokenizer.tokens()}}},
                      {"inventory", inventory.names()},
                      {"users", users},
                      {"items", items},
                      {"extra", extra}};
  archive::write(path, meta, model.named_tensors());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto contents = archive::read(path);
  const auto& meta = contents.meta;
  if (meta.value("format", std::string{}) != "aspex-checkpoint") {
    throw archive::ArchiveError("archive is not a model checkpoint");
  }
  Checkpoint ck;
  ck.model = std::make_unique<ExplainerModel>(model_config_from_json(meta.at("model")));
  for (auto* p : ck.model->parameters()) {
    auto it = contents.tensors.find(p->name);
    if (it == contents.tensors.end()) throw archive::ArchiveError("missing tensor " + p->name);
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw archive::ArchiveError("shape mismatch for " + p->name);
    }
    p->value = std::move(it->second);
    p->zero_grad();
  }
  ck.tokenizer = WhitespaceTokenizer::from_tokens(
      meta.at("tokenizer").at("tokens").get<std::vector<std::string>>());
  ck.inventory = AspectInventory(meta.at("inventory").get<std::vector<std::string>>());
  ck.users = meta.at("users").get<std::vector<std::string>>();
  ck.items = meta.at("items").get<std::vector<std::string>>();
  ck.extra = meta.value("extra", nlohmann::json::object());
  return ck;
}

/// Loads decoder weights from a tensor archive holding GPT-2 style names
/// (wte, wpe, h.N.*, ln_f.*) into a fresh decoder.
inline std::unique_ptr<TinyDecoder> import_decoder(const std::filesystem::path& path,
                                                   std::size_t heads) {
  auto contents = archive::read(path);
  return TinyDecoder::from_tensors(contents.tensors, heads);
}

}  // namespace aspex
