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
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/model/autograd.hpp"

namespace aspex {

/// Per-position token log-probabilities plus the final hidden states.
/// Row p of `log_probs` scores the token at position p + 1.
struct BackboneOutput {
  Matrix log_probs;
  Matrix hidden;
};

/// Causal decoder: (T x width embeddings) -> (T x vocab logits).
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual std::size_t width() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t max_positions() const = 0;

  virtual Graph::Var embed_tokens(Graph& g, std::span<const TokenId> tokens) = 0;

  /// Logits for every position; `hidden`, when given, receives the final
  /// hidden states.
  virtual Graph::Var forward(Graph& g, Graph::Var embeddings, Graph::Var* hidden = nullptr) = 0;

  virtual std::vector<Parameter*> parameters() = 0;

  /// Input token embedding table (vocab x width).
  virtual const Matrix& token_embeddings() const = 0;

  /// Gradient-free forward returning normalized log-probabilities.
  BackboneOutput run(const Matrix& embeddings) {
    Graph g(false);
    Graph::Var hidden;
    Graph::Var logits = forward(g, g.constant(embeddings), &hidden);
    BackboneOutput out;
    const Matrix& z = g.value(logits);
    out.log_probs.resize(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      const double mx = z.row(r).maxCoeff();
      const double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
      out.log_probs.row(r) = z.row(r).array() - lse;
    }
    out.hidden = g.value(hidden);
    return out;
  }
};

struct DecoderConfig {
  std::size_t vocab_size = 0;
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff = 0;  // 0 means 4 * width
  std::size_t max_positions = 32;
  double init_std = 0.02;

  std::size_t ff_width() const { return ff == 0 ? 4 * width : ff; }
};

/// Pre-norm transformer decoder in the GPT-2 layout: learned positions,
/// fused QKV attention, tanh-GELU MLP, final layer norm and an output head
/// tied to the token embeddings. Parameter names match GPT-2 state dicts
/// ("wte", "h.0.attn.c_attn.weight", ...), so converted pretrained weights
/// load through from_tensors().
class TinyDecoder : public Backbone {
 public:
  TinyDecoder() = default;

  TinyDecoder(const DecoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    validate();
    const auto d = static_cast<Eigen::Index>(cfg_.width);
    const auto ff = static_cast<Eigen::Index>(cfg_.ff_width());
    const double std = cfg_.init_std;
    const double proj_std = std / std::sqrt(2.0 * static_cast<double>(cfg_.layers));
    add("wte", random(static_cast<Eigen::Index>(cfg_.vocab_size), d, std, rng));
    add("wpe", random(static_cast<Eigen::Index>(cfg_.max_positions), d, std, rng));
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::string p = "h." + std::to_string(l) + ".";
      add(p + "ln_1.weight", Matrix::Ones(1, d));
      add(p + "ln_1.bias", Matrix::Zero(1, d));
      add(p + "attn.c_attn.weight", random(d, 3 * d, std, rng));
      add(p + "attn.c_attn.bias", Matrix::Zero(1, 3 * d));
      add(p + "attn.c_proj.weight", random(d, d, proj_std, rng));
      add(p + "attn.c_proj.bias", Matrix::Zero(1, d));
      add(p + "ln_2.weight", Matrix::Ones(1, d));
      add(p + "ln_2.bias", Matrix::Zero(1, d));
      add(p + "mlp.c_fc.weight", random(d, ff, std, rng));
      add(p + "mlp.c_fc.bias", Matrix::Zero(1, ff));
      add(p + "mlp.c_proj.weight", random(ff, d, proj_std, rng));
      add(p + "mlp.c_proj.bias", Matrix::Zero(1, d));
    }
    add("ln_f.weight", Matrix::Ones(1, d));
    add("ln_f.bias", Matrix::Zero(1, d));
  }

  /// Builds a decoder from named tensors. All sizes except the head count are
  /// read off the tensor shapes.
  static std::unique_ptr<TinyDecoder> from_tensors(const std::map<std::string, Matrix>& tensors,
                                                   std::size_t heads) {
    auto need = [&](const std::string& name) -> const Matrix& {
      auto it = tensors.find(name);
      if (it == tensors.end()) throw InvalidArgument("decoder tensor missing: " + name);
      return it->second;
    };
    DecoderConfig cfg;
    cfg.vocab_size = static_cast<std::size_t>(need("wte").rows());
    cfg.width = static_cast<std::size_t>(need("wte").cols());
    cfg.max_positions = static_cast<std::size_t>(need("wpe").rows());
    cfg.heads = heads;
    std::size_t layers = 0;
    while (tensors.count("h." + std::to_string(layers) + ".ln_1.weight")) ++layers;
    cfg.layers = layers;
    cfg.ff = layers ? static_cast<std::size_t>(need("h.0.mlp.c_fc.weight").cols()) : 4 * cfg.width;
    Rng rng(0);
    auto dec = std::make_unique<TinyDecoder>(cfg, rng);
    for (auto& [name, p] : dec->params_) {
      const Matrix& src = need(name);
      if (src.rows() != p->value.rows() || src.cols() != p->value.cols()) {
        throw InvalidArgument("decoder tensor shape mismatch: " + name);
      }
      p->value = src;
      p->zero_grad();
    }
    return dec;
  }

  const DecoderConfig& config() const { return cfg_; }
  std::size_t width() const override { return cfg_.width; }
  std::size_t vocab_size() const override { return cfg_.vocab_size; }
  std::size_t max_positions() const override { return cfg_.max_positions; }
  const Matrix& token_embeddings() const override { return get("wte").value; }

  Graph::Var embed_tokens(Graph& g, std::span<const TokenId> tokens) override {
    return g.gather_rows(get("wte"), tokens);
  }

  Graph::Var forward(Graph& g, Graph::Var embeddings, Graph::Var* hidden) override {
    const Eigen::Index t = g.value(embeddings).rows();
    if (static_cast<std::size_t>(t) > cfg_.max_positions) {
      throw InvalidArgument("sequence of length " + std::to_string(t) + " exceeds " +
                            std::to_string(cfg_.max_positions) + " positions");
    }
    if (static_cast<std::size_t>(g.value(embeddings).cols()) != cfg_.width) {
      throw InvalidArgument("embedding width mismatch");
    }
    std::vector<int> positions(static_cast<std::size_t>(t));
    for (Eigen::Index i = 0; i < t; ++i) positions[static_cast<std::size_t>(i)] = static_cast<int>(i);
    Graph::Var x = g.add(embeddings, g.gather_rows(get("wpe"), positions));

    const auto d = static_cast<Eigen::Index>(cfg_.width);
    const auto hd = d / static_cast<Eigen::Index>(cfg_.heads);
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::string p = "h." + std::to_string(l) + ".";
      Graph::Var h = g.layer_norm(x, param(g, p + "ln_1.weight"), param(g, p + "ln_1.bias"));
      Graph::Var qkv = g.add_row(g.matmul(h, param(g, p + "attn.c_attn.weight")),
                                 param(g, p + "attn.c_attn.bias"));
      std::vector<Graph::Var> heads;
      heads.reserve(cfg_.heads);
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(cfg_.heads); ++k) {
        Graph::Var q = g.slice_cols(qkv, k * hd, hd);
        Graph::Var kk = g.slice_cols(qkv, d + k * hd, hd);
        Graph::Var v = g.slice_cols(qkv, 2 * d + k * hd, hd);
        Graph::Var att = g.causal_softmax(g.scale(g.matmul_nt(q, kk), attn_scale));
        heads.push_back(g.matmul(att, v));
      }
      Graph::Var merged = heads.size() == 1 ? heads[0] : g.concat_cols(heads);
      Graph::Var attn_out = g.add_row(g.matmul(merged, param(g, p + "attn.c_proj.weight")),
                                      param(g, p + "attn.c_proj.bias"));
      x = g.add(x, attn_out);

      Graph::Var h2 = g.layer_norm(x, param(g, p + "ln_2.weight"), param(g, p + "ln_2.bias"));
      Graph::Var fc = g.gelu(g.add_row(g.matmul(h2, param(g, p + "mlp.c_fc.weight")),
                                       param(g, p + "mlp.c_fc.bias")));
      Graph::Var mlp_out = g.add_row(g.matmul(fc, param(g, p + "mlp.c_proj.weight")),
                                     param(g, p + "mlp.c_proj.bias"));
      x = g.add(x, mlp_out);
    }
    Graph::Var final_h = g.layer_norm(x, param(g, "ln_f.weight"), param(g, "ln_f.bias"));
    if (hidden) *hidden = final_h;
    return g.matmul_nt(final_h, param(g, "wte"));
  }

  std::vector<Parameter*> parameters() override {
    std::vector<Parameter*> out;
    out.reserve(order_.size());
    for (const auto& name : order_) out.push_back(params_.at(name).get());
    return out;
  }

  Parameter& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw InvalidArgument("no decoder parameter " + name);
    return *it->second;
  }
  const Parameter& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw InvalidArgument("no decoder parameter " + name);
    return *it->second;
  }

 private:
  void validate() const {
    if (cfg_.vocab_size < 3) throw InvalidArgument("decoder vocabulary too small");
    if (cfg_.width == 0 || cfg_.heads == 0 || cfg_.width % cfg_.heads != 0) {
      throw InvalidArgument("decoder width must be a positive multiple of heads");
    }
    if (cfg_.max_positions == 0) throw InvalidArgument("decoder needs at least one position");
  }

  static Matrix random(Eigen::Index rows, Eigen::Index cols, double std, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * std;
    return m;
  }

  void add(const std::string& name, Matrix value) {
    params_.emplace(name, std::make_unique<Parameter>(name, std::move(value)));
    order_.push_back(name);
  }

  Graph::Var param(Graph& g, const std::string& name) { return g.param(get(name)); }

  DecoderConfig cfg_;
  // unique_ptr keeps Parameter addresses stable for the tape.
  std::map<std::string, std::unique_ptr<Parameter>> params_;
  std::vector<std::string> order_;
};

}  // namespace aspex
