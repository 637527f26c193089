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

#include <string>
#include <vector>

#include "aspex/common.hpp"
#include "aspex/corpus/tokenizer.hpp"
#include "aspex/model/explainer.hpp"
#include "aspex/model/prompt.hpp"

namespace aspex {

struct GenerationOutput {
  std::vector<TokenId> tokens;
  std::string text;
  /// True when decoding ended on <eos> rather than the length cap.
  bool finished = false;
};

/// Greedy decoding conditioned on [u, i, signal, <bos>]. The whole prefix is
/// re-run at each step, which is fine at the sizes this library targets.
inline GenerationOutput generate_explanation(ExplainerModel& model, const Tokenizer& tokenizer,
                                             UserId u, ItemId i, const RowVector& signal,
                                             std::size_t max_len = 20) {
  const PromptTables& tables = model.tables();
  tables.check_ids(u, i);
  TinyDecoder& decoder = model.decoder();
  const auto d = static_cast<Eigen::Index>(decoder.width());
  if (signal.cols() != d) throw InvalidArgument("aspect signal width mismatch");
  const std::size_t cap = std::min(max_len, decoder.max_positions() - kPromptLength - 1);
  const Matrix& wte = decoder.token_embeddings();

  Matrix seq(static_cast<Eigen::Index>(kPromptLength + 1 + cap), d);
  seq.row(0) = tables.users.value.row(u);
  seq.row(1) = tables.items.value.row(i);
  seq.row(2) = signal;
  seq.row(3) = wte.row(tokenizer.bos());
  Eigen::Index len = kPromptLength + 1;

  GenerationOutput out;
  while (out.tokens.size() < cap) {
    const BackboneOutput res = decoder.run(seq.topRows(len));
    Eigen::Index best = 0;
    res.log_probs.row(len - 1).maxCoeff(&best);
    const auto tok = static_cast<TokenId>(best);
    if (tok == tokenizer.eos()) {
      out.finished = true;
      break;
    }
    out.tokens.push_back(tok);
    seq.row(len++) = wte.row(tok);
  }
  out.text = tokenizer.decode(out.tokens);
  return out;
}

/// Fuses `chosen` against the model's aspect table and decodes.
inline GenerationOutput generate_explanation(ExplainerModel& model, const Tokenizer& tokenizer,
                                             UserId u, ItemId i,
                                             std::span<const CategoryId> chosen,
                                             std::size_t max_len = 20) {
  return generate_explanation(model, tokenizer, u, i,
                              fuse_aspect_signal(model.tables().aspects.value, chosen), max_len);
}

}  // namespace aspex
