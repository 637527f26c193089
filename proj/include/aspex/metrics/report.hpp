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

#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aspex/metrics/latent.hpp"
#include "aspex/metrics/ranking.hpp"
#include "aspex/metrics/text_metrics.hpp"

namespace aspex {

struct MetricsReport {
  double ifmr = 0.0;
  double gt_fmr = 0.0;
  double fcr = 0.0;
  double ifcr = 0.0;
  double head_fcr = 0.0;
  double tail_fcr = 0.0;
  double usr = 0.0;
  double uusr = 0.0;
  double iusr = 0.0;
  double distinct2 = 0.0;
  double distinct3 = 0.0;
  double entr = 0.0;
  double bleu4 = 0.0;
  std::size_t rank_k = 3;
  std::optional<double> hit_ratio;
  std::optional<double> f1;
  std::optional<double> latent_mse;
  std::optional<double> latent_cosine;
  std::size_t pairs = 0;
};

struct ReportOptions {
  std::size_t entr_n = 1;
  std::size_t rank_k = 3;
  const SentenceEncoder* encoder = nullptr;
};

inline MetricsReport compute_report(const EvalCorpus& corpus, const ReportOptions& opt = {}) {
  if (corpus.entries.empty()) throw InvalidArgument("cannot evaluate an empty corpus");
  MetricsReport r;
  r.pairs = corpus.entries.size();
  const auto fm = feature_match_metrics(corpus);
  r.ifmr = fm.ifmr;
  r.gt_fmr = fm.gt_fmr;
  const auto cov = coverage_metrics(corpus);
  r.fcr = cov.fcr;
  r.ifcr = cov.ifcr;
  r.head_fcr = cov.head_fcr;
  r.tail_fcr = cov.tail_fcr;
  const auto uniq = uniqueness_metrics(corpus);
  r.usr = uniq.usr;
  r.uusr = uniq.uusr;
  r.iusr = uniq.iusr;
  const auto div = diversity_metrics(corpus, opt.entr_n);
  r.distinct2 = div.distinct2;
  r.distinct3 = div.distinct3;
  r.entr = div.entr;
  r.bleu4 = bleu4_multiref(corpus);

  r.rank_k = opt.rank_k;
  std::vector<std::vector<CategoryId>> predicted;
  std::vector<std::set<CategoryId>> truth;
  for (const auto& e : corpus.entries) {
    if (e.predicted.empty()) continue;
    predicted.push_back(e.predicted);
    truth.push_back(e.categories);
  }
  if (!predicted.empty()) {
    const auto rm = aspect_ranking_metrics(predicted, truth, opt.rank_k);
    if (rm.skipped) warn(std::to_string(rm.skipped) + " pair(s) without ground-truth categories skipped");
    r.hit_ratio = rm.hit_ratio;
    r.f1 = rm.f1;
  }
  if (opt.encoder) {
    std::vector<std::string> gen;
    std::vector<std::string> ref;
    for (const auto& e : corpus.entries) {
      if (e.references.empty()) continue;
      gen.push_back(e.generated);
      ref.push_back(e.references.front());
    }
    const auto lm = latent_metrics(gen, ref, *opt.encoder);
    r.latent_mse = lm.mse;
    r.latent_cosine = lm.cosine;
  }
  return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  const std::string hr = "HR@" + std::to_string(r.rank_k);
  return nlohmann::json{{"pairs", r.pairs},
                        {"iFMR", r.ifmr},
                        {"GT-FMR", r.gt_fmr},
                        {"FCR", r.fcr},
                        {"iFCR", r.ifcr},
                        {"head FCR", r.head_fcr},
                        {"tail FCR", r.tail_fcr},
                        {"USR", r.usr},
                        {"uUSR", r.uusr},
                        {"iUSR", r.iusr},
                        {"Distinct-2", r.distinct2},
                        {"Distinct-3", r.distinct3},
                        {"ENTR", r.entr},
                        {"BLEU-4", r.bleu4 * 100.0},
                        {hr, opt(r.hit_ratio)},
                        {"F1", opt(r.f1)},
                        {"MSE", opt(r.latent_mse)},
                        {"Cos Sim", opt(r.latent_cosine)}};
}

/// Names every MetricsReport JSON export carries.
inline std::vector<std::string> report_keys(std::size_t rank_k = 3) {
  return {"iFMR", "GT-FMR",     "FCR",        "iFCR", "head FCR", "tail FCR",
          "USR",  "uUSR",       "iUSR",       "Distinct-2", "Distinct-3", "ENTR",
          "BLEU-4", "HR@" + std::to_string(rank_k), "F1", "MSE", "Cos Sim"};
}

/// Plain-text table grouped as Factuality | Aspect-wise | Diversity | Other.
inline std::string to_table(const MetricsReport& r) {
  struct Cell {
    std::string name;
    std::optional<double> value;
  };
  const std::vector<std::pair<std::string, std::vector<Cell>>> groups = {
      {"Factuality", {{"iFMR", r.ifmr}, {"GT-FMR", r.gt_fmr}}},
      {"Aspect-wise", {{"FCR", r.fcr}, {"iFCR", r.ifcr}, {"head FCR", r.head_fcr},
                       {"tail FCR", r.tail_fcr}}},
      {"Diversity", {{"USR", r.usr}, {"uUSR", r.uusr}, {"iUSR", r.iusr}, {"D-2", r.distinct2},
                     {"D-3", r.distinct3}, {"ENTR", r.entr}}},
      {"Other", {{"BLEU-4", r.bleu4 * 100.0}, {"HR@" + std::to_string(r.rank_k), r.hit_ratio},
                 {"F1", r.f1}, {"MSE", r.latent_mse}, {"Cos Sim", r.latent_cosine}}}};
  std::ostringstream head;
  std::ostringstream names;
  std::ostringstream values;
  for (const auto& [group, cells] : groups) {
    const std::size_t width = cells.size() * 10;
    head << std::left << std::setw(static_cast<int>(width)) << group << "| ";
    for (const auto& c : cells) {
      names << std::right << std::setw(9) << c.name << ' ';
      if (c.value) {
        values << std::right << std::setw(9) << std::fixed << std::setprecision(4) << *c.value << ' ';
      } else {
        values << std::right << std::setw(9) << "-" << ' ';
      }
    }
    names << "| ";
    values << "| ";
  }
  return head.str() + "\n" + names.str() + "\n" + values.str() + "\n";
}

}  // namespace aspex
