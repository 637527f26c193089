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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//
//   acceptance [--work-dir DIR] [--only N]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "aspex/aspex.hpp"
#include "support/gradcheck.hpp"
#include "support/metrics_oracle.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using namespace aspex;

namespace {

class QuietWarnings {
 public:
  QuietWarnings() : saved_(warning_sink()) { warning_sink() = [](std::string_view) {}; }
  ~QuietWarnings() { warning_sink() = saved_; }

 private:
  WarningSink saved_;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Scalar reference for one sample, written out term by term.
double db_loss_reference(const std::vector<double>& z, const std::vector<double>& y,
                         const std::vector<double>& w, double lambda, double nu) {
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z[i] - nu;
    s += w[i] * (y[i] * std::log1p(std::exp(-d)) + (1 - y[i]) / lambda * std::log1p(std::exp(lambda * d)));
  }
  return s / static_cast<double>(z.size());
}

Outcome criterion_db_loss() {
  double worst = 0;
  DBLossConfig cfg;
  cfg.nu = {0.05};
  const std::vector<double> one = {1.0};
  worst = std::max(worst, std::abs(db_loss(std::vector<double>{0.05}, one, one, cfg) - std::numbers::ln2));
  for (double lambda : {0.5, 2.0, 5.0}) {
    cfg.lambda = lambda;
    worst = std::max(worst, std::abs(db_loss(std::vector<double>{0.05}, std::vector<double>{0.0}, one, cfg) -
                                     std::numbers::ln2 / lambda));
  }
  Rng rng(91);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(12);
    DBLossConfig c;
    c.lambda = 0.25 + 4.0 * rng.uniform();
    c.nu = {rng.normal() * 0.5};
    std::vector<double> z(n), y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = rng.normal() * 3.0;
      y[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
      w[i] = 0.1 + rng.uniform();
    }
    const double ref = db_loss_reference(z, y, w, c.lambda, c.nu[0]);
    worst = std::max(worst, std::abs(db_loss(z, y, w, c) - ref) / std::max(1.0, std::abs(ref)));
  }
  return {worst < 1e-6, "max error " + fmt("%.2e", worst) + " over 4 closed forms and 100 random cases"};
}

ModelConfig toy_model_config() {
  ModelConfig c;
  c.n_users = 3;
  c.n_items = 4;
  c.n_aspect = 6;
  c.decoder.vocab_size = 16;
  c.decoder.width = 8;
  c.decoder.layers = 2;
  c.decoder.heads = 2;
  c.decoder.ff = 12;
  c.decoder.max_positions = 12;
  c.decoder.init_std = 0.3;
  c.prompt_init_std = 0.5;
  c.head_hidden = {7, 5};
  c.seed = 11;
  return c;
}

Outcome criterion_gradients() {
  ExplainerModel model(toy_model_config());
  const std::vector<TrainingExample> batch = {{0, 1, 2, {4, 5, 6}, "", ""}, {2, 3, 5, {7, 8, 9, 10, 3}, "", ""}};
  const auto gen = testing::grad_check(model.parameters(), [&](bool backward) {
    Graph g(backward);
    Graph::Var loss = model.generation_loss(g, batch, 1, 2);
    if (backward) g.backward(loss);
    return g.scalar(loss);
  });

  std::vector<Parameter*> head = model.head().parameters();
  head.push_back(&model.tables().users);
  head.push_back(&model.tables().items);
  const std::vector<UserId> users = {0, 1, 2, 1};
  const std::vector<ItemId> items = {3, 0, 1, 2};
  Matrix y = Matrix::Zero(4, 6);
  y(0, 0) = y(0, 3) = y(1, 5) = y(2, 0) = y(3, 1) = y(3, 2) = 1.0;
  DBLossConfig cfg;
  const Matrix w = compute_rebalance_weights(y, cfg);
  const auto db = testing::grad_check(head, [&](bool backward) {
    Graph g(backward);
    Graph::Var loss = db_loss(g, model.aspect_logits(g, users, items), y, w, cfg);
    if (backward) g.backward(loss);
    return g.scalar(loss);
  });

  Rng rng(5);
  Matrix mix(4, 6);
  for (Eigen::Index k = 0; k < mix.size(); ++k) mix.data()[k] = rng.normal();
  const auto logits = testing::grad_check(head, [&](bool backward) {
    Graph g(backward);
    Graph::Var z = model.aspect_logits(g, users, items);
    Graph::Var loss = g.scalar_op(z, (g.value(z).array() * mix.array()).sum(), mix);
    if (backward) g.backward(loss);
    return g.scalar(loss);
  });

  const double worst = std::max({gen.max_rel_error, db.max_rel_error, logits.max_rel_error});
  return {worst < 1e-4, "max relative error " + fmt("%.2e", worst) + " over " +
                            std::to_string(gen.checked + db.checked + logits.checked) + " entries"};
}

Outcome criterion_overfit() {
  const auto records = testing::grid_records(20, 10, 5);
  IdMap users, items;
  std::vector<std::string> segs;
  for (const auto& r : records) {
    users.add(r.user);
    items.add(r.item);
    for (const auto& [c, s] : r.segments) segs.push_back(s);
  }
  const auto tok = WhitespaceTokenizer::fit(segs);
  const auto examples = make_examples(records, users, items, tok, 16);

  ModelConfig mc;
  mc.n_users = users.size();
  mc.n_items = items.size();
  mc.n_aspect = 5;
  mc.decoder.vocab_size = tok.vocab_size();
  mc.decoder.width = 32;
  mc.decoder.layers = 2;
  mc.decoder.heads = 2;
  mc.decoder.max_positions = 16 + kPromptLength + 2;
  mc.head_hidden = {16};
  mc.seed = 3;
  ExplainerModel model(mc);
  TrainConfig tc;
  tc.lr = 0.01;
  tc.batch_size = 20;
  tc.max_len = 16;
  tc.stage1_epochs = 150;
  tc.stage1_patience = 20;
  tc.seed = 3;
  Trainer(model, tok.bos(), tok.eos(), tc).train_stage1(examples, examples);

  std::size_t matched = 0, total = 0;
  EvalCorpus corpus;
  for (const auto& ex : examples) {
    const std::vector<CategoryId> chosen = {ex.category};
    const auto out = generate_explanation(model, tok, ex.user, ex.item, chosen, 16);
    total += ex.tokens.size();
    for (std::size_t k = 0; k < ex.tokens.size() && k < out.tokens.size(); ++k) matched += out.tokens[k] == ex.tokens[k];
    EvalEntry e;
    e.user = ex.user;
    e.item = ex.item;
    e.generated = out.text;
    e.references = {ex.text};
    e.features = {ex.feature};
    corpus.entries.push_back(std::move(e));
  }
  const double acc = static_cast<double>(matched) / static_cast<double>(total);
  // The corpus has no item menus, which only matters for iFMR.
  QuietWarnings quiet;
  return {acc >= 0.9, "token accuracy " + fmt("%.3f", acc) + " on " + std::to_string(examples.size()) +
                          " triples, GT-FMR " + fmt("%.3f", feature_match_metrics(corpus).gt_fmr)};
}

Outcome criterion_ranking() {
  constexpr int kUsers = 48, kItems = 13, kAspect = 12;
  // Users per preferred category: a long tail ending in singletons.
  const std::vector<int> per_category = {14, 10, 7, 5, 3, 2, 2, 1, 1, 1, 1, 1};
  std::vector<CategoryId> affinity;
  for (int c = 0; c < kAspect; ++c) affinity.insert(affinity.end(), per_category[c], c);
  Rng rng(17);
  rng.shuffle(affinity);

  std::vector<TrainingExample> train, valid;
  std::vector<PairExample> test;
  for (int u = 0; u < kUsers; ++u) {
    std::vector<int> order(kItems);
    for (int i = 0; i < kItems; ++i) order[i] = i;
    rng.shuffle(order);
    for (int k = 0; k < kItems; ++k) {
      const int i = order[k];
      std::vector<CategoryId> cats = {affinity[u]};
      if (rng.uniform() < 0.15 && (i % kAspect) != affinity[u]) cats.push_back(i % kAspect);
      std::vector<TrainingExample> exs;
      for (CategoryId c : cats) exs.push_back({u, i, c, {3 + c}, "", ""});
      if (k == 0) {
        valid.insert(valid.end(), exs.begin(), exs.end());
      } else if (k <= 2) {
        test.push_back(dedup_pairs(exs, kAspect)[0]);
      } else {
        train.insert(train.end(), exs.begin(), exs.end());
      }
    }
  }

  ModelConfig mc;
  mc.n_users = kUsers;
  mc.n_items = kItems;
  mc.n_aspect = kAspect;
  mc.decoder.vocab_size = 3 + kAspect;
  mc.decoder.width = 16;
  mc.decoder.layers = 1;
  mc.decoder.heads = 2;
  mc.decoder.max_positions = 8;
  mc.head_hidden = {32};
  mc.seed = 2;
  ExplainerModel model(mc);
  TrainConfig tc;
  tc.lr = 0.01;
  tc.batch_size = 32;
  tc.max_len = 4;
  tc.stage2_epochs = 60;
  tc.stage2_patience = 10;
  tc.alpha = 1.0;
  tc.seed = 2;
  Trainer(model, 1, 2, tc).train_stage2(dedup_pairs(train, kAspect), valid);

  std::vector<std::vector<CategoryId>> predicted;
  std::vector<std::set<CategoryId>> truth;
  double baseline = 0;
  const double all = 220.0;  // C(12, 3)
  for (const auto& pe : test) {
    predicted.push_back(top_k_categories(model.aspect_scores(pe.example.user, pe.example.item).scores, 3));
    std::set<CategoryId> t;
    for (int c = 0; c < kAspect; ++c) {
      if (pe.labels[c] > 0.5) t.insert(c);
    }
    const double rest = kAspect - static_cast<double>(t.size());
    baseline += 1.0 - rest * (rest - 1) * (rest - 2) / 6.0 / all;
    truth.push_back(std::move(t));
  }
  baseline /= static_cast<double>(test.size());
  const double hr = aspect_ranking_metrics(predicted, truth, 3).hit_ratio;

  // Rarest two classes by training pair count, ties to the lower id.
  std::vector<int> counts(kAspect, 0);
  for (const auto& pe : dedup_pairs(train, kAspect)) {
    for (int c = 0; c < kAspect; ++c) counts[c] += pe.labels[c] > 0.5;
  }
  std::vector<int> by_count(kAspect);
  for (int c = 0; c < kAspect; ++c) by_count[c] = c;
  std::stable_sort(by_count.begin(), by_count.end(), [&](int a, int b) { return counts[a] < counts[b]; });
  bool rare_ok = true;
  std::string rare;
  for (int r = 0; r < 2; ++r) {
    const int c = by_count[r];
    double hit = 0, n = 0;
    for (std::size_t p = 0; p < test.size(); ++p) {
      if (!truth[p].count(c)) continue;
      n += 1;
      hit += std::find(predicted[p].begin(), predicted[p].end(), c) != predicted[p].end();
    }
    const double recall = n > 0 ? hit / n : 0.0;
    rare_ok = rare_ok && recall > 0;
    rare += " class " + std::to_string(c) + " recall " + fmt("%.2f", recall);
  }
  return {hr >= 2 * baseline && rare_ok,
          "HR@3 " + fmt("%.3f", hr) + " vs random " + fmt("%.3f", baseline) + ";" + rare};
}

Outcome criterion_sampling() {
  const std::vector<double> scores = {0.9, 0.6, 0.3, 0.2, 0.1, 0.05, 0.02};
  const auto [cands, w] = trimmed_weights(scores);
  Rng rng(2026);
  constexpr int kDraws = 100000;
  std::map<CategoryId, double> counts;
  double drawn = 0;
  for (int n = 0; n < kDraws; ++n) {
    for (CategoryId c : sample_supervised(scores, 3, rng).chosen) {
      ++counts[c];
      ++drawn;
    }
  }
  bool ok = counts.count(5) == 0 && counts.count(6) == 0;
  double chi2 = 0, worst = 0;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    const double observed = counts[cands[k]];
    const double expected = w[k] * drawn;
    worst = std::max(worst, std::abs(observed / drawn - w[k]));
    chi2 += (observed - expected) * (observed - expected) / expected;
  }
  const boost::math::chi_squared dist(static_cast<double>(cands.size() - 1));
  const double critical = boost::math::quantile(dist, 1.0 - 0.001);
  ok = ok && worst <= 0.01 && chi2 < critical;
  return {ok, "max frequency gap " + fmt("%.4f", worst) + ", chi2 " + fmt("%.2f", chi2) + " < " + fmt("%.2f", critical)};
}

Outcome criterion_metrics() {
  QuietWarnings quiet;
  Rng rng(2026);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const EvalCorpus c = testing::random_eval_corpus(rng);
    const auto o = testing::brute_force_metrics(c, 3);
    ReportOptions opt;
    opt.rank_k = 3;
    const auto r = compute_report(c, opt);
    const double pairs[][2] = {{r.ifmr, o.ifmr},   {r.gt_fmr, o.gt_fmr},     {r.fcr, o.fcr},
                               {r.ifcr, o.ifcr},   {r.usr, o.usr},           {r.uusr, o.uusr},
                               {r.iusr, o.iusr},   {r.distinct2, o.d2},      {r.distinct3, o.d3},
                               {r.entr, o.entr},   {r.bleu4, o.bleu},        {r.hit_ratio.value_or(0), o.hr},
                               {r.f1.value_or(0), o.f1}};
    for (const auto& p : pairs) worst = std::max(worst, std::abs(p[0] - p[1]));
  }
  return {worst < 1e-12, "max deviation " + fmt("%.2e", worst) + " over 100 random corpora, 13 metrics each"};
}

Outcome criterion_elbow() {
  const auto r = select_elbow_K({{1, 0.297}, {2, 0.245}, {3, 0.238}, {4, 0.182}});
  return {r.k == 3, "selected K=" + std::to_string(r.k)};
}

Outcome criterion_rag() {
  const auto records = testing::grid_records(12, 12, 4, true);
  IdMap users, items;
  AspectHistories histories;
  std::vector<std::string> segs;
  for (const auto& r : records) {
    users.add(r.user);
    items.add(r.item);
    for (const auto& [c, s] : r.segments) {
      segs.push_back(s);
      histories.user[users.at(r.user)].insert(c);
      histories.item[items.at(r.item)].insert(c);
    }
  }
  const auto tok = WhitespaceTokenizer::fit(segs);
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
  ExplainerModel model(mc);
  HashingEncoder enc(64);
  VectorCache cache(enc);
  const PoolSet pools = build_pools(records, cache);
  const AspectInventory inventory = testing::numbered_inventory(4);
  const RagContext ctx{&model, &tok, &users, &items, &histories, &pools, &enc, &inventory};

  auto transcript = [&] {
    EchoReader echo;
    Rng rng(21);
    std::vector<RagResult> rs;
    for (const char* u : {"user0", "user4", "user9"}) {
      for (const char* i : {"place2", "place7"}) rs.push_back(explain_with_reader(ctx, u, i, RagConfig{}, echo, rng));
    }
    std::ostringstream out;
    write_transcript(out, rs);
    return out.str();
  };
  const std::string a = transcript();
  const bool same = !a.empty() && a == transcript();

  const std::vector<PoolEntry> entries = {{"slow service today", "u", "a"}, {"great pasta here", "u", "b"},
                                          {"noisy patio", "u", "c"}};
  Matrix m(3, 64);
  for (int k = 0; k < 3; ++k) m.row(k) = *enc.encode(entries[static_cast<std::size_t>(k)].text);
  const ReviewPool pool(PoolScope::kUser, "u", entries, m);
  const auto hits = retrieve_reviews("great pasta here", pool, 1, enc);
  const bool exact = hits.size() == 1 && hits[0].index == 1 && std::abs(hits[0].similarity - 1.0) < 1e-12;
  return {same && exact, std::string(same ? "transcripts identical" : "transcripts differ") + ", duplicate similarity " +
                             (hits.empty() ? std::string("none") : fmt("%.12f", hits[0].similarity))};
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

Outcome criterion_cli(const fs::path& work) {
#ifndef ASPEX_CLI_PATH
  (void)work;
  return {false, "built without the command line tool"};
#else
  const fs::path dir = work / "cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string prefix = "cd " + shell_quote(ASPEX_SOURCE_DIR) + " && " + shell_quote(ASPEX_CLI_PATH) +
                             " --config data/toy/aspex.toml ";
  const std::string prep = shell_quote((dir / "prep").string());
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"prepare-data", "prepare-data --out " + prep},
      {"train", "train --data " + prep + " --out " + shell_quote((dir / "run").string())},
      {"generate", "generate --data " + prep + " --checkpoint " + shell_quote((dir / "run" / "model.ckpt").string()) +
                       " --strategy supervised --k 3 --out " + shell_quote((dir / "gen.jsonl").string())},
      {"evaluate", "evaluate --data " + prep + " --generations " + shell_quote((dir / "gen.jsonl").string()) +
                       " --out " + shell_quote((dir / "report.json").string())}};
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [name, args] : steps) {
    const std::string cmd = prefix + args + " > " + shell_quote((dir / (name + ".log")).string()) + " 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, name + " failed, see " + (dir / (name + ".log")).string()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (int k = 0; k < 5; ++k) {
    if (!fs::exists(dir / "prep" / ("fold_" + std::to_string(k)) / "manifest.json")) {
      return {false, "fold_" + std::to_string(k) + " manifest missing"};
    }
  }
  std::ifstream in(dir / "report.json");
  const auto report = nlohmann::json::parse(in);
  for (const char* key : {"iFMR", "GT-FMR", "FCR", "iFCR", "head FCR", "tail FCR", "USR", "uUSR", "iUSR",
                          "Distinct-2", "Distinct-3", "ENTR", "BLEU-4", "HR@3", "F1", "MSE", "Cos Sim"}) {
    if (!report.contains(key) || !report[key].is_number()) return {false, std::string("report key ") + key + " not numeric"};
  }
  return {secs < 900, "pipeline took " + fmt("%.1f", secs) + " s, 17 report keys numeric"};
#endif
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "aspex_acceptance";
  int only = 0;
  for (int k = 1; k < argc; ++k) {
    const std::string a = argv[k];
    if (a == "--work-dir" && k + 1 < argc) {
      work = argv[++k];
    } else if (a == "--only" && k + 1 < argc) {
      only = std::atoi(argv[++k]);
    } else {
      std::cerr << "usage: acceptance [--work-dir DIR] [--only N]\n";
      return 2;
    }
  }
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"DB loss closed forms and scalar reference", criterion_db_loss},
      {"analytic gradients match finite differences", criterion_gradients},
      {"ground-truth generation memorizes the training set", criterion_overfit},
      {"aspect ranking beats random on planted affinities", criterion_ranking},
      {"Supervised@3 sampling frequencies", criterion_sampling},
      {"metrics agree with a brute-force oracle", criterion_metrics},
      {"elbow selection", criterion_elbow},
      {"retrieval determinism and exact-duplicate similarity", criterion_rag},
      {"command line pipeline on the toy corpus", [&] { return criterion_cli(work); }},
  };

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only != 0 && static_cast<int>(k + 1) != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << k + 1 << "] " << criteria[k].first << ": " << o.detail
              << " (" << fmt("%.2f", secs) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
