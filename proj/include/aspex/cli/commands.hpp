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

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aspex/cli/options.hpp"
#include "aspex/corpus/io.hpp"
#include "aspex/corpus/segmentation.hpp"
#include "aspex/inference/elbow.hpp"
#include "aspex/inference/generate.hpp"
#include "aspex/metrics/embedding.hpp"
#include "aspex/metrics/report.hpp"
#include "aspex/model/explainer.hpp"
#include "aspex/rag/http_reader.hpp"
#include "aspex/rag/pipeline.hpp"

namespace aspex::cli {

/// Writes `j` followed by a newline; two-space indent so diffs stay readable.
inline void write_pretty(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

inline json command_manifest(const char* command, std::uint64_t seed, const json& config) {
  return {{"command", command}, {"seed", seed}, {"config", config}};
}

// ---------------------------------------------------------------------------
// prepare-data

/// Lexicon file: {"terms": {term: category}, "opinions": {word: sentiment},
/// "keywords": {keyword: category}}. Every section is optional.
struct Lexicon {
  std::unique_ptr<LexiconExtractor> extractor;
  std::unique_ptr<KeywordClassifier> classifier;
};

inline Lexicon load_lexicon(const std::string& path, const AspectInventory& inv) {
  Lexicon lex;
  lex.classifier = std::make_unique<KeywordClassifier>();
  if (path.empty()) return lex;
  const json j = io::read_json(path);
  const json term_map = j.value("terms", json::object());
  const json opinion_map = j.value("opinions", json::object());
  const json keyword_map = j.value("keywords", json::object());
  std::map<std::string, LexiconExtractor::Entry> terms;
  for (const auto& [term, cat] : term_map.items()) {
    auto id = inv.find(cat.get<std::string>());
    if (!id) throw ConfigError("lexicon term '" + term + "' maps to unknown category " + cat.dump());
    terms[term] = {*id, Sentiment::kNeutral};
  }
  std::map<std::string, Sentiment> opinions;
  for (const auto& [word, s] : opinion_map.items()) {
    opinions[word] = parse_sentiment(s.get<std::string>());
  }
  lex.extractor = std::make_unique<LexiconExtractor>(std::move(terms), std::move(opinions));
  for (const auto& [kw, cat] : keyword_map.items()) {
    if (!inv.find(cat.get<std::string>())) {
      throw ConfigError("lexicon keyword '" + kw + "' maps to unknown category " + cat.dump());
    }
    lex.classifier->add(kw, cat.get<std::string>());
  }
  return lex;
}

inline int run_prepare(const PrepareOptions& opt, std::uint64_t seed, std::ostream& out) {
  const AspectInventory inv = io::inventory_from_json(io::read_json(opt.inventory));
  Lexicon lex = load_lexicon(opt.lexicon, inv);
  const SegmentMode mode = opt.segment == "full" ? SegmentMode::kFullText : SegmentMode::kSentence;
  SegmentationPipeline pipeline(inv, lex.extractor.get(), lex.classifier.get(), mode);

  std::vector<ReviewRecord> records;
  for (const auto& raw : io::read_raw_reviews(fs::path(opt.input))) {
    if (auto rec = pipeline.process(raw)) records.push_back(std::move(*rec));
  }
  records = merge_pairs(std::move(records), mode);
  const auto& st = pipeline.stats();
  const json seg_stats = {{"reviews_in", st.reviews_in},
                          {"reviews_kept", st.reviews_kept},
                          {"discarded_no_tuples", st.discarded_no_tuples},
                          {"extractor_errors", st.extractor_errors},
                          {"classifier_errors", st.classifier_errors},
                          {"tuples_unmapped", st.tuples_unmapped},
                          {"pairs", records.size()}};

  SplitOptions so;
  so.min_interactions = opt.min_interactions;
  so.train_ratio = opt.train_ratio;
  so.valid_ratio = opt.valid_ratio;
  so.test_ratio = opt.test_ratio;
  so.folds = opt.folds;
  so.seed = seed;
  so.max_len = opt.max_len;
  const auto folds = prune_and_split(std::move(records), so);

  const fs::path root(opt.out);
  for (const auto& ds : folds) {
    json extra = {{"source", opt.input}, {"segmentation", seg_stats}, {"config", opt.to_json()}};
    io::save_fold(root / ("fold_" + std::to_string(ds.fold)), ds, inv, std::move(extra));
    out << "fold " << ds.fold << ": " << ds.train_records.size() << "/" << ds.valid_records.size()
        << "/" << ds.test_records.size() << " pairs, " << ds.train.size() << " train segments\n";
  }
  json m = command_manifest("prepare-data", seed, opt.to_json());
  m["folds"] = opt.folds;
  m["segmentation"] = seg_stats;
  write_pretty(root / "manifest.json", m);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

inline int run_train(const TrainOptions& opt, std::uint64_t seed, std::ostream& out) {
  const fs::path fold_dir = opt.data.fold_dir();
  const io::FoldData fd = io::load_fold(fold_dir);
  const auto& ds = fd.split;

  ModelConfig mc;
  mc.n_users = ds.users.size();
  mc.n_items = ds.items.size();
  mc.n_aspect = fd.inventory.size();
  mc.decoder.vocab_size = fd.tokenizer.vocab_size();
  mc.decoder.width = opt.width;
  mc.decoder.layers = opt.layers;
  mc.decoder.heads = opt.heads;
  mc.decoder.ff = opt.ff;
  mc.decoder.max_positions = opt.resolved_max_positions();
  mc.head_hidden = opt.head_hidden;
  mc.seed = derive_seed(seed, SeedStream::kModel);
  ExplainerModel model(mc);

  TrainConfig tc = opt.train;
  tc.seed = derive_seed(seed, SeedStream::kTraining);
  Trainer trainer(model, fd.tokenizer.bos(), fd.tokenizer.eos(), tc);

  const fs::path dir(opt.out);
  fs::create_directories(dir);
  std::ofstream history = open_output(dir / "history.jsonl");
  trainer.on_epoch([&](const EpochRecord& r) {
    history << to_json(r).dump() << '\n';
    history.flush();
    out << "stage " << r.stage << " epoch " << r.epoch << " valid L_T " << r.valid_gen_loss;
    if (r.valid_aspect_loss) out << " L_DB " << *r.valid_aspect_loss;
    out << (r.improved ? " *" : "") << '\n';
  });

  const TrainHistory h1 = trainer.train_stage1(ds.train, ds.valid);
  const auto pairs = dedup_pairs(ds.train, mc.n_aspect);
  const TrainHistory h2 = trainer.train_stage2(pairs, ds.valid);

  auto summary = [](const TrainHistory& h) {
    return json{{"epochs", h.epochs.size()},
                {"best_epoch", h.best_epoch},
                {"best_value", h.best_value},
                {"early_stopped", h.early_stopped}};
  };
  json extra = {{"fold_dir", fold_dir.string()}, {"seed", seed}};
  save_checkpoint(dir / "model.ckpt", model, fd.tokenizer, fd.inventory, ds.users.keys(),
                  ds.items.keys(), extra);
  json m = command_manifest("train", seed, opt.to_json());
  m["fold_dir"] = fold_dir.string();
  m["model"] = to_json(mc);
  m["stage1"] = summary(h1);
  m["stage2"] = summary(h2);
  write_pretty(dir / "manifest.json", m);
  out << "wrote " << (dir / "model.ckpt").string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// shared inference plumbing

struct LoadedRun {
  io::FoldData fold;
  Checkpoint ck;
  AspectHistories histories;

  const std::vector<ReviewRecord>& records(const std::string& split) const {
    if (split == "train") return fold.split.train_records;
    if (split == "valid") return fold.split.valid_records;
    return fold.split.test_records;
  }
};

inline LoadedRun load_run(const DataOptions& data, const std::string& checkpoint) {
  LoadedRun run;
  run.fold = io::load_fold(data.fold_dir());
  if (!fs::is_regular_file(checkpoint)) throw MissingCheckpoint("checkpoint not found: " + checkpoint);
  run.ck = load_checkpoint(checkpoint);
  if (run.ck.users != run.fold.split.users.keys() || run.ck.items != run.fold.split.items.keys() ||
      run.ck.inventory.names() != run.fold.inventory.names()) {
    throw ConfigError("checkpoint " + checkpoint + " was not trained on fold " + data.fold_dir().string());
  }
  run.histories.user = run.fold.split.user_history;
  run.histories.item = run.fold.split.item_history;
  return run;
}

inline std::vector<std::string> category_names(const std::vector<CategoryId>& ids,
                                               const AspectInventory& inv) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (CategoryId c : ids) out.push_back(inv.name(c));
  return out;
}

inline std::vector<CategoryId> category_ids(const json& names, const AspectInventory& inv) {
  std::vector<CategoryId> out;
  for (const auto& n : names) {
    auto id = inv.find(n.get<std::string>());
    if (!id) throw UnknownId("unknown category " + n.dump());
    out.push_back(*id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// generate

/// One line of a generations file.
struct GenerationLine {
  std::string user;
  std::string item;
  std::string strategy;
  std::vector<std::string> chosen;
  std::vector<std::string> top_aspects;
  std::string text;
  std::optional<std::string> gt_category;

  json to_json() const {
    json j = {{"user", user},        {"item", item},
              {"strategy", strategy}, {"chosen", chosen},
              {"top_aspects", top_aspects}, {"text", text}};
    if (gt_category) j["gt_category"] = *gt_category;
    return j;
  }
};

/// GT@1 emits one line per (pair, ground-truth category); the sampling
/// strategies emit one line per pair.
inline std::vector<GenerationLine> generate_lines(LoadedRun& run, const std::vector<ReviewRecord>& records,
                                                  Strategy strategy, std::size_t k, std::size_t max_len,
                                                  std::size_t limit, Rng& rng) {
  ExplainerModel& model = *run.ck.model;
  const auto& inv = run.ck.inventory;
  const IdMap& users = run.fold.split.users;
  const IdMap& items = run.fold.split.items;
  ModelScorer scorer(model);
  std::vector<GenerationLine> lines;
  std::size_t n = 0;
  for (const auto& rec : records) {
    if (limit && n++ >= limit) break;
    const UserId u = users.at(rec.user);
    const ItemId i = items.at(rec.item);
    auto emit = [&](const AspectSelection& sel, std::optional<CategoryId> gt) {
      GenerationLine line;
      line.user = rec.user;
      line.item = rec.item;
      line.strategy = to_string(strategy, k);
      line.chosen = category_names(sel.chosen, inv);
      line.top_aspects = category_names(sel.ranked, inv);
      line.text = generate_explanation(model, run.ck.tokenizer, u, i, sel.chosen, max_len).text;
      if (gt) line.gt_category = inv.name(*gt);
      lines.push_back(std::move(line));
    };
    if (strategy == Strategy::kGroundTruth) {
      for (const auto& [c, seg] : rec.segments) {
        emit(recommend_aspects(u, i, 1, strategy, nullptr, nullptr, c, rng), c);
      }
    } else {
      emit(recommend_aspects(u, i, k, strategy, &scorer, &run.histories, std::nullopt, rng), std::nullopt);
    }
  }
  return lines;
}

inline int run_generate(const GenerateOptions& opt, std::uint64_t seed, std::ostream& out) {
  LoadedRun run = load_run(opt.data, opt.checkpoint);
  Rng rng(derive_seed(seed, SeedStream::kGeneration));
  const auto lines = generate_lines(run, run.records(opt.split), parse_strategy(opt.strategy), opt.k,
                                    opt.max_len, opt.limit, rng);
  std::ofstream f = open_output(opt.out);
  for (const auto& l : lines) f << l.to_json().dump() << '\n';
  json m = command_manifest("generate", seed, opt.to_json());
  m["lines"] = lines.size();
  write_pretty(opt.out + ".manifest.json", m);
  out << "wrote " << lines.size() << " generations to " << opt.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

inline EvalCorpus build_eval_corpus(const io::FoldData& fd, const std::vector<json>& generations) {
  std::map<std::pair<std::string, std::string>, const ReviewRecord*> by_pair;
  for (const auto* split : {&fd.split.train_records, &fd.split.valid_records, &fd.split.test_records}) {
    for (const auto& r : *split) by_pair.emplace(std::make_pair(r.user, r.item), &r);
  }
  EvalCorpus corpus;
  corpus.index = fd.features;
  for (const auto& g : generations) {
    const std::string user = g.at("user").get<std::string>();
    const std::string item = g.at("item").get<std::string>();
    auto it = by_pair.find({user, item});
    if (it == by_pair.end()) throw UnknownId("generation for unknown pair " + user + "/" + item);
    const ReviewRecord& rec = *it->second;
    EvalEntry e;
    e.user = fd.split.users.at(user);
    e.item = fd.split.items.at(item);
    e.generated = g.at("text").get<std::string>();
    if (g.contains("gt_category")) {
      auto c = fd.inventory.find(g["gt_category"].get<std::string>());
      if (!c || !rec.segments.count(*c)) {
        throw UnknownId("gt_category " + g["gt_category"].dump() + " has no segment for " + user + "/" + item);
      }
      e.references = {rec.segments.at(*c)};
    } else {
      for (const auto& [c, seg] : rec.segments) e.references.push_back(seg);
    }
    for (const auto& t : rec.tuples) e.features.insert(t.aspect_term);
    for (const auto& [c, seg] : rec.segments) e.categories.insert(c);
    e.predicted = category_ids(g.value("top_aspects", json::array()), fd.inventory);
    corpus.entries.push_back(std::move(e));
  }
  return corpus;
}

inline int run_evaluate(const EvaluateOptions& opt, std::uint64_t seed, std::ostream& out) {
  const io::FoldData fd = io::load_fold(opt.data.fold_dir());
  const EvalCorpus corpus = build_eval_corpus(fd, io::read_jsonl(opt.generations));
  HashingEncoder encoder(opt.encoder_dim);
  ReportOptions ro;
  ro.entr_n = opt.entr_n;
  ro.rank_k = opt.rank_k;
  if (opt.encoder == "hashing") ro.encoder = &encoder;
  const MetricsReport report = compute_report(corpus, ro);
  write_pretty(opt.out, to_json(report));
  write_pretty(opt.out + ".manifest.json", command_manifest("evaluate", seed, opt.to_json()));
  if (opt.table) out << to_table(report);
  out << "wrote " << opt.out << " (" << report.pairs << " entries)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// rag-explain

inline std::unique_ptr<Reader> make_reader(const RagOptions& opt) {
  if (opt.reader == "canned") return std::make_unique<CannedReader>(opt.canned_text);
  if (opt.reader == "http") {
    HttpReaderConfig hc;
    hc.endpoint = opt.endpoint;
    hc.path = opt.endpoint_path;
    hc.model = opt.reader_model;
    hc.api_key_env = opt.api_key_env;
    hc.timeout_seconds = opt.timeout;
    return std::make_unique<HttpReader>(hc);
  }
  return std::make_unique<EchoReader>();
}

inline int run_rag(const RagOptions& opt, std::uint64_t seed, std::ostream& out) {
  LoadedRun run = load_run(opt.data, opt.checkpoint);
  HashingEncoder encoder(opt.encoder_dim);
  VectorCache cache(encoder, opt.cache);
  const PoolSet pools = build_pools(run.fold.split.train_records, cache);
  cache.save();
  RagContext ctx{run.ck.model.get(), &run.ck.tokenizer, &run.fold.split.users, &run.fold.split.items,
                 &run.histories,     &pools,             &encoder,             &run.ck.inventory};
  RagConfig cfg;
  cfg.strategy = parse_strategy(opt.strategy);
  cfg.k_aspects = opt.k;
  cfg.k_reviews = opt.k_reviews;
  cfg.max_len = opt.max_len;

  std::vector<std::pair<std::string, std::string>> targets;
  if (!opt.user.empty()) {
    targets.emplace_back(opt.user, opt.item);
  } else {
    for (const auto& r : run.records(opt.split)) {
      if (opt.limit && targets.size() >= opt.limit) break;
      targets.emplace_back(r.user, r.item);
    }
  }

  auto reader = make_reader(opt);
  Rng rng(derive_seed(seed, SeedStream::kRag));
  std::vector<RagResult> results;
  for (const auto& [u, i] : targets) results.push_back(explain_with_reader(ctx, u, i, cfg, *reader, rng));
  std::ofstream f = open_output(opt.out);
  write_transcript(f, results);
  json m = command_manifest("rag-explain", seed, opt.to_json());
  m["encoder"] = encoder.identity();
  m["explanations"] = results.size();
  write_pretty(opt.out + ".manifest.json", m);
  out << "wrote " << results.size() << " explanations to " << opt.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// analyze-aspects

/// Supervised@K BLEU-4 over `records`, references being each pair's segments.
inline double supervised_bleu(LoadedRun& run, const std::vector<ReviewRecord>& records, std::size_t k,
                              std::size_t max_len, Rng& rng) {
  const auto lines = generate_lines(run, records, Strategy::kSupervised, k, max_len, 0, rng);
  std::vector<std::vector<std::string>> cands;
  std::vector<std::vector<std::vector<std::string>>> refs;
  for (std::size_t p = 0; p < lines.size(); ++p) {
    cands.push_back(metric_tokens(lines[p].text));
    std::vector<std::vector<std::string>> r;
    for (const auto& [c, seg] : records[p].segments) r.push_back(metric_tokens(seg));
    refs.push_back(std::move(r));
  }
  return bleu4_multiref(cands, refs);
}

inline int run_analyze(const AnalyzeOptions& opt, std::uint64_t seed, std::ostream& out) {
  LoadedRun run = load_run(opt.data, opt.checkpoint);
  const auto& inv = run.ck.inventory;
  const fs::path dir(opt.out);
  fs::create_directories(dir);

  json neighbors = json::object();
  for (std::size_t c = 0; c < inv.size(); ++c) {
    json list = json::array();
    for (const auto& nb : nearest_features(static_cast<CategoryId>(c), *run.ck.model, run.ck.tokenizer,
                                           run.fold.features, opt.top)) {
      list.push_back({{"feature", nb.feature}, {"similarity", nb.similarity}});
    }
    neighbors[inv.name(static_cast<CategoryId>(c))] = std::move(list);
  }
  write_pretty(dir / "neighbors.json", neighbors);
  {
    std::ofstream tsv = open_output(dir / "embeddings.tsv");
    export_embeddings_tsv(tsv, *run.ck.model, run.ck.tokenizer, run.fold.features, inv);
  }

  json m = command_manifest("analyze-aspects", seed, opt.to_json());
  std::map<int, double> curve;
  if (!opt.bleu.empty()) {
    for (std::size_t k = 0; k < opt.bleu.size(); ++k) curve[static_cast<int>(k + 1)] = opt.bleu[k];
  } else if (opt.curve_max_k) {
    const std::size_t max_k = std::min({opt.curve_max_k, kMaxAspects, inv.size()});
    if (max_k < 3) throw ConfigError("the BLEU curve needs K up to at least 3");
    const auto& records = run.records(opt.split);
    for (std::size_t k = 1; k <= max_k; ++k) {
      Rng rng(derive_seed(seed, SeedStream::kGeneration));
      curve[static_cast<int>(k)] = supervised_bleu(run, records, k, opt.max_len, rng);
      out << "Supervised@" << k << " BLEU-4 " << curve[static_cast<int>(k)] * 100.0 << '\n';
    }
  }
  if (!curve.empty()) {
    const ElbowResult e = select_elbow_K(curve);
    json c = json::object();
    for (const auto& [k, b] : curve) c[std::to_string(k)] = b;
    m["elbow"] = {{"curve", c}, {"k", e.k}, {"drop", e.drop}, {"flat", e.flat}};
    out << "elbow K = " << e.k << '\n';
  }
  write_pretty(dir / "manifest.json", m);
  out << "wrote " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace aspex::cli
