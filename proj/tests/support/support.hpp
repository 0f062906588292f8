#pragma once

// Shared fixtures for unit, integration and acceptance tests: planted
// corpora, random models and independent scoring oracles.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dfs/corpus.hpp"
#include "dfs/features.hpp"
#include "dfs/inference.hpp"
#include "dfs/model.hpp"

namespace dfs::testing {

inline std::filesystem::path source_root() { return DFS_SOURCE_DIR; }
inline std::filesystem::path bundled_corpus() { return source_root() / "data" / "synth-pos"; }

// ---------------------------------------------------------------------------
// Planted corpora

// Each token's form is  <c1><middle><clast>  with a two-label gold sequence.
// Every cue agrees with the gold label with its planted probability and with
// the other label otherwise, so a classifier seeing only that cue gets about
// that accuracy. Cue order: p1, s1, has-upper, has-digit, has-hyphen.
struct PlantedCues {
  double p1 = 0.5;
  double s1 = 0.5;
  double upper = 0.5;
  double digit = 0.5;
  double hyphen = 0.5;
};

struct PlantedCorpus {
  LabelSet labels{std::vector<std::string>{"A", "B"}};
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
};

inline std::vector<Sentence> planted_sentences(const PlantedCues& cues, std::size_t sentences,
                                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> len(3, 8);
  std::uniform_int_distribution<int> mid_len(2, 4);
  std::uniform_int_distribution<int> letter('m', 'z');
  auto agree = [&](double q) { return unit(rng) < q; };
  std::vector<Sentence> out;
  for (std::size_t s = 0; s < sentences; ++s) {
    Sentence sent;
    const int n = len(rng);
    for (int t = 0; t < n; ++t) {
      const LabelId y = unit(rng) < 0.5 ? 0 : 1;
      auto cue = [&](double q) { return agree(q) ? y : 1 - y; };
      std::string form;
      form += cue(cues.p1) == 0 ? 'a' : 'b';
      const int mids = mid_len(rng);
      for (int i = 0; i < mids; ++i) form += static_cast<char>(letter(rng));
      if (cue(cues.upper) == 0) form += 'Q';
      if (cue(cues.digit) == 0) form += '7';
      if (cue(cues.hyphen) == 0) form += '-';
      form += cue(cues.s1) == 0 ? 'c' : 'd';
      sent.tokens.push_back({form, y});
    }
    out.push_back(std::move(sent));
  }
  return out;
}

inline PlantedCorpus planted_corpus(const PlantedCues& cues, std::size_t train, std::size_t dev,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PlantedCorpus c;
  c.train = planted_sentences(cues, train, rng);
  c.dev = planted_sentences(cues, dev, rng);
  return c;
}

// Six templates over the planted cues plus a pure-noise neighbour template.
inline TemplateList planted_templates() {
  return parse_templates(
      "p1 prefix 1 0\n"
      "s1 suffix 1 0\n"
      "upper has-upper\n"
      "digit has-digit\n"
      "hyphen has-hyphen\n"
      "w-1 word -1\n");
}

// ---------------------------------------------------------------------------
// Random models and contexts

inline std::vector<std::string> small_lexicon() {
  return {"the", "cat", "Dogs", "ran", "over", "a", "mat", "of", "12", "well-known", "I", "runs", "quickly",
          "Paris", "é"};
}

inline Sentence random_sentence(std::mt19937_64& rng, const LabelSet& labels, std::size_t max_len = 8,
                                bool with_unknown = true) {
  const auto lex = small_lexicon();
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> word(0, lex.size() - 1);
  std::uniform_int_distribution<int> label(0, static_cast<int>(labels.size()) - 1);
  std::uniform_int_distribution<int> coin(0, 9);
  Sentence s;
  const std::size_t n = len(rng);
  for (std::size_t t = 0; t < n; ++t) {
    std::string form = lex[word(rng)];
    if (with_unknown && coin(rng) == 0) form += "zz" + std::to_string(word(rng));
    s.tokens.push_back({form, static_cast<LabelId>(label(rng))});
  }
  return s;
}

inline std::vector<LabelId> random_prev_labels(std::mt19937_64& rng, const LabelSet& labels, std::size_t n) {
  std::uniform_int_distribution<int> label(0, static_cast<int>(labels.size()) - 1);
  std::vector<LabelId> out(n);
  for (auto& y : out) y = static_cast<LabelId>(label(rng));
  return out;
}

inline LabelSet make_labels(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("L" + std::to_string(i));
  return LabelSet(names);
}

// Interns features seen on random sentences, fills every weight from `dist`,
// then freezes the dictionaries.
template <typename Dist>
Model random_model(std::mt19937_64& rng, const LabelSet& labels, const TemplateList& templates, Dist dist,
                   double margin = 1.0, std::size_t warmup_sentences = 30) {
  Model model = make_model(labels, templates, margin);
  for (std::size_t s = 0; s < warmup_sentences; ++s) {
    const Sentence sent = random_sentence(rng, labels, 8, false);
    const auto prev = random_prev_labels(rng, labels, sent.size());
    for (std::size_t t = 0; t < sent.size(); ++t) {
      TaggingContext ctx{sent, t, std::span<const LabelId>(prev.data(), t), labels};
      extract_all(templates, model.indexer, ctx, false);
      model.vocabulary.insert(sent.tokens[t].form);
    }
  }
  for (std::size_t j = 0; j < templates.size(); ++j) {
    sync_block_rows(model, j);
    for (auto& w : model.blocks[j].data()) w = dist(rng);
  }
  model.indexer.freeze();
  return model;
}

// Random template subset of the default list, in random order.
inline TemplateList random_templates(std::mt19937_64& rng, std::size_t max_count) {
  auto specs = default_template_list().specs();
  std::shuffle(specs.begin(), specs.end(), rng);
  std::uniform_int_distribution<std::size_t> count(1, std::min(max_count, specs.size()));
  specs.resize(count(rng));
  return TemplateList(specs);
}

// Random sparse features over `rows` rows per template, no duplicate ids.
inline SparseFeatures random_sparse(std::mt19937_64& rng, std::size_t templates, std::size_t rows,
                                    std::size_t max_active = 3) {
  SparseFeatures f;
  std::uniform_int_distribution<std::size_t> active(0, max_active);
  for (std::size_t j = 0; j < templates; ++j) {
    std::vector<FeatureId> all(rows);
    for (std::size_t r = 0; r < rows; ++r) all[r] = static_cast<FeatureId>(r);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min(rows, active(rng)));
    f.ids.push_back(all);
  }
  return f;
}

// Model with `rows` rows per block whose templates are placeholders; used with
// SparseFeatures so no extraction takes place.
template <typename Dist>
Model random_dense_model(std::mt19937_64& rng, std::size_t labels, std::size_t templates, std::size_t rows,
                         Dist dist, double margin = 1.0) {
  std::vector<TemplateSpec> specs;
  for (std::size_t j = 0; j < templates; ++j) specs.push_back({"t" + std::to_string(j), TemplateKind::word, 0, 0});
  Model model = make_model(make_labels(labels), TemplateList(specs), margin);
  for (std::size_t j = 0; j < templates; ++j) {
    model.blocks[j] = WeightBlock(rows, labels);
    for (auto& w : model.blocks[j].data()) w = dist(rng);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Oracles

// Per-template sum over active rows, then running totals: every prefix, eagerly.
inline std::vector<std::vector<double>> eager_prefixes(const Model& model, const SparseFeatures& feats) {
  const std::size_t L = model.label_count();
  std::vector<std::vector<double>> out;
  std::vector<double> running(L, 0.0);
  for (std::size_t j = 0; j < model.template_count(); ++j) {
    std::vector<double> block(L, 0.0);
    for (FeatureId f : feats.ids[j])
      for (std::size_t y = 0; y < L; ++y) block[y] += model.blocks[j].data()[static_cast<std::size_t>(f) * L + y];
    for (std::size_t y = 0; y < L; ++y) running[y] += block[y];
    out.push_back(running);
  }
  return out;
}

inline SparseFeatures frozen_features(const Model& model, const TaggingContext& ctx) {
  FeatureIndexer copy = model.indexer;
  return extract_all(model.templates, copy, ctx, true);
}

// Exhaustive hinge: max over rivals by full scan.
inline double oracle_hinge(const std::vector<double>& p, LabelId y, double m) {
  double rival = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p.size(); ++k)
    if (static_cast<LabelId>(k) != y) rival = std::max(rival, p[k]);
  return std::max(0.0, m + rival - p[static_cast<std::size_t>(y)]);
}

inline std::optional<LabelId> oracle_leader(const std::vector<double>& p, double m) {
  for (std::size_t y = 0; y < p.size(); ++y)
    if (oracle_hinge(p, static_cast<LabelId>(y), m) == 0.0) return static_cast<LabelId>(y);
  return std::nullopt;
}

inline LabelId oracle_argmax(const std::vector<double>& p) {
  std::size_t best = 0;
  for (std::size_t y = 1; y < p.size(); ++y)
    if (p[y] > p[best]) best = y;
  return static_cast<LabelId>(best);
}

struct OracleDecision {
  LabelId label = 0;
  std::size_t templates_used = 0;
};

// Computes all prefixes, then scans for the first margin-clearing index.
inline OracleDecision oracle_dynamic(const Model& model, const SparseFeatures& feats, double m) {
  const auto prefixes = eager_prefixes(model, feats);
  for (std::size_t i = 0; i < prefixes.size(); ++i)
    if (auto y = oracle_leader(prefixes[i], m)) return {*y, i + 1};
  return {oracle_argmax(prefixes.back()), prefixes.size()};
}

// First prefix where the gold label clears the margin, or T.
inline std::size_t oracle_stop_index(const Model& model, const SparseFeatures& feats, LabelId gold, double m) {
  const auto prefixes = eager_prefixes(model, feats);
  for (std::size_t i = 0; i < prefixes.size(); ++i)
    if (oracle_hinge(prefixes[i], gold, m) == 0.0) return i + 1;
  return prefixes.size();
}

inline double oracle_loss(const Model& model, const SparseFeatures& feats, LabelId gold, double m) {
  const auto prefixes = eager_prefixes(model, feats);
  double loss = 0.0;
  for (const auto& p : prefixes) {
    const double h = oracle_hinge(p, gold, m);
    loss += h;
    if (h == 0.0) break;
  }
  return loss;
}

}  // namespace dfs::testing
