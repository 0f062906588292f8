#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfs/features.hpp"
#include "dfs/model.hpp"

namespace dfs {

struct StoppingPolicy {
  enum class Mode { dynamic, fixed, full };

  Mode mode = Mode::full;
  double margin = 0.0;  // dynamic only
  std::size_t k = 0;    // fixed only

  static StoppingPolicy dynamic(double margin) { return {Mode::dynamic, margin, 0}; }
  static StoppingPolicy fixed(std::size_t k) { return {Mode::fixed, 0.0, k}; }
  static StoppingPolicy full() { return {Mode::full, 0.0, 0}; }

  // Throws ConfigError unless margin > 0 (dynamic) or 1 <= k <= templates (fixed).
  void validate(std::size_t templates) const;
  std::string to_string() const;

  bool operator==(const StoppingPolicy&) const = default;
};

// Accepts "full", "fixed:K", "dynamic" (uses default_margin) or "dynamic:M".
StoppingPolicy parse_policy(std::string_view text, double default_margin);

struct PredictionTrace {
  LabelId label = 0;
  std::size_t templates_used = 0;
  std::optional<std::vector<PrefixScores>> prefixes;  // P_1 .. P_used
  bool exited_early = false;
};

// Lazily extracts templates in model order until the policy says stop.
// Templates after the stopping point are never extracted.
PredictionTrace predict_token(const Model& model, const TaggingContext& ctx, const StoppingPolicy& policy,
                              bool keep_prefixes = false);
PredictionTrace predict_token(const Model& model, const SparseFeatures& feats, const StoppingPolicy& policy,
                              bool keep_prefixes = false);

// Training-time variant: stops at the first prefix where `gold` leads every
// other label by `margin` (or after all templates) and keeps every prefix.
PredictionTrace predict_token_train(const Model& model, const TaggingContext& ctx, LabelId gold, double margin);
PredictionTrace predict_token_train(const Model& model, const SparseFeatures& feats, LabelId gold, double margin);

struct TaggedSentence {
  std::vector<LabelId> labels;
  std::vector<std::size_t> templates_used;
};

// Greedy left-to-right tagging; each context sees the predictions made so far.
TaggedSentence tag_sentence(const Model& model, const Sentence& sentence, const StoppingPolicy& policy);

}  // namespace dfs
