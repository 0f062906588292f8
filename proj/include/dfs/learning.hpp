#pragma once

// Training for prefix-accurate linear models.
//
// The dynamic objective treats the model as a sequence of prefix
// classifiers: per example it sums the margin hinge of every prefix up to
// the first one where the gold label leads by the margin (i*). Parameters
// are fit with AdaGrad step sizes and l2-regularized dual averaging:
//
//   w = -eta * u / (delta + sqrt(G) + eta * lambda * t)
//
// per coordinate, where u and G are the cumulative gradient and squared
// gradient and t counts updates.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dfs/corpus.hpp"
#include "dfs/features.hpp"
#include "dfs/inference.hpp"
#include "dfs/model.hpp"

namespace dfs {

enum class PrevLabelSource { predicted, gold };

struct TrainConfig {
  double margin = 1.0;
  double l2 = 1e-6;
  double learning_rate = 0.5;
  int epochs = 5;
  double rda_delta = 1.0;
  std::uint64_t seed = 1;
  PrevLabelSource prev_labels = PrevLabelSource::predicted;
  double subsample = 1.0;  // fraction of training sentences used per run

  void validate() const;
  // `key = value` lines; parse_train_config accepts the same keys and ignores '#' comments.
  std::string to_text() const;
  bool operator==(const TrainConfig&) const = default;
};

TrainConfig parse_train_config(std::string_view text, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});

struct GradientEntry {
  std::size_t template_index;
  FeatureId feature;
  LabelId label;
  double value;

  bool operator==(const GradientEntry&) const = default;
};

// Sparse per-example gradient, plus a per-template count of the hinge
// gradients each template received.
class GradientSink {
 public:
  void add(std::size_t j, FeatureId f, LabelId y, double g) { entries_.push_back({j, f, y, g}); }
  void count_hinge(std::size_t j);

  // Sums duplicate coordinates; entries end up sorted by (template, feature, label).
  void coalesce();
  void clear();

  bool empty() const { return entries_.empty(); }
  const std::vector<GradientEntry>& entries() const { return entries_; }
  bool touches_template(std::size_t j) const;
  std::size_t hinge_count(std::size_t j) const { return j < hinge_counts_.size() ? hinge_counts_[j] : 0; }

 private:
  std::vector<GradientEntry> entries_;
  std::vector<std::size_t> hinge_counts_;
};

// argmax_y' P_y' - margin * [y' == gold], ties to the lowest id.
LabelId loss_augmented_label(std::span<const double> scores, LabelId gold, double margin);
inline LabelId loss_augmented_label(const PrefixScores& p, LabelId gold, double margin) {
  return loss_augmented_label(p.scores, gold, margin);
}

enum class Objective {
  prefix_sum,    // sum of hinges over prefixes 1..i*
  final_prefix,  // single multiclass hinge on the last prefix computed
};

// Sum of hinge values the objective charges for `trace`.
double loss_from_trace(const PredictionTrace& trace, LabelId gold, double margin, Objective objective);

// Subgradient of the objective for `trace`. ids[j] are the active features of
// template j. Only templates with index >= first_trainable receive entries.
void gradient_from_trace(const PredictionTrace& trace, std::span<const std::vector<FeatureId>> ids,
                         LabelId gold, double margin, Objective objective, std::size_t first_trainable,
                         GradientSink& sink);

double example_loss(const Model& model, const TaggingContext& ctx, LabelId gold, double margin);
double example_loss(const Model& model, const SparseFeatures& feats, LabelId gold, double margin);
GradientSink example_gradient(const Model& model, const TaggingContext& ctx, LabelId gold, double margin);
GradientSink example_gradient(const Model& model, const SparseFeatures& feats, LabelId gold, double margin);

// Dual-averaging state mirroring the model's weight blocks.
class OptimizerState {
 public:
  OptimizerState() = default;
  // Only blocks with index >= first_trainable are owned (and ever rewritten).
  explicit OptimizerState(const Model& model, std::size_t first_trainable = 0);

  std::uint64_t updates() const { return t_; }
  void grow(const Model& model);

  double cumulative_gradient(std::size_t j, FeatureId f, LabelId y) const;
  double cumulative_squared(std::size_t j, FeatureId f, LabelId y) const;

  // Recomputes one row from (u, G, t) if it is stale.
  void refresh_row(Model& model, std::size_t j, FeatureId f, const TrainConfig& cfg);
  // Brings every owned row current.
  void materialize(Model& model, const TrainConfig& cfg);

 private:
  friend void rda_update(Model&, OptimizerState&, const GradientSink&, const TrainConfig&);

  struct Block {
    std::vector<double> u;
    std::vector<double> g2;
    std::vector<std::uint64_t> stamp;  // value of t when the row was last written
  };
  std::vector<Block> blocks_;
  std::size_t labels_ = 0;
  std::size_t first_trainable_ = 0;
  std::uint64_t t_ = 0;
};

// One optimizer step: t += 1, u += g, G += g^2 on touched coordinates, then
// rewrites the touched rows. `sink` must be coalesced. Throws InvariantError
// on a non-finite gradient.
void rda_update(Model& model, OptimizerState& opt, const GradientSink& sink, const TrainConfig& cfg);

struct TrainStats {
  std::size_t best_epoch = 0;      // 1-based epoch whose snapshot was kept
  double best_dev_accuracy = 0.0;  // on the selection policy
  std::vector<double> dev_accuracy_per_epoch;
};

// Trains every prefix of `templates` to be a good classifier on its own.
Model train_dynamic(const LabelSet& labels, const std::vector<Sentence>& train, const std::vector<Sentence>& dev,
                    const TemplateList& templates, const TrainConfig& cfg, TrainStats* stats = nullptr);

// Baseline: template s is trained alone on top of frozen blocks 1..s-1.
Model train_stagewise(const LabelSet& labels, const std::vector<Sentence>& train, const std::vector<Sentence>& dev,
                      const TemplateList& templates, const TrainConfig& cfg);

// Baseline: ordinary multiclass hinge training on the first k templates.
Model train_fixed_prefix(const LabelSet& labels, const std::vector<Sentence>& train,
                         const std::vector<Sentence>& dev, const TemplateList& templates, std::size_t k,
                         const TrainConfig& cfg, TrainStats* stats = nullptr);

}  // namespace dfs
