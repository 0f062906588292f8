#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfs/corpus.hpp"
#include "dfs/features.hpp"

namespace dfs {

// Weights for one template: rows are feature ids, columns are labels
// (row-major, label-minor).
class WeightBlock {
 public:
  WeightBlock() = default;
  WeightBlock(std::size_t rows, std::size_t labels) : labels_(labels), weights_(rows * labels, 0.0) {}

  std::size_t rows() const { return labels_ == 0 ? 0 : weights_.size() / labels_; }
  std::size_t labels() const { return labels_; }

  std::span<double> row(FeatureId f) {
    return {weights_.data() + static_cast<std::size_t>(f) * labels_, labels_};
  }
  std::span<const double> row(FeatureId f) const {
    return {weights_.data() + static_cast<std::size_t>(f) * labels_, labels_};
  }
  double& at(FeatureId f, LabelId y) { return weights_[static_cast<std::size_t>(f) * labels_ + static_cast<std::size_t>(y)]; }
  double at(FeatureId f, LabelId y) const { return weights_[static_cast<std::size_t>(f) * labels_ + static_cast<std::size_t>(y)]; }

  // Grows (zero-filled) or shrinks to `rows` rows.
  void resize_rows(std::size_t rows) { weights_.resize(rows * labels_, 0.0); }

  std::vector<double>& data() { return weights_; }
  const std::vector<double>& data() const { return weights_; }

  bool operator==(const WeightBlock&) const = default;

 private:
  std::size_t labels_ = 0;
  std::vector<double> weights_;
};

struct Model {
  LabelSet labels;
  TemplateList templates;  // in scoring order
  FeatureIndexer indexer;
  std::vector<WeightBlock> blocks;
  double margin = 1.0;
  Vocabulary vocabulary;
  std::string provenance;  // training configuration echo, free text

  std::size_t template_count() const { return templates.size(); }
  std::size_t label_count() const { return labels.size(); }

  // Throws InvariantError when block shapes disagree with the indexer.
  void check_invariants() const;

  bool operator==(const Model&) const = default;
};

// Zero-weight model with empty dictionaries, ready for training.
Model make_model(LabelSet labels, TemplateList templates, double margin);

// Grows block j so that every id the indexer has allocated has a row.
void sync_block_rows(Model& model, std::size_t j);

struct PrefixScores {
  std::size_t length = 0;  // number of templates included
  std::vector<double> scores;

  static PrefixScores zero(std::size_t labels) { return {0, std::vector<double>(labels, 0.0)}; }
  bool operator==(const PrefixScores&) const = default;
};

// out[y] += sum over ids f of block[f, y], features in order.
void accumulate_rows(const WeightBlock& block, std::span<const FeatureId> ids, std::span<double> out);

// The vector [w_j . phi_j(x, y)]_y for template j.
std::vector<double> template_contribution(const Model& model, std::size_t j, std::span<const FeatureId> ids);
std::vector<double> template_contribution(const Model& model, std::size_t j, const SparseFeatures& feats);

PrefixScores extend_prefix(const PrefixScores& prev, std::span<const double> contribution);

// Highest-scoring label; ties go to the lowest id.
LabelId argmax(std::span<const double> scores);

// max over y' != y of scores[y'] (lowest id wins ties; -inf with one label).
double best_rival(std::span<const double> scores, LabelId y);

// max{0, m + max_{y' != y} P_{y'} - P_y}: zero iff y leads every rival by m.
double hinge(std::span<const double> scores, LabelId y, double margin);
inline double hinge(const PrefixScores& p, LabelId y, double margin) { return hinge(p.scores, y, margin); }

// The label whose hinge is zero, if any. At most one exists when margin > 0.
std::optional<LabelId> margin_satisfied(std::span<const double> scores, double margin);
inline std::optional<LabelId> margin_satisfied(const PrefixScores& p, double margin) {
  return margin_satisfied(p.scores, margin);
}

inline constexpr std::string_view kModelMagic = "DFSMODEL";
inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const Model& model, std::ostream& out);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(std::istream& in, const std::string& source = "<stream>");
Model load_model(const std::filesystem::path& path);

}  // namespace dfs
