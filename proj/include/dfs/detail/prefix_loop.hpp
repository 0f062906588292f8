#pragma once

// Shared incremental scoring loops. `Source` is any callable
// `std::span<const FeatureId>(std::size_t j)` returning the active ids of
// template j; it is invoked only for templates that are actually scored.

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "dfs/inference.hpp"
#include "dfs/model.hpp"

namespace dfs::detail {

// P += contribution of template j, with the contribution summed first so the
// result matches extend_prefix bit for bit.
inline void add_template(const Model& model, std::size_t j, std::span<const FeatureId> ids,
                         std::vector<double>& scratch, std::vector<double>& scores) {
  std::fill(scratch.begin(), scratch.end(), 0.0);
  accumulate_rows(model.blocks[j], ids, scratch);
  for (std::size_t y = 0; y < scores.size(); ++y) scores[y] += scratch[y];
}

template <typename Source>
PredictionTrace predict_loop(const Model& model, Source&& source, const StoppingPolicy& policy,
                             bool keep_prefixes) {
  const std::size_t total = model.template_count();
  std::size_t limit = total;
  if (policy.mode == StoppingPolicy::Mode::fixed) limit = std::min(policy.k, total);

  PredictionTrace trace;
  if (keep_prefixes) trace.prefixes.emplace();
  std::vector<double> scores(model.label_count(), 0.0);
  std::vector<double> scratch(model.label_count(), 0.0);

  for (std::size_t j = 0; j < limit; ++j) {
    add_template(model, j, source(j), scratch, scores);
    if (keep_prefixes) trace.prefixes->push_back(PrefixScores{j + 1, scores});
    if (policy.mode == StoppingPolicy::Mode::dynamic) {
      if (auto leader = margin_satisfied(scores, policy.margin)) {
        trace.label = *leader;
        trace.templates_used = j + 1;
        trace.exited_early = true;
        return trace;
      }
    }
  }
  trace.label = argmax(scores);
  trace.templates_used = limit;
  trace.exited_early = limit < total;
  if (policy.mode == StoppingPolicy::Mode::full) trace.exited_early = margin_satisfied(scores, model.margin).has_value();
  return trace;
}

template <typename Source>
PredictionTrace train_loop(const Model& model, Source&& source, LabelId gold, double margin) {
  const std::size_t total = model.template_count();
  PredictionTrace trace;
  trace.prefixes.emplace();
  trace.prefixes->reserve(total);
  std::vector<double> scores(model.label_count(), 0.0);
  std::vector<double> scratch(model.label_count(), 0.0);
  for (std::size_t j = 0; j < total; ++j) {
    add_template(model, j, source(j), scratch, scores);
    trace.prefixes->push_back(PrefixScores{j + 1, scores});
    if (hinge(scores, gold, margin) == 0.0) {
      trace.label = gold;
      trace.templates_used = j + 1;
      trace.exited_early = true;
      return trace;
    }
  }
  trace.label = argmax(scores);
  trace.templates_used = total;
  return trace;
}

// Frozen-dictionary lookup source over a tagging context.
class LookupSource {
 public:
  LookupSource(const Model& model, const TaggingContext& ctx) : model_(model), ctx_(ctx) {}

  std::span<const FeatureId> operator()(std::size_t j) {
    extract_into(model_.templates[j], ctx_, buf_);
    if (auto id = model_.indexer.lookup(j, buf_)) {
      id_ = *id;
      return {&id_, 1};
    }
    return {};
  }

 private:
  const Model& model_;
  const TaggingContext& ctx_;
  std::string buf_;
  FeatureId id_ = 0;
};

}  // namespace dfs::detail
