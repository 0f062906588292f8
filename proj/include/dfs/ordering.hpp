#pragma once

// Greedy stagewise template ordering: at each stage every remaining template
// is appended to the current prefix, a model is trained, and the template
// giving the best development accuracy is kept.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dfs/corpus.hpp"
#include "dfs/features.hpp"
#include "dfs/learning.hpp"

namespace dfs {

struct OrderingCandidate {
  std::string name;
  double dev_accuracy = 0.0;
  double mean_templates = 0.0;  // recorded, not used for selection

  bool operator==(const OrderingCandidate&) const = default;
};

struct OrderingResult {
  std::vector<std::string> permutation;
  // trace[s] holds one entry per candidate evaluated at stage s, sorted by name.
  std::vector<std::vector<OrderingCandidate>> trace;
  std::size_t training_runs = 0;
  std::string stage_config;  // TrainConfig text used for stage models

  bool operator==(const OrderingResult&) const = default;
};

// `stage_cfg` is used for every candidate model (typically fewer epochs and a
// subsample). Candidates within a stage run on up to `threads` threads; the
// result does not depend on the thread count.
OrderingResult greedy_order(const LabelSet& labels, const std::vector<Sentence>& train,
                            const std::vector<Sentence>& dev, const TemplateList& templates,
                            const TrainConfig& stage_cfg, unsigned threads = 1);

// Text form: template names one per line, a blank line, then a [trace]
// section of `stage name dev_accuracy mean_templates` rows.
void write_ordering(std::ostream& out, const OrderingResult& result);
void write_ordering(const std::filesystem::path& path, const OrderingResult& result);
OrderingResult read_ordering(std::istream& in, const std::string& source = "<stream>");
OrderingResult read_ordering(const std::filesystem::path& path);

}  // namespace dfs
