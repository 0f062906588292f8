#include "dfs/learning.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "dfs/detail/prefix_loop.hpp"
#include "dfs/error.hpp"

namespace dfs {

// ---------------------------------------------------------------------------
// TrainConfig

void TrainConfig::validate() const {
  if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
  if (!(l2 >= 0.0)) throw ConfigError("l2 strength must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(rda_delta > 0.0)) throw ConfigError("rda delta must be > 0");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("subsample must be in (0, 1]");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || p != value.data() + value.size())
    throw ConfigError("bad value '" + std::string(value) + "' for '" + std::string(key) + "'");
  return out;
}

}  // namespace

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out << "margin = " << fmt_double(margin) << '\n'
      << "l2 = " << fmt_double(l2) << '\n'
      << "learning_rate = " << fmt_double(learning_rate) << '\n'
      << "epochs = " << epochs << '\n'
      << "rda_delta = " << fmt_double(rda_delta) << '\n'
      << "seed = " << seed << '\n'
      << "prev_labels = " << (prev_labels == PrevLabelSource::gold ? "gold" : "predicted") << '\n'
      << "subsample = " << fmt_double(subsample) << '\n';
  return out.str();
}

TrainConfig parse_train_config(std::string_view text, TrainConfig cfg) {
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    start = nl + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value', got '" + std::string(line) + "'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "margin") cfg.margin = parse_number<double>(key, value);
    else if (key == "l2") cfg.l2 = parse_number<double>(key, value);
    else if (key == "learning_rate" || key == "lr") cfg.learning_rate = parse_number<double>(key, value);
    else if (key == "epochs") cfg.epochs = parse_number<int>(key, value);
    else if (key == "rda_delta") cfg.rda_delta = parse_number<double>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "subsample") cfg.subsample = parse_number<double>(key, value);
    else if (key == "prev_labels") {
      if (value == "predicted") cfg.prev_labels = PrevLabelSource::predicted;
      else if (value == "gold") cfg.prev_labels = PrevLabelSource::gold;
      else throw ConfigError("prev_labels must be 'predicted' or 'gold'");
    } else {
      throw ConfigError("unknown training option '" + std::string(key) + "'");
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_train_config(buf.str(), base);
}

// ---------------------------------------------------------------------------
// Loss and gradient

void GradientSink::count_hinge(std::size_t j) {
  if (hinge_counts_.size() <= j) hinge_counts_.resize(j + 1, 0);
  ++hinge_counts_[j];
}

void GradientSink::coalesce() {
  std::sort(entries_.begin(), entries_.end(), [](const GradientEntry& a, const GradientEntry& b) {
    if (a.template_index != b.template_index) return a.template_index < b.template_index;
    if (a.feature != b.feature) return a.feature < b.feature;
    return a.label < b.label;
  });
  std::size_t out = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (out > 0) {
      auto& last = entries_[out - 1];
      const auto& e = entries_[i];
      if (last.template_index == e.template_index && last.feature == e.feature && last.label == e.label) {
        last.value += e.value;
        continue;
      }
    }
    entries_[out++] = entries_[i];
  }
  entries_.resize(out);
}

void GradientSink::clear() {
  entries_.clear();
  hinge_counts_.clear();
}

bool GradientSink::touches_template(std::size_t j) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [j](const GradientEntry& e) { return e.template_index == j; });
}

LabelId loss_augmented_label(std::span<const double> scores, LabelId gold, double margin) {
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t y = 0; y < scores.size(); ++y) {
    const double v = static_cast<LabelId>(y) == gold ? scores[y] - margin : scores[y];
    if (y == 0 || v > best_value) {
      best = y;
      best_value = v;
    }
  }
  return static_cast<LabelId>(best);
}

double loss_from_trace(const PredictionTrace& trace, LabelId gold, double margin, Objective objective) {
  DFS_CHECK(trace.prefixes.has_value(), "trace has no prefixes");
  const auto& prefixes = *trace.prefixes;
  if (prefixes.empty()) return 0.0;
  if (objective == Objective::final_prefix) return hinge(prefixes.back(), gold, margin);
  double loss = 0.0;
  for (const auto& p : prefixes) loss += hinge(p, gold, margin);
  return loss;
}

void gradient_from_trace(const PredictionTrace& trace, std::span<const std::vector<FeatureId>> ids,
                         LabelId gold, double margin, Objective objective, std::size_t first_trainable,
                         GradientSink& sink) {
  DFS_CHECK(trace.prefixes.has_value(), "trace has no prefixes");
  const auto& prefixes = *trace.prefixes;
  DFS_CHECK(ids.size() >= prefixes.size(), "feature ids missing for scored templates");
  const std::size_t first_k = objective == Objective::final_prefix && !prefixes.empty() ? prefixes.size() - 1 : 0;
  for (std::size_t k = first_k; k < prefixes.size(); ++k) {
    const auto& p = prefixes[k];
    if (hinge(p, gold, margin) <= 0.0) continue;
    const LabelId rival = loss_augmented_label(p, gold, margin);
    // Prefix k (0-based) covers templates 0..k.
    for (std::size_t j = first_trainable; j <= k; ++j) {
      sink.count_hinge(j);
      for (FeatureId f : ids[j]) {
        sink.add(j, f, rival, 1.0);
        sink.add(j, f, gold, -1.0);
      }
    }
  }
}

namespace {

std::vector<std::vector<FeatureId>> lookup_ids(const Model& model, const TaggingContext& ctx, std::size_t count) {
  std::vector<std::vector<FeatureId>> ids(count);
  std::string buf;
  for (std::size_t j = 0; j < count; ++j) {
    extract_into(model.templates[j], ctx, buf);
    if (auto id = model.indexer.lookup(j, buf)) ids[j].push_back(*id);
  }
  return ids;
}

}  // namespace

double example_loss(const Model& model, const TaggingContext& ctx, LabelId gold, double margin) {
  return loss_from_trace(predict_token_train(model, ctx, gold, margin), gold, margin, Objective::prefix_sum);
}

double example_loss(const Model& model, const SparseFeatures& feats, LabelId gold, double margin) {
  return loss_from_trace(predict_token_train(model, feats, gold, margin), gold, margin, Objective::prefix_sum);
}

GradientSink example_gradient(const Model& model, const TaggingContext& ctx, LabelId gold, double margin) {
  const auto trace = predict_token_train(model, ctx, gold, margin);
  const auto ids = lookup_ids(model, ctx, trace.templates_used);
  GradientSink sink;
  gradient_from_trace(trace, ids, gold, margin, Objective::prefix_sum, 0, sink);
  sink.coalesce();
  return sink;
}

GradientSink example_gradient(const Model& model, const SparseFeatures& feats, LabelId gold, double margin) {
  const auto trace = predict_token_train(model, feats, gold, margin);
  GradientSink sink;
  gradient_from_trace(trace, feats.ids, gold, margin, Objective::prefix_sum, 0, sink);
  sink.coalesce();
  return sink;
}

// ---------------------------------------------------------------------------
// Optimizer

OptimizerState::OptimizerState(const Model& model, std::size_t first_trainable)
    : labels_(model.label_count()), first_trainable_(first_trainable) {
  grow(model);
}

void OptimizerState::grow(const Model& model) {
  if (blocks_.size() < model.blocks.size()) blocks_.resize(model.blocks.size());
  for (std::size_t j = 0; j < model.blocks.size(); ++j) {
    const std::size_t rows = model.blocks[j].rows();
    auto& b = blocks_[j];
    if (b.stamp.size() < rows) {
      b.u.resize(rows * labels_, 0.0);
      b.g2.resize(rows * labels_, 0.0);
      b.stamp.resize(rows, 0);
    }
  }
}

double OptimizerState::cumulative_gradient(std::size_t j, FeatureId f, LabelId y) const {
  return blocks_.at(j).u.at(static_cast<std::size_t>(f) * labels_ + static_cast<std::size_t>(y));
}

double OptimizerState::cumulative_squared(std::size_t j, FeatureId f, LabelId y) const {
  return blocks_.at(j).g2.at(static_cast<std::size_t>(f) * labels_ + static_cast<std::size_t>(y));
}

void OptimizerState::refresh_row(Model& model, std::size_t j, FeatureId f, const TrainConfig& cfg) {
  DFS_CHECK(j >= first_trainable_, "refresh of a frozen weight block");
  auto& b = blocks_[j];
  const auto row_index = static_cast<std::size_t>(f);
  if (b.stamp[row_index] == t_) return;
  b.stamp[row_index] = t_;
  const double reg = cfg.learning_rate * cfg.l2 * static_cast<double>(t_);
  auto row = model.blocks[j].row(f);
  const std::size_t base = row_index * labels_;
  for (std::size_t y = 0; y < labels_; ++y) {
    const double u = b.u[base + y];
    row[y] = u == 0.0 ? 0.0 : -cfg.learning_rate * u / (cfg.rda_delta + std::sqrt(b.g2[base + y]) + reg);
  }
}

void OptimizerState::materialize(Model& model, const TrainConfig& cfg) {
  grow(model);
  for (std::size_t j = first_trainable_; j < blocks_.size(); ++j) {
    for (std::size_t f = 0; f < blocks_[j].stamp.size(); ++f) refresh_row(model, j, static_cast<FeatureId>(f), cfg);
  }
}

// Every example advances t, including those with a zero gradient, since each
// one carries its share of the l2 term.
void rda_update(Model& model, OptimizerState& opt, const GradientSink& sink, const TrainConfig& cfg) {
  opt.grow(model);
  for (const auto& e : sink.entries()) {
    if (!std::isfinite(e.value)) {
      throw InvariantError("non-finite gradient " + std::to_string(e.value) + " at template " +
                           std::to_string(e.template_index) + ", feature " + std::to_string(e.feature) +
                           ", label " + std::to_string(e.label));
    }
    DFS_CHECK(e.template_index < model.blocks.size() &&
                  static_cast<std::size_t>(e.feature) < model.blocks[e.template_index].rows(),
              "gradient coordinate outside the weight blocks");
  }
  ++opt.t_;
  for (const auto& e : sink.entries()) {
    auto& b = opt.blocks_[e.template_index];
    const std::size_t idx = static_cast<std::size_t>(e.feature) * opt.labels_ + static_cast<std::size_t>(e.label);
    b.u[idx] += e.value;
    b.g2[idx] += e.value * e.value;
  }
  for (const auto& e : sink.entries()) opt.refresh_row(model, e.template_index, e.feature, cfg);
}

// ---------------------------------------------------------------------------
// Training regimes

namespace {

// Per-token feature cache used while training: trainable templates allocate
// new feature ids, frozen ones only look up. Rows are brought current with
// the optimizer before they are scored.
class TrainingSource {
 public:
  TrainingSource(Model& model, OptimizerState& opt, const TrainConfig& cfg, const TaggingContext& ctx,
                 std::size_t first_trainable)
      : model_(model), opt_(opt), cfg_(cfg), ctx_(ctx), first_trainable_(first_trainable),
        ids_(model.template_count()), ready_(model.template_count(), 0) {}

  std::span<const FeatureId> operator()(std::size_t j) {
    if (!ready_[j]) {
      ready_[j] = 1;
      extract_into(model_.templates[j], ctx_, buf_);
      if (j >= first_trainable_) {
        if (auto id = model_.indexer.intern(j, buf_)) {
          sync_block_rows(model_, j);
          opt_.grow(model_);
          opt_.refresh_row(model_, j, *id, cfg_);
          ids_[j].push_back(*id);
        }
      } else if (auto id = model_.indexer.lookup(j, buf_)) {
        ids_[j].push_back(*id);
      }
    }
    return ids_[j];
  }

  const std::vector<std::vector<FeatureId>>& ids() const { return ids_; }

 private:
  Model& model_;
  OptimizerState& opt_;
  const TrainConfig& cfg_;
  const TaggingContext& ctx_;
  std::size_t first_trainable_;
  std::vector<std::vector<FeatureId>> ids_;
  std::vector<char> ready_;
  std::string buf_;
};

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

double dev_accuracy(const Model& model, const std::vector<Sentence>& dev, const StoppingPolicy& policy) {
  std::size_t correct = 0, total = 0;
  for (const auto& sentence : dev) {
    const auto tagged = tag_sentence(model, sentence, policy);
    for (std::size_t t = 0; t < sentence.size(); ++t) {
      correct += tagged.labels[t] == *sentence.tokens[t].gold;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

struct Regime {
  Objective objective;
  std::size_t first_trainable;
  StoppingPolicy policy;  // left-context predictions and dev selection
  const char* name;
};

void check_training_inputs(const LabelSet& labels, const std::vector<Sentence>& train, const TemplateList& templates,
                           const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty() || token_count(train) == 0) throw EmptyCorpusError("training set is empty");
  if (templates.empty()) throw ConfigError("template list is empty");
  if (labels.size() < 2) throw LabelError("training needs at least 2 labels");
  for (const auto& s : train)
    if (!s.labeled()) throw LabelError("training sentence without gold labels");
}

// Trains the blocks [regime.first_trainable, T) of `model` in place.
TrainStats run_epochs(Model& model, const std::vector<Sentence>& train, const std::vector<Sentence>& dev,
                      const TrainConfig& cfg, const Regime& regime) {
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> pool = shuffled(train.size(), rng);
  if (cfg.subsample < 1.0) {
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.subsample * static_cast<double>(train.size()))));
    pool.resize(std::min(keep, pool.size()));
    std::sort(pool.begin(), pool.end());
  } else {
    std::sort(pool.begin(), pool.end());
  }

  OptimizerState opt(model, regime.first_trainable);
  GradientSink sink;
  TrainStats stats;
  std::vector<WeightBlock> best;
  std::vector<LabelId> left;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled(pool.size(), rng);
    for (std::size_t oi : order) {
      const Sentence& sentence = train[pool[oi]];
      left.clear();
      for (std::size_t t = 0; t < sentence.size(); ++t) {
        const LabelId gold = *sentence.tokens[t].gold;
        const TaggingContext ctx{sentence, t, left, model.labels};
        TrainingSource source(model, opt, cfg, ctx, regime.first_trainable);

        LabelId predicted = gold;
        if (cfg.prev_labels == PrevLabelSource::predicted)
          predicted = detail::predict_loop(model, source, regime.policy, false).label;

        PredictionTrace trace = regime.objective == Objective::prefix_sum
                                    ? detail::train_loop(model, source, gold, cfg.margin)
                                    : detail::predict_loop(model, source, StoppingPolicy::full(), true);
        // Templates scored only by the prediction pass are not part of this example.
        sink.clear();
        gradient_from_trace(trace, source.ids(), gold, cfg.margin, regime.objective, regime.first_trainable, sink);
        sink.coalesce();
        rda_update(model, opt, sink, cfg);
        left.push_back(predicted);
      }
    }
    opt.materialize(model, cfg);
    if (dev.empty()) {
      stats.best_epoch = static_cast<std::size_t>(epoch);
      continue;
    }
    const double acc = dev_accuracy(model, dev, regime.policy);
    stats.dev_accuracy_per_epoch.push_back(acc);
    if (best.empty() || acc > stats.best_dev_accuracy) {
      stats.best_dev_accuracy = acc;
      stats.best_epoch = static_cast<std::size_t>(epoch);
      best = model.blocks;
    }
  }
  if (!best.empty()) {
    model.blocks = std::move(best);
    for (std::size_t j = 0; j < model.template_count(); ++j) sync_block_rows(model, j);
  }
  return stats;
}

std::string provenance(const TrainConfig& cfg, const std::string& regime) {
  return cfg.to_text() + "regime = " + regime + '\n';
}

}  // namespace

Model train_dynamic(const LabelSet& labels, const std::vector<Sentence>& train, const std::vector<Sentence>& dev,
                    const TemplateList& templates, const TrainConfig& cfg, TrainStats* stats) {
  check_training_inputs(labels, train, templates, cfg);
  Model model = make_model(labels, templates, cfg.margin);
  model.vocabulary = build_vocabulary(train);
  const Regime regime{Objective::prefix_sum, 0, StoppingPolicy::dynamic(cfg.margin), "dynamic"};
  auto s = run_epochs(model, train, dev, cfg, regime);
  if (stats) *stats = std::move(s);
  model.indexer.freeze();
  model.provenance = provenance(cfg, "dynamic");
  model.check_invariants();
  return model;
}

Model train_stagewise(const LabelSet& labels, const std::vector<Sentence>& train, const std::vector<Sentence>& dev,
                      const TemplateList& templates, const TrainConfig& cfg) {
  check_training_inputs(labels, train, templates, cfg);
  Model model = make_model(labels, templates.prefix(1), cfg.margin);
  model.vocabulary = build_vocabulary(train);
  for (std::size_t stage = 0; stage < templates.size(); ++stage) {
    if (stage > 0) {
      // Append template `stage` with an empty dictionary and block.
      Model next = make_model(labels, templates.prefix(stage + 1), cfg.margin);
      for (std::size_t j = 0; j < stage; ++j)
        for (const auto& f : model.indexer.features(j)) next.indexer.intern(j, f);
      for (std::size_t j = 0; j < stage; ++j) next.blocks[j] = model.blocks[j];
      next.vocabulary = std::move(model.vocabulary);
      model = std::move(next);
    }
    const Regime regime{Objective::final_prefix, stage, StoppingPolicy::dynamic(cfg.margin), "stagewise"};
    run_epochs(model, train, dev, cfg, regime);
  }
  model.indexer.freeze();
  model.provenance = provenance(cfg, "stagewise");
  model.check_invariants();
  return model;
}

Model train_fixed_prefix(const LabelSet& labels, const std::vector<Sentence>& train,
                         const std::vector<Sentence>& dev, const TemplateList& templates, std::size_t k,
                         const TrainConfig& cfg, TrainStats* stats) {
  if (k < 1 || k > templates.size())
    throw ConfigError("fixed prefix length must be in [1, " + std::to_string(templates.size()) + "]");
  check_training_inputs(labels, train, templates, cfg);
  Model model = make_model(labels, templates.prefix(k), cfg.margin);
  model.vocabulary = build_vocabulary(train);
  const Regime regime{Objective::final_prefix, 0, StoppingPolicy::full(), "fixed"};
  auto s = run_epochs(model, train, dev, cfg, regime);
  if (stats) *stats = std::move(s);
  model.indexer.freeze();
  model.provenance = provenance(cfg, "fixed:" + std::to_string(k));
  model.check_invariants();
  return model;
}

}  // namespace dfs
