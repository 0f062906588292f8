#include "dfs/inference.hpp"

#include <charconv>

#include "dfs/detail/prefix_loop.hpp"
#include "dfs/error.hpp"

namespace dfs {

void StoppingPolicy::validate(std::size_t templates) const {
  switch (mode) {
    case Mode::dynamic:
      if (!(margin > 0.0)) throw ConfigError("dynamic policy requires margin > 0");
      break;
    case Mode::fixed:
      if (k < 1 || k > templates) {
        throw ConfigError("fixed policy requires 1 <= k <= " + std::to_string(templates) + ", got " +
                          std::to_string(k));
      }
      break;
    case Mode::full:
      break;
  }
}

std::string StoppingPolicy::to_string() const {
  switch (mode) {
    case Mode::dynamic: {
      std::string s = "dynamic:";
      char buf[32];
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, margin);
      s.append(buf, end);
      return s;
    }
    case Mode::fixed:
      return "fixed:" + std::to_string(k);
    case Mode::full:
      return "full";
  }
  return "?";
}

StoppingPolicy parse_policy(std::string_view text, double default_margin) {
  auto bad = [&] { return ConfigError("unknown policy '" + std::string(text) + "' (expected dynamic[:M], fixed:K or full)"); };
  if (text == "full") return StoppingPolicy::full();
  if (text == "dynamic") return StoppingPolicy::dynamic(default_margin);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw bad();
  const auto head = text.substr(0, colon);
  const auto arg = text.substr(colon + 1);
  if (head == "fixed") {
    long k = 0;
    auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), k);
    if (ec != std::errc() || p != arg.data() + arg.size()) throw bad();
    if (k < 1) throw ConfigError("fixed policy requires k >= 1");
    return StoppingPolicy::fixed(static_cast<std::size_t>(k));
  }
  if (head == "dynamic") {
    double m = 0.0;
    auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), m);
    if (ec != std::errc() || p != arg.data() + arg.size()) throw bad();
    if (!(m > 0.0)) throw ConfigError("dynamic policy requires margin > 0");
    return StoppingPolicy::dynamic(m);
  }
  throw bad();
}

PredictionTrace predict_token(const Model& model, const TaggingContext& ctx, const StoppingPolicy& policy,
                              bool keep_prefixes) {
  detail::LookupSource source(model, ctx);
  return detail::predict_loop(model, source, policy, keep_prefixes);
}

PredictionTrace predict_token(const Model& model, const SparseFeatures& feats, const StoppingPolicy& policy,
                              bool keep_prefixes) {
  DFS_CHECK(feats.size() == model.template_count(), "sparse features / template count mismatch");
  return detail::predict_loop(
      model, [&](std::size_t j) { return std::span<const FeatureId>(feats.ids[j]); }, policy, keep_prefixes);
}

PredictionTrace predict_token_train(const Model& model, const TaggingContext& ctx, LabelId gold, double margin) {
  detail::LookupSource source(model, ctx);
  return detail::train_loop(model, source, gold, margin);
}

PredictionTrace predict_token_train(const Model& model, const SparseFeatures& feats, LabelId gold, double margin) {
  DFS_CHECK(feats.size() == model.template_count(), "sparse features / template count mismatch");
  return detail::train_loop(
      model, [&](std::size_t j) { return std::span<const FeatureId>(feats.ids[j]); }, gold, margin);
}

TaggedSentence tag_sentence(const Model& model, const Sentence& sentence, const StoppingPolicy& policy) {
  TaggedSentence out;
  out.labels.reserve(sentence.size());
  out.templates_used.reserve(sentence.size());
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    const TaggingContext ctx{sentence, t, out.labels, model.labels};
    const auto trace = predict_token(model, ctx, policy);
    out.labels.push_back(trace.label);
    out.templates_used.push_back(trace.templates_used);
  }
  return out;
}

}  // namespace dfs
