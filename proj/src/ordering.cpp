#include "dfs/ordering.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "dfs/error.hpp"
#include "dfs/inference.hpp"

namespace dfs {

namespace {

OrderingCandidate evaluate_candidate(const LabelSet& labels, const std::vector<Sentence>& train,
                                     const std::vector<Sentence>& dev, const TemplateList& prefix,
                                     const TrainConfig& cfg) {
  const Model model = train_dynamic(labels, train, dev, prefix, cfg);
  const auto policy = StoppingPolicy::dynamic(cfg.margin);
  std::size_t correct = 0, total = 0, used = 0;
  for (const auto& sentence : dev) {
    const auto tagged = tag_sentence(model, sentence, policy);
    for (std::size_t t = 0; t < sentence.size(); ++t) {
      correct += tagged.labels[t] == *sentence.tokens[t].gold;
      used += tagged.templates_used[t];
      ++total;
    }
  }
  OrderingCandidate c;
  c.name = prefix[prefix.size() - 1].name;
  c.dev_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  c.mean_templates = static_cast<double>(used) / static_cast<double>(total);
  return c;
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

OrderingResult greedy_order(const LabelSet& labels, const std::vector<Sentence>& train,
                            const std::vector<Sentence>& dev, const TemplateList& templates,
                            const TrainConfig& stage_cfg, unsigned threads) {
  if (templates.empty()) throw ConfigError("cannot order an empty template list");
  if (dev.empty() || token_count(dev) == 0) throw EmptyCorpusError("development set is empty");
  stage_cfg.validate();

  OrderingResult result;
  result.stage_config = stage_cfg.to_text();
  std::vector<std::string> remaining = templates.names();
  std::sort(remaining.begin(), remaining.end());

  while (!remaining.empty()) {
    std::vector<OrderingCandidate> stage(remaining.size());
    std::vector<std::string> base = result.permutation;
    auto run = [&](std::size_t c) {
      auto names = base;
      names.push_back(remaining[c]);
      stage[c] = evaluate_candidate(labels, train, dev, templates.select(names), stage_cfg);
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(remaining.size())));
    if (workers == 1) {
      for (std::size_t c = 0; c < remaining.size(); ++c) run(c);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t c = next++; c < remaining.size(); c = next++) run(c);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    result.training_runs += remaining.size();

    // `remaining` is sorted, so strict > keeps the lexicographically smallest name on ties.
    std::size_t best = 0;
    for (std::size_t c = 1; c < stage.size(); ++c)
      if (stage[c].dev_accuracy > stage[best].dev_accuracy) best = c;
    result.permutation.push_back(remaining[best]);
    remaining.erase(remaining.begin() + static_cast<long>(best));
    result.trace.push_back(std::move(stage));
  }
  return result;
}

void write_ordering(std::ostream& out, const OrderingResult& result) {
  out << "# template ordering, best first\n";
  for (const auto& name : result.permutation) out << name << '\n';
  out << "\n[trace]\n";
  out << "# training runs: " << result.training_runs << '\n';
  {
    std::istringstream cfg(result.stage_config);
    std::string line;
    while (std::getline(cfg, line)) out << "# stage config: " << line << '\n';
  }
  out << "# stage candidate dev_accuracy mean_templates\n";
  for (std::size_t s = 0; s < result.trace.size(); ++s)
    for (const auto& c : result.trace[s])
      out << (s + 1) << ' ' << c.name << ' ' << fmt(c.dev_accuracy) << ' ' << fmt(c.mean_templates) << '\n';
}

void write_ordering(const std::filesystem::path& path, const OrderingResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_ordering(out, result);
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

OrderingResult read_ordering(std::istream& in, const std::string& source) {
  OrderingResult result;
  std::string line;
  std::size_t lineno = 0;
  bool in_trace = false;
  const std::string run_prefix = "# training runs: ";
  const std::string cfg_prefix = "# stage config: ";
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "[trace]") {
      in_trace = true;
      continue;
    }
    if (in_trace && line.rfind(run_prefix, 0) == 0) {
      const auto digits = std::string_view(line).substr(run_prefix.size());
      auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), result.training_runs);
      if (ec != std::errc() || end != digits.data() + digits.size())
        throw ParseError(source, lineno, "bad training run count");
      continue;
    }
    if (in_trace && line.rfind(cfg_prefix, 0) == 0) {
      result.stage_config += line.substr(cfg_prefix.size()) + '\n';
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    if (!in_trace) {
      if (line.find_first_of(" \t") != std::string::npos)
        throw ParseError(source, lineno, "template names cannot contain whitespace");
      if (std::find(result.permutation.begin(), result.permutation.end(), line) != result.permutation.end())
        throw ParseError(source, lineno, "template '" + line + "' listed twice");
      result.permutation.push_back(line);
      continue;
    }
    std::istringstream fields(line);
    std::size_t stage = 0;
    OrderingCandidate c;
    if (!(fields >> stage >> c.name >> c.dev_accuracy >> c.mean_templates) || stage == 0)
      throw ParseError(source, lineno, "expected 'stage name dev_accuracy mean_templates'");
    if (stage > result.trace.size() + 1 || stage < result.trace.size())
      throw ParseError(source, lineno, "trace stages out of order");
    if (stage > result.trace.size()) result.trace.emplace_back();
    result.trace.back().push_back(std::move(c));
  }
  if (result.permutation.empty()) throw ParseError(source, lineno, "ordering lists no templates");
  return result;
}

OrderingResult read_ordering(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_ordering(in, path.string());
}

}  // namespace dfs
