#include "dfs/evalbench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "dfs/error.hpp"

namespace dfs {

EvalReport evaluate(const Model& model, const std::vector<Sentence>& test, const StoppingPolicy& policy,
                    unsigned threads) {
  if (test.empty() || token_count(test) == 0) throw EmptyCorpusError("test set is empty");
  policy.validate(model.template_count());
  for (const auto& s : test)
    if (!s.labeled()) throw LabelError("evaluation requires a labeled corpus");

  std::vector<TaggedSentence> tagged(test.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(test.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < test.size(); ++i) tagged[i] = tag_sentence(model, test[i], policy);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < test.size(); i += workers) tagged[i] = tag_sentence(model, test[i], policy);
      });
    }
    for (auto& th : pool) th.join();
  }

  EvalReport r;
  r.policy = policy.to_string();
  r.template_count = model.template_count();
  r.template_histogram.assign(model.template_count() + 1, 0);
  std::size_t used_total = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    for (std::size_t t = 0; t < test[i].size(); ++t) {
      const auto& token = test[i].tokens[t];
      const LabelId pred = tagged[i].labels[t];
      const std::size_t used = tagged[i].templates_used[t];
      const bool ok = pred == *token.gold;
      ++r.tokens;
      r.correct += ok;
      if (!model.vocabulary.contains(token.form)) {
        ++r.unknown_tokens;
        r.unknown_correct += ok;
      }
      used_total += used;
      ++r.template_histogram[used];
      r.predictions.push_back(pred);
      r.templates_used.push_back(used);
    }
  }
  r.token_accuracy = static_cast<double>(r.correct) / static_cast<double>(r.tokens);
  r.unknown_accuracy =
      r.unknown_tokens == 0 ? 0.0 : static_cast<double>(r.unknown_correct) / static_cast<double>(r.unknown_tokens);
  r.mean_templates = static_cast<double>(used_total) / static_cast<double>(r.tokens);
  return r;
}

BenchResult benchmark(const Model& model, const std::vector<Sentence>& test, const StoppingPolicy& policy,
                      int repetitions) {
  if (repetitions < 3) throw ConfigError("benchmark needs at least 3 repetitions");
  policy.validate(model.template_count());
  BenchResult result;
  result.tokens = token_count(test);
  if (result.tokens == 0) throw EmptyCorpusError("benchmark corpus is empty");

  std::size_t used_total = 0;
  for (const auto& s : test) {
    const auto tagged = tag_sentence(model, s, policy);  // warm-up, also gives the proxy
    for (auto u : tagged.templates_used) used_total += u;
  }
  result.template_evals_per_token = static_cast<double>(used_total) / static_cast<double>(result.tokens);

  std::vector<double> rates;
  std::size_t sink = 0;
  for (int rep = 0; rep < repetitions; ++rep) {
    const auto start = std::chrono::steady_clock::now();
    for (const auto& s : test) sink += tag_sentence(model, s, policy).labels.size();
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    result.seconds.push_back(elapsed.count());
    rates.push_back(static_cast<double>(result.tokens) / std::max(elapsed.count(), 1e-12));
  }
  DFS_CHECK(sink == result.tokens * static_cast<std::size_t>(repetitions), "benchmark tagged a different token count");
  std::sort(rates.begin(), rates.end());
  const std::size_t n = rates.size();
  result.tokens_per_second = n % 2 ? rates[n / 2] : 0.5 * (rates[n / 2 - 1] + rates[n / 2]);
  return result;
}

// ---------------------------------------------------------------------------
// Curves

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

CurvePoint point_from(const std::string& series, const EvalReport& r, double tokens_per_sec) {
  CurvePoint p;
  p.series = series;
  p.x = r.mean_templates;
  p.y = r.token_accuracy;
  p.accuracy = r.token_accuracy;
  p.unk_accuracy = r.unknown_accuracy;
  p.mean_templates = r.mean_templates;
  p.tokens_per_sec = tokens_per_sec;
  return p;
}

double measure(const Model& model, const std::vector<Sentence>& test, const StoppingPolicy& policy, int reps) {
  return reps >= 3 ? benchmark(model, test, policy, reps).tokens_per_second : 0.0;
}

std::vector<std::size_t> all_ks(std::vector<std::size_t> ks, std::size_t total) {
  if (ks.empty())
    for (std::size_t k = 1; k <= total; ++k) ks.push_back(k);
  return ks;
}

}  // namespace

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points) {
  out << kCurveCsvHeader << '\n';
  for (const auto& p : points) {
    out << p.series << ',' << fmt(p.x) << ',' << fmt(p.y) << ',' << (p.margin ? fmt(*p.margin) : "") << ','
        << (p.k ? std::to_string(*p.k) : "") << ',' << fmt(p.accuracy) << ',' << fmt(p.unk_accuracy) << ','
        << fmt(p.mean_templates) << ',' << fmt(p.tokens_per_sec) << '\n';
  }
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& points) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_curve_csv(out, points);
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

std::vector<CurvePoint> read_curve_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line != kCurveCsvHeader) throw ParseError(source, 1, "missing or wrong CSV header");
  std::vector<CurvePoint> points;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 9) throw ParseError(source, lineno, "expected 9 CSV fields");
    auto num = [&](const std::string& s) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) throw ParseError(source, lineno, "bad number '" + s + "'");
      return v;
    };
    CurvePoint p;
    p.series = cells[0];
    p.x = num(cells[1]);
    p.y = num(cells[2]);
    if (!cells[3].empty()) p.margin = num(cells[3]);
    if (!cells[4].empty()) p.k = static_cast<std::size_t>(num(cells[4]));
    p.accuracy = num(cells[5]);
    p.unk_accuracy = num(cells[6]);
    p.mean_templates = num(cells[7]);
    p.tokens_per_sec = num(cells[8]);
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<CurvePoint> sweep_margin(const MarginTrainer& trainer, const std::vector<double>& margins,
                                     const std::vector<Sentence>& test, SweepMode mode, int bench_repetitions) {
  if (margins.empty()) throw ConfigError("margin sweep needs at least one margin");
  for (double m : margins)
    if (!(m > 0.0)) throw ConfigError("sweep margins must be > 0");
  std::vector<CurvePoint> points;
  std::optional<Model> shared;
  if (mode == SweepMode::inference_only) shared = trainer(margins.front());
  const std::string series =
      mode == SweepMode::retrain ? "dynamic-margin-sweep" : "dynamic-margin-sweep-inference-only";
  for (double m : margins) {
    std::optional<Model> own;
    if (mode == SweepMode::retrain) own = trainer(m);
    const Model& model = own ? *own : *shared;
    const auto policy = StoppingPolicy::dynamic(m);
    auto p = point_from(series, evaluate(model, test, policy), measure(model, test, policy, bench_repetitions));
    p.margin = m;
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<CurvePoint> sweep_fixed_prefix(const LabelSet& labels, const std::vector<Sentence>& train,
                                           const std::vector<Sentence>& dev, const std::vector<Sentence>& test,
                                           const TemplateList& templates, const TrainConfig& cfg,
                                           std::vector<std::size_t> ks, int bench_repetitions) {
  std::vector<CurvePoint> points;
  for (std::size_t k : all_ks(std::move(ks), templates.size())) {
    const Model model = train_fixed_prefix(labels, train, dev, templates, k, cfg);
    const auto policy = StoppingPolicy::full();
    auto p = point_from("fixed-prefix-sweep", evaluate(model, test, policy),
                        measure(model, test, policy, bench_repetitions));
    p.k = k;
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<CurvePoint> sweep_truncated(const Model& model, const std::vector<Sentence>& test,
                                        std::vector<std::size_t> ks, int bench_repetitions) {
  std::vector<CurvePoint> points;
  for (std::size_t k : all_ks(std::move(ks), model.template_count())) {
    const auto policy = StoppingPolicy::fixed(k);
    auto p = point_from("truncated-dynamic", evaluate(model, test, policy),
                        measure(model, test, policy, bench_repetitions));
    p.k = k;
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<std::size_t> monotonicity_violations(const std::vector<CurvePoint>& fixed_points, double tolerance) {
  std::vector<const CurvePoint*> sorted;
  for (const auto& p : fixed_points)
    if (p.k) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return *a->k < *b->k; });
  std::vector<std::size_t> bad;
  double best = -1.0;
  for (const auto* p : sorted) {
    if (best >= 0.0 && p->accuracy < best - tolerance) bad.push_back(*p->k);
    best = std::max(best, p->accuracy);
  }
  return bad;
}

void print_report_table(std::ostream& out, const std::vector<ReportRow>& rows) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %12s %12s %16s %10s\n", "Model/policy", "Tok. acc", "Unk. acc",
                "Feat. templates", "Speedup");
  out << buf;
  for (const auto& row : rows) {
    const auto& r = row.report;
    std::string speed = row.speedup ? fmt(std::round(*row.speedup * 100.0) / 100.0) + "x" : "-";
    std::snprintf(buf, sizeof buf, "%-24s %12.2f %12.2f %16.2f %10s\n", row.name.c_str(), 100.0 * r.token_accuracy,
                  100.0 * r.unknown_accuracy, r.mean_templates, speed.c_str());
    out << buf;
  }
}

std::vector<double> cumulative_usage(const EvalReport& report) {
  std::vector<double> out;
  std::size_t running = 0;
  for (std::size_t n = 1; n < report.template_histogram.size(); ++n) {
    running += report.template_histogram[n];
    out.push_back(report.tokens == 0 ? 0.0 : static_cast<double>(running) / static_cast<double>(report.tokens));
  }
  return out;
}

}  // namespace dfs
