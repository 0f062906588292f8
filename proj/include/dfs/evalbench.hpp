#pragma once

// Evaluation metrics, throughput benchmarking and accuracy/speed curves.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dfs/corpus.hpp"
#include "dfs/inference.hpp"
#include "dfs/learning.hpp"
#include "dfs/model.hpp"

namespace dfs {

struct EvalReport {
  std::string policy;
  std::size_t template_count = 0;
  std::size_t tokens = 0;
  std::size_t correct = 0;
  std::size_t unknown_tokens = 0;
  std::size_t unknown_correct = 0;
  double token_accuracy = 0.0;
  double unknown_accuracy = 0.0;  // 0 when the test set has no unknown tokens
  double mean_templates = 0.0;
  // histogram[n] = number of tokens that used exactly n templates.
  std::vector<std::size_t> template_histogram;
  double tokens_per_second = 0.0;            // filled by benchmark runs
  std::optional<double> speedup_vs_reference;
  std::vector<LabelId> predictions;          // per token, corpus order
  std::vector<std::size_t> templates_used;   // per token, corpus order
};

// Tags every sentence (fanning out over up to `threads` threads) and scores
// the predictions. Throws EmptyCorpusError on an empty test set.
EvalReport evaluate(const Model& model, const std::vector<Sentence>& test, const StoppingPolicy& policy,
                    unsigned threads = 1);

struct BenchResult {
  double tokens_per_second = 0.0;         // median over repetitions
  double template_evals_per_token = 0.0;  // machine-independent cost proxy
  std::vector<double> seconds;            // per timed repetition
  std::size_t tokens = 0;
};

// One untimed warm-up pass, then `repetitions` (>= 3) timed single-thread passes.
BenchResult benchmark(const Model& model, const std::vector<Sentence>& test, const StoppingPolicy& policy,
                      int repetitions);

struct CurvePoint {
  std::string series;  // dynamic-margin-sweep, dynamic-margin-sweep-inference-only, fixed-prefix-sweep, truncated-dynamic
  double x = 0.0;      // mean templates
  double y = 0.0;      // token accuracy
  std::optional<double> margin;
  std::optional<std::size_t> k;
  double accuracy = 0.0;
  double unk_accuracy = 0.0;
  double mean_templates = 0.0;
  double tokens_per_sec = 0.0;

  bool operator==(const CurvePoint&) const = default;
};

inline constexpr std::string_view kCurveCsvHeader =
    "series,x,y,margin,k,accuracy,unk_accuracy,mean_templates,tokens_per_sec";

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points);
void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& points);
std::vector<CurvePoint> read_curve_csv(std::istream& in, const std::string& source = "<stream>");

enum class SweepMode {
  retrain,         // one trained model per margin
  inference_only,  // one model, margin varied only at inference
};

using MarginTrainer = std::function<Model(double margin)>;

// Margin sweep. In retrain mode `trainer` is called once per margin; in
// inference-only mode it is called once with the first margin. When
// `bench_repetitions` >= 3 each point also carries measured throughput.
std::vector<CurvePoint> sweep_margin(const MarginTrainer& trainer, const std::vector<double>& margins,
                                     const std::vector<Sentence>& test, SweepMode mode = SweepMode::retrain,
                                     int bench_repetitions = 0);

// Separately trained fixed-prefix models for each k in `ks` (all k when empty).
std::vector<CurvePoint> sweep_fixed_prefix(const LabelSet& labels, const std::vector<Sentence>& train,
                                           const std::vector<Sentence>& dev, const std::vector<Sentence>& test,
                                           const TemplateList& templates, const TrainConfig& cfg,
                                           std::vector<std::size_t> ks = {}, int bench_repetitions = 0);

// One model evaluated with its first k templates only.
std::vector<CurvePoint> sweep_truncated(const Model& model, const std::vector<Sentence>& test,
                                        std::vector<std::size_t> ks = {}, int bench_repetitions = 0);

// k values at which fixed-prefix accuracy drops by more than `tolerance`
// below the best accuracy seen at any smaller k.
std::vector<std::size_t> monotonicity_violations(const std::vector<CurvePoint>& fixed_points, double tolerance);

struct ReportRow {
  std::string name;
  EvalReport report;
  std::optional<double> speedup;
};

// Table with columns: model/policy, token accuracy, unknown accuracy,
// templates used, speedup.
void print_report_table(std::ostream& out, const std::vector<ReportRow>& rows);

// Share of tokens that used at most n templates, for n = 1..T.
std::vector<double> cumulative_usage(const EvalReport& report);

}  // namespace dfs
