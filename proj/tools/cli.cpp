#include "cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dfs/corpus.hpp"
#include "dfs/error.hpp"
#include "dfs/evalbench.hpp"
#include "dfs/features.hpp"
#include "dfs/inference.hpp"
#include "dfs/learning.hpp"
#include "dfs/model.hpp"
#include "dfs/ordering.hpp"

namespace dfs::cli {

namespace {

// Training flags shared by train, order and sweep.
struct TrainFlags {
  std::string train;
  std::string dev;
  std::string templates = "default";
  std::string order;
  std::string train_config;
  double margin = 0.0;
  double l2 = 0.0;
  double lr = 0.0;
  int epochs = 0;
  std::uint64_t seed = 0;
  double subsample = 0.0;
  std::string prev_labels;
  CLI::Option* margin_opt = nullptr;
  CLI::Option* l2_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* subsample_opt = nullptr;
  CLI::Option* prev_opt = nullptr;

  void add(CLI::App* app, bool need_order = true) {
    app->add_option("--train", train, "Labeled training corpus (form<TAB>label)")->required();
    app->add_option("--dev", dev, "Labeled development corpus")->required();
    app->add_option("--templates", templates, "Template config file, or 'default'");
    if (need_order) app->add_option("--order", order, "Ordering file from `dfstag order`");
    app->add_option("--train-config", train_config, "Training config file (key = value lines)");
    margin_opt = app->add_option("--margin", margin, "Margin m > 0");
    l2_opt = app->add_option("--l2", l2, "l2 regularization strength >= 0");
    lr_opt = app->add_option("--lr", lr, "AdaGrad learning rate > 0");
    epochs_opt = app->add_option("--epochs", epochs, "Training epochs >= 1");
    seed_opt = app->add_option("--seed", seed, "Shuffle seed");
    subsample_opt = app->add_option("--subsample", subsample, "Fraction of training sentences used, in (0, 1]");
    prev_opt = app->add_option("--prev-labels", prev_labels, "Left-context labels at train time")
                   ->check(CLI::IsMember({"predicted", "gold"}));
  }

  // Defaults < --train-config file < explicit flags.
  TrainConfig config(TrainConfig base = {}) const {
    TrainConfig cfg = base;
    if (!train_config.empty()) cfg = load_train_config(train_config, cfg);
    if (margin_opt->count()) cfg.margin = margin;
    if (l2_opt->count()) cfg.l2 = l2;
    if (lr_opt->count()) cfg.learning_rate = lr;
    if (epochs_opt->count()) cfg.epochs = epochs;
    if (seed_opt->count()) cfg.seed = seed;
    if (subsample_opt->count()) cfg.subsample = subsample;
    if (prev_opt->count()) cfg.prev_labels = prev_labels == "gold" ? PrevLabelSource::gold : PrevLabelSource::predicted;
    cfg.validate();
    return cfg;
  }

  TemplateList template_list() const {
    TemplateList list = templates == "default" ? default_template_list() : load_templates(templates);
    if (!order.empty()) list = list.select(read_ordering(std::filesystem::path(order)).permutation);
    return list;
  }
};

struct Data {
  LabelSet labels;
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
};

Data load_data(const TrainFlags& f) {
  Data d;
  d.train = read_corpus(std::filesystem::path(f.train), d.labels, LabelMode::extend);
  d.dev = read_corpus(std::filesystem::path(f.dev), d.labels, LabelMode::validate);
  return d;
}

struct TrainMode {
  enum Kind { dynamic, stagewise, fixed } kind = dynamic;
  std::size_t k = 0;
};

TrainMode parse_mode(const std::string& s) {
  if (s == "dynamic") return {TrainMode::dynamic, 0};
  if (s == "stagewise") return {TrainMode::stagewise, 0};
  if (s.rfind("fixed:", 0) == 0) {
    const auto arg = s.substr(6);
    long k = 0;
    auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), k);
    if (ec != std::errc() || p != arg.data() + arg.size() || k < 1)
      throw ConfigError("--mode fixed:K needs an integer K >= 1, got '" + arg + "'");
    return {TrainMode::fixed, static_cast<std::size_t>(k)};
  }
  throw ConfigError("--mode must be dynamic, stagewise or fixed:K");
}

std::vector<double> parse_margins(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || p != cell.data() + cell.size() || !(v > 0.0))
      throw ConfigError("--margins expects comma-separated positive numbers");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--margins is empty");
  return out;
}

std::vector<std::size_t> parse_ks(const std::string& s, std::size_t total) {
  std::vector<std::size_t> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    long k = 0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), k);
    if (ec != std::errc() || p != cell.data() + cell.size() || k < 1 || static_cast<std::size_t>(k) > total)
      throw ConfigError("--ks values must be integers in [1, " + std::to_string(total) + "]");
    out.push_back(static_cast<std::size_t>(k));
  }
  return out;
}

void print_histogram(std::ostream& out, const EvalReport& r) {
  const auto cum = cumulative_usage(r);
  out << "templates used  tokens  cumulative\n";
  for (std::size_t n = 1; n < r.template_histogram.size(); ++n) {
    if (r.template_histogram[n] == 0) continue;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%14zu %7zu %10.2f%%\n", n, r.template_histogram[n], 100.0 * cum[n - 1]);
    out << buf;
  }
}

std::ostream& open_out(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty() || path == "-") return fallback;
  file.open(path, std::ios::binary);
  if (!file) throw IoError("cannot open '" + path + "' for writing");
  return file;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dfstag: greedy tagger with dynamic feature-template selection"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_config("--config", "", "INI/TOML file with flag values; explicit flags win");
  unsigned threads = 1;
  app.add_option("--threads", threads, "Cap on evaluation threads")->check(CLI::PositiveNumber);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  TrainFlags train_flags;
  train_flags.add(train_cmd);
  std::string train_out, train_mode = "dynamic";
  train_cmd->add_option("--out", train_out, "Model output path")->required();
  train_cmd->add_option("--mode", train_mode, "dynamic | stagewise | fixed:K");

  // order
  auto* order_cmd = app.add_subcommand("order", "Learn a template ordering greedily on dev accuracy");
  TrainFlags order_flags;
  order_flags.add(order_cmd, false);
  int stage_epochs = 1;
  std::string order_out;
  order_cmd->add_option("--stage-epochs", stage_epochs, "Epochs per candidate model")->check(CLI::PositiveNumber);
  order_cmd->add_option("--out", order_out, "Ordering output path")->required();

  // tag
  auto* tag_cmd = app.add_subcommand("tag", "Tag a corpus");
  std::string tag_model, tag_input, tag_policy = "dynamic", tag_out;
  bool tag_stats = false;
  tag_cmd->add_option("--model", tag_model, "Model file")->required();
  tag_cmd->add_option("--input", tag_input, "Input file (one form per line; a label column is ignored)")->required();
  tag_cmd->add_option("--policy", tag_policy, "dynamic[:M] | fixed:K | full");
  tag_cmd->add_option("--out", tag_out, "Output path (default stdout)");
  tag_cmd->add_flag("--stats", tag_stats, "Append templates used as a third column");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy and template usage on a labeled corpus");
  std::string eval_model, eval_test;
  std::vector<std::string> eval_policies;
  bool eval_hist = false;
  eval_cmd->add_option("--model", eval_model, "Model file")->required();
  eval_cmd->add_option("--test", eval_test, "Labeled test corpus")->required();
  eval_cmd->add_option("--policy", eval_policies, "Policies to evaluate (repeatable); default: dynamic, full")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  eval_cmd->add_flag("--histogram", eval_hist, "Print the templates-used distribution");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Throughput relative to a reference policy");
  std::string bench_model, bench_test, bench_reference = "full";
  std::vector<std::string> bench_policies;
  int repetitions = 5;
  bench_cmd->add_option("--model", bench_model, "Model file")->required();
  bench_cmd->add_option("--test", bench_test, "Corpus to tag (labels ignored)")->required();
  bench_cmd->add_option("--policy", bench_policies, "Policies to time (repeatable); default: dynamic")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  bench_cmd->add_option("--reference", bench_reference, "Reference policy for speedup");
  bench_cmd->add_option("--repetitions", repetitions, "Timed passes (>= 3); the median is reported");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy/speed curves as CSV");
  std::string sweep_kind = "margin", sweep_margins = "0.5,1,2,4", sweep_mode = "retrain", sweep_model, sweep_test,
              sweep_out, sweep_ks, sweep_train, sweep_dev, sweep_templates = "default", sweep_order, sweep_train_config;
  int bench_reps = 0;
  sweep_cmd->add_option("--kind", sweep_kind, "margin | fixed | truncated")
      ->check(CLI::IsMember({"margin", "fixed", "truncated"}));
  sweep_cmd->add_option("--margins", sweep_margins, "Comma-separated margins (margin sweep)");
  sweep_cmd->add_option("--mode", sweep_mode, "retrain | inference-only (margin sweep)")
      ->check(CLI::IsMember({"retrain", "inference-only"}));
  sweep_cmd->add_option("--model", sweep_model, "Trained model (truncated sweep)");
  sweep_cmd->add_option("--train", sweep_train, "Labeled training corpus");
  sweep_cmd->add_option("--dev", sweep_dev, "Labeled development corpus");
  sweep_cmd->add_option("--test", sweep_test, "Labeled test corpus")->required();
  sweep_cmd->add_option("--templates", sweep_templates, "Template config file, or 'default'");
  sweep_cmd->add_option("--order", sweep_order, "Ordering file");
  sweep_cmd->add_option("--train-config", sweep_train_config, "Training config file");
  sweep_cmd->add_option("--ks", sweep_ks, "Comma-separated prefix lengths (fixed/truncated); default all");
  sweep_cmd->add_option("--bench-repetitions", bench_reps, "Also time each point (>= 3 to enable)");
  sweep_cmd->add_option("--out", sweep_out, "CSV output path (default stdout)");

  // dump-templates
  auto* dump_cmd = app.add_subcommand("dump-templates", "Print the built-in template list");
  std::string dump_out;
  dump_cmd->add_option("--out", dump_out, "Output path (default stdout)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) {
      const auto mode = parse_mode(train_mode);
      TrainConfig cfg = train_flags.config();
      const TemplateList templates = train_flags.template_list();
      if (mode.kind == TrainMode::fixed && mode.k > templates.size())
        throw ConfigError("--mode fixed:" + std::to_string(mode.k) + " exceeds the " +
                          std::to_string(templates.size()) + " available templates");
      const Data data = load_data(train_flags);
      Model model;
      StoppingPolicy policy = StoppingPolicy::dynamic(cfg.margin);
      std::string name = "dynamic/" + policy.to_string().substr(8);
      switch (mode.kind) {
        case TrainMode::dynamic:
          model = train_dynamic(data.labels, data.train, data.dev, templates, cfg);
          break;
        case TrainMode::stagewise:
          model = train_stagewise(data.labels, data.train, data.dev, templates, cfg);
          name = "stagewise";
          break;
        case TrainMode::fixed:
          model = train_fixed_prefix(data.labels, data.train, data.dev, templates, mode.k, cfg);
          policy = StoppingPolicy::full();
          name = "fixed/" + std::to_string(mode.k);
          break;
      }
      save_model(model, std::filesystem::path(train_out));
      out << "wrote " << train_out << " (" << model.template_count() << " templates, " << model.label_count()
          << " labels)\n";
      const auto report = evaluate(model, data.dev, policy, threads);
      out << "dev results:\n";
      print_report_table(out, {{name, report, std::nullopt}});
      return kOk;
    }

    if (*order_cmd) {
      TrainConfig base;
      base.epochs = stage_epochs;
      const TrainConfig cfg = order_flags.config(base);
      const TemplateList templates = order_flags.template_list();
      const Data data = load_data(order_flags);
      const auto result = greedy_order(data.labels, data.train, data.dev, templates, cfg, threads);
      write_ordering(std::filesystem::path(order_out), result);
      out << "ordering (" << result.training_runs << " training runs):\n";
      for (std::size_t s = 0; s < result.permutation.size(); ++s) {
        double acc = 0.0;
        for (const auto& c : result.trace[s])
          if (c.name == result.permutation[s]) acc = c.dev_accuracy;
        out << "  " << (s + 1) << ". " << result.permutation[s] << "  dev " << 100.0 * acc << "%\n";
      }
      return kOk;
    }

    if (*tag_cmd) {
      const Model model = load_model(std::filesystem::path(tag_model));
      const auto policy = parse_policy(tag_policy, model.margin);
      policy.validate(model.template_count());
      const auto sentences = read_raw_corpus(std::filesystem::path(tag_input));
      std::ofstream file;
      std::ostream& dst = open_out(tag_out, file, out);
      for (const auto& s : sentences) {
        const auto tagged = tag_sentence(model, s, policy);
        for (std::size_t t = 0; t < s.size(); ++t) {
          dst << s.tokens[t].form << '\t' << model.labels.name(tagged.labels[t]);
          if (tag_stats) dst << '\t' << tagged.templates_used[t];
          dst << '\n';
        }
        dst << '\n';
      }
      dst.flush();
      if (!dst) throw IoError("write failure on tagger output");
      return kOk;
    }

    if (*eval_cmd) {
      const Model model = load_model(std::filesystem::path(eval_model));
      if (eval_policies.empty()) eval_policies = {"dynamic", "full"};
      std::vector<StoppingPolicy> policies;
      for (const auto& p : eval_policies) {
        policies.push_back(parse_policy(p, model.margin));
        policies.back().validate(model.template_count());
      }
      LabelSet labels = model.labels;
      const auto test = read_corpus(std::filesystem::path(eval_test), labels, LabelMode::validate);
      std::vector<ReportRow> rows;
      for (const auto& policy : policies) {
        auto report = evaluate(model, test, policy, threads);
        // Template-evaluation ratio against the full model.
        const double proxy = static_cast<double>(model.template_count()) / report.mean_templates;
        rows.push_back({policy.to_string(), std::move(report), proxy});
      }
      print_report_table(out, rows);
      out << "(speedup column: template-evaluation ratio vs. all " << model.template_count() << " templates)\n";
      if (eval_hist)
        for (const auto& row : rows) {
          out << "\n" << row.name << ":\n";
          print_histogram(out, row.report);
        }
      return kOk;
    }

    if (*bench_cmd) {
      if (repetitions < 3) throw ConfigError("--repetitions must be >= 3");
      const Model model = load_model(std::filesystem::path(bench_model));
      if (bench_policies.empty()) bench_policies = {"dynamic"};
      const auto reference = parse_policy(bench_reference, model.margin);
      reference.validate(model.template_count());
      std::vector<StoppingPolicy> policies;
      for (const auto& p : bench_policies) {
        policies.push_back(parse_policy(p, model.margin));
        policies.back().validate(model.template_count());
      }
      const auto test = read_raw_corpus(std::filesystem::path(bench_test));
      const auto ref = benchmark(model, test, reference, repetitions);
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-20s %14s %16s %14s %14s\n", "policy", "tokens/sec", "templates/token",
                    "wall speedup", "proxy speedup");
      out << buf;
      auto row = [&](const std::string& name, const BenchResult& r) {
        std::snprintf(buf, sizeof buf, "%-20s %14.0f %16.3f %13.2fx %13.2fx\n", name.c_str(), r.tokens_per_second,
                      r.template_evals_per_token, r.tokens_per_second / ref.tokens_per_second,
                      ref.template_evals_per_token / r.template_evals_per_token);
        out << buf;
      };
      row(reference.to_string() + " (ref)", ref);
      for (const auto& p : policies) row(p.to_string(), benchmark(model, test, p, repetitions));
      out << "(median of " << repetitions << " timed passes after one warm-up, " << ref.tokens << " tokens)\n";
      return kOk;
    }

    if (*sweep_cmd) {
      std::vector<CurvePoint> points;
      LabelSet labels;
      auto need = [&](const std::string& v, const char* flag) {
        if (v.empty()) throw ConfigError(std::string("sweep --kind ") + sweep_kind + " requires " + flag);
      };
      if (sweep_kind == "truncated") {
        need(sweep_model, "--model");
        const Model model = load_model(std::filesystem::path(sweep_model));
        const auto ks = parse_ks(sweep_ks, model.template_count());
        labels = model.labels;
        const auto test = read_corpus(std::filesystem::path(sweep_test), labels, LabelMode::validate);
        points = sweep_truncated(model, test, ks, bench_reps);
      } else {
        const auto margins = sweep_kind == "margin" ? parse_margins(sweep_margins) : std::vector<double>{};
        TrainConfig cfg;
        if (!sweep_train_config.empty()) cfg = load_train_config(sweep_train_config, cfg);
        cfg.validate();
        TemplateList templates = sweep_templates == "default" ? default_template_list() : load_templates(sweep_templates);
        if (!sweep_order.empty()) templates = templates.select(read_ordering(std::filesystem::path(sweep_order)).permutation);
        const auto ks = parse_ks(sweep_ks, templates.size());
        need(sweep_train, "--train");
        need(sweep_dev, "--dev");
        const auto train = read_corpus(std::filesystem::path(sweep_train), labels, LabelMode::extend);
        const auto dev = read_corpus(std::filesystem::path(sweep_dev), labels, LabelMode::validate);
        const auto test = read_corpus(std::filesystem::path(sweep_test), labels, LabelMode::validate);
        if (sweep_kind == "margin") {
          const auto mode = sweep_mode == "retrain" ? SweepMode::retrain : SweepMode::inference_only;
          points = sweep_margin(
              [&](double m) {
                TrainConfig c = cfg;
                c.margin = m;
                return train_dynamic(labels, train, dev, templates, c);
              },
              margins, test, mode, bench_reps);
        } else {
          points = sweep_fixed_prefix(labels, train, dev, test, templates, cfg, ks, bench_reps);
          const auto bad = monotonicity_violations(points, 0.005);
          for (auto k : bad) err << "note: fixed-prefix accuracy drops by more than 0.5% at k=" << k << '\n';
        }
      }
      std::ofstream file;
      std::ostream& dst = open_out(sweep_out, file, out);
      write_curve_csv(dst, points);
      dst.flush();
      if (!dst) throw IoError("write failure on sweep output");
      return kOk;
    }

    if (*dump_cmd) {
      std::ofstream file;
      std::ostream& dst = open_out(dump_out, file, out);
      dst << default_template_config();
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace dfs::cli
