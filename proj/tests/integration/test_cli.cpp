#include <fstream>

#include "cli_harness.hpp"
#include "doctest.h"
#include "dfs/corpus.hpp"
#include "dfs/evalbench.hpp"
#include "dfs/model.hpp"
#include "support/support.hpp"
#include "support/tempdir.hpp"

using namespace dfs;
using testing::run_cli;
using testing::str;

namespace {

struct Fixture {
  testing::TempDir dir;
  std::string train = str(dir / "train.tsv");
  std::string dev = str(dir / "dev.tsv");
  std::string templates = str(dir / "templates.cfg");
  std::string model = str(dir / "m.model");

  Fixture() {
    const auto c = testing::planted_corpus({0.95, 0.8, 0.6, 0.6, 0.5}, 60, 30, 1);
    write_corpus(std::filesystem::path(train), c.train, c.labels);
    write_corpus(std::filesystem::path(dev), c.dev, c.labels);
    std::ofstream(templates) << format_templates(testing::planted_templates());
  }

  testing::CliResult train_model(std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"train", "--train", train, "--dev", dev, "--templates", templates,
                                  "--epochs", "2", "--out", model};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  }
};

std::vector<std::vector<std::string>> rows(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream cs(line);
    std::string cell;
    while (std::getline(cs, cell, '\t')) cells.push_back(cell);
    out.push_back(cells);
  }
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 1") {
    Fixture f;
    CHECK(run_cli({}).code == 1);
    CHECK(run_cli({"frobnicate"}).code == 1);
    CHECK(f.train_model({"--mode", "fixed:0"}).code == 1);
    CHECK(f.train_model({"--mode", "fixed:7"}).code == 1);
    CHECK(f.train_model({"--mode", "sideways"}).code == 1);
    CHECK(f.train_model({"--margin", "-1"}).code == 1);
    CHECK(f.train_model({"--epochs", "0"}).code == 1);
    CHECK(run_cli({"train", "--dev", f.dev, "--out", f.model}).code == 1);
    CHECK(run_cli({"--help"}).code == 0);
  }

  TEST_CASE("data errors exit with 2") {
    Fixture f;
    const auto missing = f.train_model({"--train", str(f.dir / "absent.tsv")});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("absent.tsv") != std::string::npos);
    std::ofstream(str(f.dir / "junk.model")) << "not a model";
    CHECK(run_cli({"eval", "--model", str(f.dir / "junk.model"), "--test", f.dev}).code == 2);
    std::ofstream(str(f.dir / "bad.tsv")) << "a\tb\tc\n";
    CHECK(f.train_model({"--train", str(f.dir / "bad.tsv")}).code == 2);
  }

  TEST_CASE("train writes a model and reports dev accuracy") {
    Fixture f;
    const auto r = f.train_model();
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(f.model));
    CHECK(r.out.find("Tok. acc") != std::string::npos);
    CHECK(load_model(std::filesystem::path(f.model)).template_count() == 6);
  }

  TEST_CASE("retraining with the same flags is byte-identical") {
    Fixture f;
    REQUIRE(f.train_model().code == 0);
    std::ifstream a(f.model, std::ios::binary);
    const std::string first((std::istreambuf_iterator<char>(a)), {});
    REQUIRE(f.train_model().code == 0);
    std::ifstream b(f.model, std::ios::binary);
    const std::string second((std::istreambuf_iterator<char>(b)), {});
    CHECK(first == second);
  }

  TEST_CASE("config file values apply and explicit flags win") {
    Fixture f;
    const auto ini = str(f.dir / "run.ini");
    std::ofstream(ini) << "[train]\nepochs = 1\nmargin = 0.5\nseed = 9\n";
    REQUIRE(f.train_model({"--config", ini, "--margin", "2"}).code == 0);
    const auto m = load_model(std::filesystem::path(f.model));
    CHECK(m.margin == 2.0);
    CHECK(m.provenance.find("seed = 9") != std::string::npos);
    CHECK(m.provenance.find("epochs = 2") != std::string::npos);
  }

  TEST_CASE("tag") {
    Fixture f;
    REQUIRE(f.train_model().code == 0);
    const auto out = str(f.dir / "tagged.tsv");

    SUBCASE("output re-reads as a labeled corpus") {
      REQUIRE(run_cli({"tag", "--model", f.model, "--input", f.dev, "--out", out}).code == 0);
      LabelSet labels = load_model(std::filesystem::path(f.model)).labels;
      const auto tagged = read_corpus(std::filesystem::path(out), labels, LabelMode::validate);
      const auto raw = read_raw_corpus(std::filesystem::path(f.dev));
      REQUIRE(tagged.size() == raw.size());
      for (std::size_t i = 0; i < raw.size(); ++i) CHECK(tagged[i].size() == raw[i].size());
    }

    SUBCASE("fixed:1 stats column is all ones") {
      const auto r = run_cli({"tag", "--model", f.model, "--input", f.dev, "--policy", "fixed:1", "--stats"});
      REQUIRE(r.code == 0);
      const auto table = rows(r.out);
      REQUIRE_FALSE(table.empty());
      for (const auto& row : table) {
        REQUIRE(row.size() == 3);
        CHECK(row[2] == "1");
      }
    }

    SUBCASE("unknown policy is a usage error") {
      CHECK(run_cli({"tag", "--model", f.model, "--input", f.dev, "--policy", "sometimes"}).code == 1);
      CHECK(run_cli({"tag", "--model", f.model, "--input", f.dev, "--policy", "fixed:9"}).code == 1);
    }
  }

  TEST_CASE("eval prints the four report columns") {
    Fixture f;
    REQUIRE(f.train_model().code == 0);
    const auto r = run_cli({"eval", "--model", f.model, "--test", f.dev, "--histogram"});
    REQUIRE(r.code == 0);
    for (const char* col : {"Tok. acc", "Unk. acc", "Feat. templates", "Speedup", "dynamic:1", "full", "cumulative"})
      CHECK(r.out.find(col) != std::string::npos);
  }

  TEST_CASE("bench reports the median of the requested repetitions") {
    Fixture f;
    REQUIRE(f.train_model().code == 0);
    const auto r = run_cli({"bench", "--model", f.model, "--test", f.dev, "--repetitions", "3"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("median of 3") != std::string::npos);
    CHECK(r.out.find("tokens/sec") != std::string::npos);
    CHECK(run_cli({"bench", "--model", f.model, "--test", f.dev, "--repetitions", "1"}).code == 1);
  }

  TEST_CASE("sweep writes one CSV row per margin") {
    Fixture f;
    const auto csv = str(f.dir / "sweep.csv");
    const auto r = run_cli({"sweep", "--kind", "margin", "--margins", "0.5,1,2", "--train", f.train, "--dev", f.dev,
                            "--test", f.dev, "--templates", f.templates, "--out", csv});
    REQUIRE(r.code == 0);
    std::ifstream in(csv);
    const auto points = read_curve_csv(in);
    REQUIRE(points.size() == 3);
    CHECK(points[0].margin == 0.5);
    CHECK(points[2].margin == 2.0);
    CHECK(run_cli({"sweep", "--kind", "truncated", "--test", f.dev}).code == 1);
  }

  TEST_CASE("dump-templates prints the built-in list") {
    const auto r = run_cli({"dump-templates"});
    REQUIRE(r.code == 0);
    CHECK(parse_templates(r.out) == default_template_list());
  }
}
