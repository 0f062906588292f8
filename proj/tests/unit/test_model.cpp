#include <random>
#include <sstream>

#include "doctest.h"
#include "dfs/error.hpp"
#include "dfs/inference.hpp"
#include "dfs/learning.hpp"
#include "dfs/model.hpp"
#include "support/support.hpp"

using namespace dfs;

namespace {

std::string serialize(const Model& m) {
  std::ostringstream out(std::ios::binary);
  save_model(m, out);
  return out.str();
}

Model deserialize(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return load_model(in);
}

Model small_trained_model() {
  const auto corpus = testing::planted_corpus({0.9, 0.8, 0.6, 0.6, 0.6}, 60, 20, 4);
  TrainConfig cfg;
  cfg.epochs = 2;
  return train_dynamic(corpus.labels, corpus.train, corpus.dev, testing::planted_templates(), cfg);
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("template contribution") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> w(-1.0, 1.0);
    auto zero = [](std::mt19937_64&) { return 0.0; };
    const Model z = testing::random_dense_model(rng, 4, 2, 5, zero);
    CHECK(template_contribution(z, 1, std::vector<FeatureId>{0, 3}) == std::vector<double>(4, 0.0));

    Model one = z;
    one.blocks[0].at(2, 3) = 2.5;
    CHECK(template_contribution(one, 0, std::vector<FeatureId>{2}) == std::vector<double>{0, 0, 0, 2.5});

    for (int trial = 0; trial < 200; ++trial) {
      const Model m = testing::random_dense_model(rng, 5, 3, 8, w);
      const auto feats = testing::random_sparse(rng, 3, 8, 6);
      for (std::size_t j = 0; j < 3; ++j) {
        // Dense oracle: indicator vector times the block matrix.
        std::vector<double> x(8, 0.0);
        for (FeatureId f : feats.ids[j]) x[static_cast<std::size_t>(f)] = 1.0;
        const auto got = template_contribution(m, j, feats);
        for (std::size_t y = 0; y < 5; ++y) {
          double dense = 0.0;
          for (std::size_t r = 0; r < 8; ++r) dense += x[r] * m.blocks[j].at(static_cast<FeatureId>(r), static_cast<LabelId>(y));
          CHECK(got[y] == doctest::Approx(dense).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("out-of-range feature ids are an invariant violation") {
    std::mt19937_64 rng(2);
    auto zero = [](std::mt19937_64&) { return 0.0; };
    const Model m = testing::random_dense_model(rng, 2, 1, 3, zero);
    CHECK_THROWS_AS(template_contribution(m, 0, std::vector<FeatureId>{3}), InvariantError);
  }

  TEST_CASE("extend_prefix") {
    const auto p0 = PrefixScores::zero(3);
    const std::vector<double> v{1.0, -2.0, 0.5};
    const auto p1 = extend_prefix(p0, v);
    CHECK(p1.scores == v);
    CHECK(p1.length == 1);
    const auto p2 = extend_prefix(p1, std::vector<double>(3, 0.0));
    CHECK(p2.scores == p1.scores);
    CHECK(p2.length == 2);
  }

  TEST_CASE("hinge") {
    CHECK(hinge(std::vector<double>{3.0, 1.0}, 0, 1.0) == 0.0);
    CHECK(hinge(std::vector<double>{1.0, 1.0}, 0, 0.5) == 0.5);
    CHECK(hinge(std::vector<double>{0.0, 2.0}, 0, 1.0) == 3.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> s(-3.0, 3.0), m(0.01, 2.0);
    std::uniform_int_distribution<int> n(2, 6);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> p(static_cast<std::size_t>(n(rng)));
      for (auto& x : p) x = s(rng);
      const double mm = m(rng);
      for (std::size_t y = 0; y < p.size(); ++y)
        CHECK(hinge(p, static_cast<LabelId>(y), mm) == testing::oracle_hinge(p, static_cast<LabelId>(y), mm));
    }
  }

  TEST_CASE("margin_satisfied") {
    CHECK(margin_satisfied(std::vector<double>{3.0, 1.0}, 1.0) == LabelId{0});
    CHECK(margin_satisfied(std::vector<double>{1.0, 1.0}, 0.5) == std::nullopt);
    CHECK(margin_satisfied(std::vector<double>{0.0, 1.0, 2.0}, 1.0) == LabelId{2});
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> s(-6, 6), n(2, 6);
    std::uniform_real_distribution<double> m(0.25, 4.0);
    for (int trial = 0; trial < 2000; ++trial) {
      // Quarter-integer scores make exact ties and exact margins common.
      std::vector<double> p(static_cast<std::size_t>(n(rng)));
      for (auto& x : p) x = 0.25 * s(rng);
      const double mm = trial % 2 ? 0.25 * (1 + trial % 8) : m(rng);
      CHECK(margin_satisfied(p, mm) == testing::oracle_leader(p, mm));
    }
  }

  TEST_CASE("argmax breaks ties to the lowest id") {
    CHECK(argmax(std::vector<double>{1.0, 2.0, 2.0}) == 1);
    CHECK(argmax(std::vector<double>{0.0, 0.0}) == 0);
  }

  TEST_CASE("save/load round-trip preserves the model and its predictions") {
    const Model m = small_trained_model();
    const Model back = deserialize(serialize(m));
    CHECK(back == m);
    CHECK(serialize(back) == serialize(m));
    std::mt19937_64 rng(5);
    const auto extra = testing::planted_corpus({0.9, 0.8, 0.6, 0.6, 0.6}, 100, 1, 99);
    for (const auto& s : extra.train) {
      for (const auto& policy : {StoppingPolicy::dynamic(m.margin), StoppingPolicy::full()}) {
        const auto a = tag_sentence(m, s, policy);
        const auto b = tag_sentence(back, s, policy);
        CHECK(a.labels == b.labels);
        CHECK(a.templates_used == b.templates_used);
      }
    }
  }

  TEST_CASE("format errors") {
    const std::string bytes = serialize(small_trained_model());
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize(bad_magic), FormatError);
    CHECK_THROWS_AS(deserialize(bytes.substr(0, bytes.size() / 2)), FormatError);
    CHECK_THROWS_AS(deserialize(bytes + "x"), FormatError);
    std::string bad_version = bytes;
    bad_version[kModelMagic.size()] = 9;
    CHECK_THROWS_AS(deserialize(bad_version), FormatError);
    CHECK_THROWS_AS(deserialize(""), FormatError);
  }

  TEST_CASE("empty-template model is rejected at save time") {
    Model m;
    m.labels = testing::make_labels(2);
    std::ostringstream out;
    CHECK_THROWS_AS(save_model(m, out), InvariantError);
  }

  TEST_CASE("make_model validates the margin") {
    CHECK_THROWS_AS(make_model(testing::make_labels(2), default_template_list(), 0.0), ConfigError);
  }
}
