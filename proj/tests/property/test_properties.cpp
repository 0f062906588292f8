#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dfs/inference.hpp"
#include "dfs/learning.hpp"
#include "dfs/model.hpp"
#include "support/support.hpp"

using namespace dfs;

namespace {

auto uniform(double lo, double hi) {
  return [d = std::uniform_real_distribution<double>(lo, hi)](std::mt19937_64& rng) mutable { return d(rng); };
}

}  // namespace

TEST_SUITE("property") {
  TEST_CASE("folding extend_prefix equals the monolithic sum bit for bit") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 500; ++trial) {
      const Model m = testing::random_dense_model(rng, 5, 8, 10, uniform(-1e3, 1e3));
      const auto f = testing::random_sparse(rng, 8, 10, 6);
      auto p = PrefixScores::zero(5);
      for (std::size_t j = 0; j < 8; ++j) p = extend_prefix(p, template_contribution(m, j, f));
      CHECK(p.scores == testing::eager_prefixes(m, f).back());
      CHECK(p.length == 8);
    }
  }

  TEST_CASE("templates used never decreases with the margin") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 300; ++trial) {
      const Model m = testing::random_dense_model(rng, 4, 6, 5, uniform(-1, 1));
      const auto f = testing::random_sparse(rng, 6, 5);
      std::size_t last = 0;
      for (double margin : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 1e9}) {
        const auto t = predict_token(m, f, StoppingPolicy::dynamic(margin));
        CHECK(t.templates_used >= last);
        last = t.templates_used;
      }
      CHECK(last == 6);
    }
  }

  TEST_CASE("policy degeneration on random sentences") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
      const LabelSet labels = testing::make_labels(2 + trial % 4);
      const auto templates = testing::random_templates(rng, 12);
      const Model m = testing::random_model(rng, labels, templates, uniform(-1, 1), 1.0, 10);
      for (int s = 0; s < 5; ++s) {
        const auto sent = testing::random_sentence(rng, labels);
        const auto full = tag_sentence(m, sent, StoppingPolicy::full());
        CHECK(tag_sentence(m, sent, StoppingPolicy::dynamic(1e9)).labels == full.labels);
        CHECK(tag_sentence(m, sent, StoppingPolicy::fixed(templates.size())).labels == full.labels);
      }
    }
  }

  TEST_CASE("extraction happens only for scored templates") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
      const LabelSet labels = testing::make_labels(3);
      const auto templates = testing::random_templates(rng, 24);
      const Model m = testing::random_model(rng, labels, templates, uniform(-1, 1), 1.0, 5);
      const auto s = testing::random_sentence(rng, labels);
      const auto prev = testing::random_prev_labels(rng, labels, s.size());
      for (std::size_t t = 0; t < s.size(); ++t) {
        TaggingContext ctx{s, t, std::span(prev.data(), t), labels};
        reset_extraction_count();
        const auto r = predict_token(m, ctx, StoppingPolicy::dynamic(0.3 + 0.1 * (trial % 10)));
        CHECK(extraction_count() == r.templates_used);
      }
    }
  }

  TEST_CASE("gradient pairs every +1 with a -1 and stays within the stopping prefix") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
      const Model m = testing::random_dense_model(rng, 4, 6, 5, uniform(-1, 1));
      const auto f = testing::random_sparse(rng, 6, 5);
      const LabelId gold = trial % 4;
      const auto g = example_gradient(m, f, gold, 1.0);
      const auto stop = testing::oracle_stop_index(m, f, gold, 1.0);
      std::map<std::pair<std::size_t, FeatureId>, double> row_sums;
      for (const auto& e : g.entries()) {
        CHECK(e.template_index < stop);
        row_sums[{e.template_index, e.feature}] += e.value;
      }
      for (const auto& [key, sum] : row_sums) CHECK(sum == 0.0);
      CHECK(example_loss(m, f, gold, 1.0) >= 0.0);
    }
  }

  TEST_CASE("hinge is zero exactly for the margin leader") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> s(-8, 8);
    for (int trial = 0; trial < 2000; ++trial) {
      std::vector<double> p(4);
      for (auto& x : p) x = 0.25 * s(rng);
      const double m = 0.25 * (1 + trial % 6);
      const auto leader = margin_satisfied(p, m);
      for (LabelId y = 0; y < 4; ++y) CHECK((hinge(p, y, m) == 0.0) == (leader == y));
    }
  }

  TEST_CASE("random models survive serialization") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const LabelSet labels = testing::make_labels(2 + trial % 5);
      const Model m = testing::random_model(rng, labels, testing::random_templates(rng, 24), uniform(-1, 1), 0.5 + trial,
                                            5);
      std::stringstream io;
      save_model(m, io);
      CHECK(load_model(io) == m);
    }
  }
}
