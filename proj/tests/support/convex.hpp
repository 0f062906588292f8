#pragma once

// A small strongly convex problem: final-prefix multiclass hinge over fixed
// sparse examples plus (l2/2)·||w||², solved by RDA and by a long-run
// full-batch subgradient-descent oracle.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dfs/inference.hpp"
#include "dfs/learning.hpp"
#include "support/support.hpp"

namespace dfs::testing {

struct ConvexProblem {
  std::size_t labels = 3;
  std::size_t templates = 2;
  std::size_t rows = 6;
  double margin = 1.0;
  double l2 = 0.05;
  std::vector<SparseFeatures> x;
  std::vector<LabelId> y;
};

// Labels come from a hidden linear rule with 20% label noise, so the data is
// not separable and the regularizer matters.
inline ConvexProblem make_convex_problem(std::uint64_t seed, std::size_t examples = 50) {
  ConvexProblem p;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Model hidden = random_dense_model(rng, p.labels, p.templates, p.rows,
                                          [&](std::mt19937_64& r) { return gauss(r); });
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> any(0, static_cast<int>(p.labels) - 1);
  while (p.x.size() < examples) {
    auto f = random_sparse(rng, p.templates, p.rows, 2);
    if (f.ids[0].empty() && f.ids[1].empty()) continue;
    const auto scores = eager_prefixes(hidden, f).back();
    LabelId y = oracle_argmax(scores);
    if (unit(rng) < 0.2) y = static_cast<LabelId>(any(rng));
    p.x.push_back(std::move(f));
    p.y.push_back(y);
  }
  return p;
}

inline Model zero_model(const ConvexProblem& p) {
  std::mt19937_64 rng(0);
  return random_dense_model(rng, p.labels, p.templates, p.rows, [](std::mt19937_64&) { return 0.0; }, p.margin);
}

inline double regularized_loss(const ConvexProblem& p, const Model& m) {
  double loss = 0.0;
  for (std::size_t i = 0; i < p.x.size(); ++i)
    loss += oracle_hinge(eager_prefixes(m, p.x[i]).back(), p.y[i], p.margin);
  double sq = 0.0;
  for (const auto& b : m.blocks)
    for (double w : b.data()) sq += w * w;
  return loss / static_cast<double>(p.x.size()) + 0.5 * p.l2 * sq;
}

// Shuffled single-example RDA passes; returns the materialized model.
inline Model solve_rda(const ConvexProblem& p, int epochs, std::uint64_t seed, double learning_rate = 0.5) {
  Model m = zero_model(p);
  TrainConfig cfg;
  cfg.margin = p.margin;
  cfg.l2 = p.l2;
  cfg.learning_rate = learning_rate;
  OptimizerState opt(m);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(p.x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  GradientSink sink;
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      for (std::size_t j = 0; j < p.templates; ++j)
        for (FeatureId f : p.x[i].ids[j]) opt.refresh_row(m, j, f, cfg);
      const auto trace = predict_token(m, p.x[i], StoppingPolicy::full(), true);
      sink.clear();
      gradient_from_trace(trace, p.x[i].ids, p.y[i], p.margin, Objective::final_prefix, 0, sink);
      sink.coalesce();
      rda_update(m, opt, sink, cfg);
    }
  }
  opt.materialize(m, cfg);
  return m;
}

// Full-batch subgradient descent with step 1/(l2·t); returns the best
// objective value seen.
inline double subgradient_oracle(const ConvexProblem& p, int iterations) {
  Model m = zero_model(p);
  double best = regularized_loss(p, m);
  const std::size_t L = p.labels;
  const double n = static_cast<double>(p.x.size());
  for (int t = 1; t <= iterations; ++t) {
    std::vector<std::vector<double>> g(p.templates);
    for (std::size_t j = 0; j < p.templates; ++j) {
      g[j] = m.blocks[j].data();
      for (double& v : g[j]) v *= p.l2;
    }
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      const auto scores = eager_prefixes(m, p.x[i]).back();
      if (oracle_hinge(scores, p.y[i], p.margin) == 0.0) continue;
      std::size_t rival = 0;
      double rv = -1e300;
      for (std::size_t k = 0; k < L; ++k)
        if (static_cast<LabelId>(k) != p.y[i] && scores[k] > rv) rv = scores[k], rival = k;
      for (std::size_t j = 0; j < p.templates; ++j)
        for (FeatureId f : p.x[i].ids[j]) {
          g[j][static_cast<std::size_t>(f) * L + rival] += 1.0 / n;
          g[j][static_cast<std::size_t>(f) * L + static_cast<std::size_t>(p.y[i])] -= 1.0 / n;
        }
    }
    const double step = 1.0 / (p.l2 * (t + 10));
    for (std::size_t j = 0; j < p.templates; ++j)
      for (std::size_t k = 0; k < g[j].size(); ++k) m.blocks[j].data()[k] -= step * g[j][k];
    best = std::min(best, regularized_loss(p, m));
  }
  return best;
}

}  // namespace dfs::testing
