// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "itertl/toy/trainer.hpp"
#include "oracles.hpp"

using namespace itertl;
using namespace itertl::toy;

namespace {

Vocab vocab5() { return Vocab({"<bos>", "<eos>", "a", "b", "c"}); }

TrainingGroup random_group(std::mt19937_64& rng, std::size_t vocab_size) {
  TrainingGroup g;
  g.prompt = {static_cast<TokenId>(2 + rng() % (vocab_size - 2))};
  const std::size_t k = 2 + rng() % 3;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<TokenId> r(1 + rng() % 4);
    for (auto& t : r) t = static_cast<TokenId>(rng() % vocab_size);
    g.responses.push_back(r);
    const double choices[] = {-1.0, 0.0, 0.3, 0.7, 1.0};
    g.scores.push_back(choices[rng() % 5]);
  }
  g.reference_index = rng() % k;
  return g;
}

double batch_total(const ToyModel& m, const std::vector<TrainingGroup>& batch, const loss::RankingConfig& cfg) {
  double sum = 0.0;
  for (const auto& g : batch) sum += evaluate_group(m, g, cfg).total;
  return sum / static_cast<double>(batch.size());
}

// True when some eligible pair sits within `eps` of its hinge kink.
bool near_kink(const ToyModel& m, const std::vector<TrainingGroup>& batch, const loss::RankingConfig& cfg, double eps) {
  for (const auto& g : batch) {
    std::vector<double> p;
    for (const auto& r : g.responses) p.push_back(loss::normalized_logprob(score_sequence(m, g.prompt, r)));
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (i != j && g.scores[i] < g.scores[j] - cfg.beta && std::abs(p[i] - p[j] + cfg.alpha) < eps) return true;
      }
    }
  }
  return false;
}

double reference_loglik(const ToyModel& m, const TrainingGroup& g) {
  double s = 0.0;
  for (double x : score_sequence(m, g.prompt, g.responses[g.reference_index]).token_logprobs) s += x;
  return s;
}

}  // namespace

TEST_CASE("backprop through the model matches central finite differences") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> init(0.0, 1.0);
  int configs = 0;
  int checked = 0;
  while (configs < 60) {
    ToyModel m(vocab5(), 1);
    std::vector<TrainingGroup> batch;
    for (std::size_t b = 0, n = 1 + rng() % 3; b < n; ++b) batch.push_back(random_group(rng, 5));
    loss::RankingConfig cfg;
    cfg.lambda = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
    batch_gradient(m, batch, cfg);  // materialises the rows the batch reads
    for (double& x : m.mutable_logits()) x = init(rng);
    if (near_kink(m, batch, cfg, 1e-3)) continue;
    ++configs;
    const auto g = batch_gradient(m, batch, cfg);
    REQUIRE(g.size() == m.logits().size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto f = [&](double x) {
        ToyModel copy = m;
        copy.mutable_logits()[i] = x;
        return batch_total(copy, batch, cfg);
      };
      const double fd = oracle::central_difference(f, m.logits()[i], 1e-4);
      CHECK(oracle::relative_error(g[i], fd, 1e-6) < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 300);
}

TEST_CASE("lambda zero step increases the reference log-likelihood") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ToyModel m(vocab5(), 2);
    const TrainingGroup g = random_group(rng, 5);
    TrainerConfig cfg;
    cfg.ranking.lambda = 0.0;
    cfg.step_size = 1e-3;
    Trainer t(m, cfg);
    const double before = reference_loglik(m, g);
    t.train_step(std::vector<TrainingGroup>{g});
    CHECK(reference_loglik(m, g) > before);
  }
}

TEST_CASE("equal scores update exactly like lambda zero") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    TrainingGroup g = random_group(rng, 5);
    std::fill(g.scores.begin(), g.scores.end(), 0.5);
    ToyModel a(vocab5(), 2);
    ToyModel b(vocab5(), 2);
    TrainerConfig ca;
    TrainerConfig cb;
    cb.ranking.lambda = 0.0;
    Trainer ta(a, ca);
    Trainer tb(b, cb);
    for (int s = 0; s < 3; ++s) {
      ta.train_step(std::vector<TrainingGroup>{g});
      tb.train_step(std::vector<TrainingGroup>{g});
    }
    CHECK(std::vector<double>(a.logits().begin(), a.logits().end()) ==
          std::vector<double>(b.logits().begin(), b.logits().end()));
  }
}

TEST_CASE("an active pair widens its log-prob gap after one step") {
  ToyModel m(vocab5(), 1);
  TrainingGroup g;
  g.prompt = {2};
  g.responses = {{3, 1}, {4, 1}};
  g.scores = {0.0, 1.0};
  g.reference_index = 1;
  // Make the low-scored response the likelier one so the pair is active.
  const std::size_t r = m.ensure_row(Context{0});
  m.row_at(r)[3] = 2.0;
  TrainerConfig cfg;
  cfg.step_size = 1e-2;
  const auto p = [&](std::size_t k) { return loss::normalized_logprob(score_sequence(m, g.prompt, g.responses[k])); };
  const auto before = evaluate_group(m, g, cfg.ranking);
  REQUIRE(before.active_pairs == 1);
  const double gap_before = p(1) - p(0);
  Trainer t(m, cfg);
  t.train_step(std::vector<TrainingGroup>{g});
  CHECK(p(1) - p(0) > gap_before);
}

TEST_CASE("a single sequence is memorised") {
  ToyModel m(vocab5(), 2);
  TrainingGroup g;
  g.prompt = {2, 3};
  g.responses = {{4, 4, 2}, {3, 2, 4, 3, 1}};
  g.scores = {0.2, 1.0};
  g.reference_index = 1;
  TrainerConfig cfg;
  cfg.ranking.lambda = 0.0;
  cfg.step_size = 0.1;
  cfg.epoch_cap = 2000;
  cfg.tolerance = 1e-4;
  Trainer t(m, cfg);
  const TrainingTrace trace = t.train_to_convergence(std::vector<TrainingGroup>{g});
  CHECK(trace.epochs.back().l_ce < 1e-2);
  CHECK(evaluate_group(m, g, cfg.ranking).l_ce < 1e-2);
}

TEST_CASE("stop rule and epoch cap") {
  std::mt19937_64 rng(8);
  std::vector<TrainingGroup> data;
  for (int i = 0; i < 5; ++i) data.push_back(random_group(rng, 5));

  SUBCASE("cap of one epoch") {
    ToyModel m(vocab5(), 2);
    TrainerConfig cfg;
    cfg.epoch_cap = 1;
    cfg.batch_size = 2;
    Trainer t(m, cfg);
    const auto trace = t.train_to_convergence(data);
    CHECK(trace.epochs.size() == 1);
    CHECK(trace.steps.size() == 3);
    CHECK_FALSE(trace.converged);
    CHECK(trace.converged_loss() == trace.epochs.back().total);
  }
  SUBCASE("loose tolerance stops once the window is full") {
    ToyModel m(vocab5(), 2);
    TrainerConfig cfg;
    cfg.tolerance = 1e9;
    Trainer t(m, cfg);
    const auto trace = t.train_to_convergence(data);
    CHECK(trace.converged);
    CHECK(trace.epochs.size() == static_cast<std::size_t>(cfg.window) + 1);
  }
  SUBCASE("empty dataset") {
    ToyModel m(vocab5(), 2);
    Trainer t(m, TrainerConfig{});
    CHECK_THROWS_AS(t.train_to_convergence(std::vector<TrainingGroup>{}), std::invalid_argument);
    CHECK(TrainingTrace{}.epochs.empty());
    CHECK_THROWS_AS(TrainingTrace{}.converged_loss(), std::logic_error);
  }
}

TEST_CASE("training is deterministic for a seed") {
  std::mt19937_64 rng(10);
  std::vector<TrainingGroup> data;
  for (int i = 0; i < 7; ++i) data.push_back(random_group(rng, 5));
  auto run = [&](std::uint64_t seed) {
    ToyModel m(vocab5(), 2);
    TrainerConfig cfg;
    cfg.seed = seed;
    cfg.epoch_cap = 10;
    Trainer t(m, cfg);
    t.train_to_convergence(data);
    return std::vector<double>(m.logits().begin(), m.logits().end());
  };
  CHECK(run(3) == run(3));
  CHECK(run(3) != run(4));
}

TEST_CASE("non-finite gradients abort the step and leave the model untouched") {
  ToyModel m(vocab5(), 1);
  TrainingGroup g;
  g.prompt = {2};
  g.responses = {{3}, {3}, {4}};
  g.scores = {-1.0, 0.0, 1.0};
  g.reference_index = 2;
  TrainerConfig cfg;
  cfg.ranking.lambda = std::numeric_limits<double>::max();
  cfg.ranking.alpha = 1.0;
  Trainer t(m, cfg);
  const auto before = std::vector<double>(m.logits().begin(), m.logits().end());
  CHECK_THROWS_AS(t.train_step(std::vector<TrainingGroup>{g}), std::runtime_error);
  // Rows read by the batch may have been created, but only as zeros.
  const auto after = m.logits();
  REQUIRE(after.size() >= before.size());
  CHECK(std::equal(before.begin(), before.end(), after.begin()));
  CHECK(std::all_of(after.begin() + static_cast<std::ptrdiff_t>(before.size()), after.end(), [](double x) { return x == 0.0; }));
  CHECK(t.steps_taken() == 0);
}

TEST_CASE("malformed groups and configs are rejected") {
  ToyModel m(vocab5(), 1);
  TrainingGroup g;
  g.prompt = {2};
  g.responses = {{3}, {4}};
  g.scores = {0.0};
  CHECK_THROWS_AS(evaluate_group(m, g, {}), std::invalid_argument);
  g.scores = {0.0, 1.0};
  g.reference_index = 2;
  CHECK_THROWS_AS(evaluate_group(m, g, {}), std::invalid_argument);
  g.reference_index = 1;
  g.responses[0] = {9};
  CHECK_THROWS_AS(evaluate_group(m, g, {}), std::invalid_argument);
  g.responses[0] = {};
  CHECK_THROWS_AS(evaluate_group(m, g, {}), std::invalid_argument);
  CHECK_THROWS_AS(batch_gradient(m, std::vector<TrainingGroup>{}, {}), std::invalid_argument);
  TrainerConfig bad;
  bad.step_size = 0.0;
  CHECK_THROWS_AS(Trainer(m, bad), std::invalid_argument);
  bad = {};
  bad.batch_size = 0;
  CHECK_THROWS_AS(Trainer(m, bad), std::invalid_argument);
}
