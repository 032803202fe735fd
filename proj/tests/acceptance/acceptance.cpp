// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Each criterion also has a wall-clock budget.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "itertl/io.hpp"
#include "itertl/loss.hpp"
#include "itertl/metrics.hpp"
#include "itertl/pipeline/corpus.hpp"
#include "itertl/pipeline/evaluate.hpp"
#include "itertl/pipeline/judge.hpp"
#include "itertl/pipeline/orchestrator.hpp"
#include "itertl/scoring.hpp"
#include "itertl/toy/model.hpp"
#include "itertl/toy/trainer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace itertl;
namespace fs = std::filesystem;
namespace ts = testing_support;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

// Pinned desk-scale configuration shared by the training criteria.
pipeline::RunConfig pinned_config(const fs::path& out, int T) {
  pipeline::RunConfig cfg;
  cfg.iteration.T = T;
  cfg.iteration.K = 4;
  cfg.iteration.seed = 1;
  cfg.iteration.ranking.alpha = 0.3;
  cfg.iteration.ranking.beta = 0.2;
  cfg.model_order = 3;
  cfg.trainer.step_size = 0.1;
  cfg.trainer.epoch_cap = 300;
  cfg.output_dir = out;
  return cfg;
}

std::string pinned_config_text(const fs::path& out, int T) {
  return "seed = 1\nk = 4\niterations = " + std::to_string(T) +
         "\nalpha = 0.3\nbeta = 0.2\nmodel_order = 3\nstep_size = 0.1\nepoch_cap = 300\noutput_dir = " + out.string() +
         "\n";
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// --- 1 ---------------------------------------------------------------------

Outcome ranking_loss_exactness() {
  Outcome o;
  const loss::RankingConfig defaults;
  const std::vector<double> z{0.1, 1.0};
  if (loss::ranking_loss(std::vector<double>{-2.0, -1.5}, z, defaults).value != 0.0) o.fail("hand example 0");
  if (std::abs(loss::ranking_loss(std::vector<double>{-1.0, -1.5}, z, defaults).value - 0.8) > 1e-12) {
    o.fail("hand example 0.8");
  }
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> lp(-8.0, 0.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t k = 2 + rng() % 4;
    std::vector<double> p(k);
    std::vector<double> zs(k);
    for (auto& x : p) x = lp(rng);
    for (auto& x : zs) x = rng() % 5 == 0 ? -1.0 : (rng() % 3 == 0 ? 1.0 : unit(rng));
    loss::RankingConfig cfg;
    cfg.alpha = unit(rng);
    cfg.beta = 0.5 * unit(rng);
    const double got = loss::ranking_loss(p, zs, cfg).value;
    worst = std::max(worst, std::abs(got - oracle::ranking_loss(p, zs, cfg.alpha, cfg.beta)));
  }
  if (worst > 1e-12) o.fail("max deviation " + fmt(worst));
  if (o.ok) o.detail = "10000 groups, max deviation " + fmt(worst);
  return o;
}

// --- 2 ---------------------------------------------------------------------

bool near_kink(const std::vector<double>& p, const std::vector<double>& z, const loss::RankingConfig& cfg,
               double margin) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (i != j && z[i] < z[j] - cfg.beta && std::abs(p[i] - p[j] + cfg.alpha) < margin) return true;
    }
  }
  return false;
}

Outcome gradient_fidelity() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double score_values[] = {-1.0, 0.0, 0.3, 0.7, 1.0};
  double worst_loss = 0.0;
  double worst_model = 0.0;

  // Token-level gradients of the total loss.
  for (int configs = 0; configs < 100;) {
    const std::size_t k = 2 + rng() % 4;
    std::vector<loss::ResponseLogProbs> group(k);
    std::vector<double> z(k);
    for (std::size_t i = 0; i < k; ++i) {
      group[i].token_logprobs.resize(1 + rng() % 6);
      for (double& x : group[i].token_logprobs) x = -5.0 * unit(rng) - 1e-3;
      z[i] = score_values[rng() % 5];
    }
    const std::size_t ref = rng() % k;
    loss::RankingConfig cfg;
    cfg.alpha = unit(rng);
    cfg.beta = 0.3 * unit(rng);
    cfg.lambda = 0.1 + 2.0 * unit(rng);
    std::vector<double> p;
    for (const auto& r : group) p.push_back(loss::normalized_logprob(r));
    if (near_kink(p, z, cfg, 2e-3)) continue;
    ++configs;
    const auto g = loss::loss_gradients(group, z, ref, cfg);
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t t = 0; t < group[r].length(); ++t) {
        auto f = [&](double x) {
          auto copy = group;
          copy[r].token_logprobs[t] = x;
          return loss::total_loss(copy, z, ref, cfg).total;
        };
        // Piecewise linear in the log-probs: a wide step is exact between kinks.
        const double fd = oracle::central_difference(f, group[r].token_logprobs[t], 1e-3);
        worst_loss = std::max(worst_loss, oracle::relative_error(g[r][t], fd, 1e-6));
      }
    }
  }

  // Full backprop through the context-table model.
  const toy::Vocab vocab({"<bos>", "<eos>", "a", "b", "c"});
  std::normal_distribution<double> init(0.0, 1.0);
  for (int configs = 0; configs < 100;) {
    toy::ToyModel m(vocab, 1 + static_cast<int>(rng() % 2));
    std::vector<toy::TrainingGroup> batch(1 + rng() % 3);
    for (auto& grp : batch) {
      grp.prompt = {static_cast<toy::TokenId>(2 + rng() % 3)};
      const std::size_t k = 2 + rng() % 3;
      for (std::size_t i = 0; i < k; ++i) {
        std::vector<toy::TokenId> resp(1 + rng() % 4);
        for (auto& t : resp) t = static_cast<toy::TokenId>(rng() % 5);
        grp.responses.push_back(resp);
        grp.scores.push_back(score_values[rng() % 5]);
      }
      grp.reference_index = rng() % k;
    }
    loss::RankingConfig cfg;
    cfg.lambda = 0.2 + 1.8 * unit(rng);
    toy::batch_gradient(m, batch, cfg);  // creates every row the batch reads
    for (double& x : m.mutable_logits()) x = init(rng);
    bool kink = false;
    for (const auto& grp : batch) {
      std::vector<double> p;
      for (const auto& r : grp.responses) p.push_back(loss::normalized_logprob(toy::score_sequence(m, grp.prompt, r)));
      kink = kink || near_kink(p, grp.scores, cfg, 1e-3);
    }
    if (kink) continue;
    ++configs;
    const auto g = toy::batch_gradient(m, batch, cfg);
    auto objective = [&](const toy::ToyModel& model) {
      double s = 0.0;
      for (const auto& grp : batch) s += toy::evaluate_group(model, grp, cfg).total;
      return s / static_cast<double>(batch.size());
    };
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto f = [&](double x) {
        toy::ToyModel copy = m;
        copy.mutable_logits()[i] = x;
        return objective(copy);
      };
      const double fd = oracle::central_difference(f, m.logits()[i], 1e-4);
      worst_model = std::max(worst_model, oracle::relative_error(g[i], fd, 1e-6));
    }
  }
  if (worst_loss >= 1e-4) o.fail("loss_gradients relative error " + fmt(worst_loss));
  if (worst_model >= 1e-4) o.fail("model backprop relative error " + fmt(worst_model));
  if (o.ok) o.detail = "max relative error " + fmt(worst_loss) + " (loss), " + fmt(worst_model) + " (model)";
  return o;
}

// --- 3 and 4 ------------------------------------------------------------------

struct Runs {
  pipeline::RunResult t3;
  pipeline::RunResult t1;
  pipeline::RunResult unfiltered;
};

double greedy_pass_at_1(const pipeline::RunResult& run, std::span<const InstructionRecord> eval_set) {
  pipeline::ToyBackend backend(run.final_model, run.manifest["final_digest"].get<std::string>(), 1);
  pipeline::BuiltinJudge judge;
  pipeline::EvalConfig cfg;
  cfg.ks = {1};
  cfg.n = 1;
  cfg.seed = 1;
  return pipeline::evaluate(backend, eval_set, judge, cfg).pass_at_1;
}

Outcome loss_decreases(const pipeline::RunResult& run) {
  Outcome o;
  std::vector<double> losses;
  for (const auto& it : run.manifest["iterations"]) losses.push_back(it["converged_loss"].get<double>());
  if (losses.size() != 3) {
    o.fail("expected 3 iterations, got " + std::to_string(losses.size()));
    return o;
  }
  for (std::size_t t = 0; t + 1 < losses.size(); ++t) {
    if (!(losses[t + 1] <= 1.05 * losses[t])) o.fail("iteration " + std::to_string(t + 2) + " loss rose by more than 5%");
  }
  if (!(losses.back() < losses.front())) o.fail("final loss not below the first iteration's");
  std::string trail;
  for (double l : losses) trail += (trail.empty() ? "" : ", ") + fmt(l);
  o.detail = (o.ok ? "converged losses " : o.detail + "; converged losses ") + trail;
  return o;
}

Outcome iterative_beats_baselines(const Runs& runs) {
  Outcome o;
  const auto eval_set = scoring::filter_corpus(pipeline::synthetic_corpus());
  const double t3 = greedy_pass_at_1(runs.t3, eval_set);
  const double t1 = greedy_pass_at_1(runs.t1, eval_set);
  const double unf = greedy_pass_at_1(runs.unfiltered, eval_set);
  if (!(t3 >= t1)) o.fail("T=3 below T=1");
  if (!(t3 >= unf)) o.fail("filtered below unfiltered");
  const std::string numbers = "pass@1 T=3 " + fmt(t3) + ", T=1 " + fmt(t1) + ", unfiltered T=3 " + fmt(unf) + " on " +
                              std::to_string(eval_set.size()) + " problems";
  o.detail = o.ok ? numbers : o.detail + "; " + numbers;
  return o;
}

// --- 5 ---------------------------------------------------------------------

Outcome pass_at_k_exactness() {
  Outcome o;
  double worst = 0.0;
  int cases = 0;
  for (int n = 1; n <= 12; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k <= n; ++k) {
        worst = std::max(worst, std::abs(metrics::pass_at_k({n, c, k}) - oracle::pass_at_k_enumerated(n, c, k)));
        ++cases;
      }
    }
  }
  if (worst > 1e-12) o.fail("max deviation " + fmt(worst));
  const double ten = metrics::pass_at_k({10, 3, 5});
  if (std::abs(ten - 11.0 / 12.0) > 1e-12) o.fail("(10,3,5) gave " + fmt(ten));
  if (o.ok) o.detail = std::to_string(cases) + " cases, max deviation " + fmt(worst) + ", (10,3,5) = " + fmt(ten);
  return o;
}

// --- 6 ---------------------------------------------------------------------

Outcome filter_behavior() {
  Outcome o;
  const std::string reference = "module ref(input a, input b, output y);\n  assign y = a & b;\nendmodule\n";
  std::map<std::string, int> counts;
  int misclassified = 0;
  const scoring::FilterPolicy policy;
  for (const auto& entry : fs::directory_iterator(ts::data_dir() / "filter_corpus")) {
    const std::string name = entry.path().filename().string();
    const std::string category = name.substr(0, name.find('_'));
    const std::string text = ts::slurp(entry.path());
    ++counts[category];
    const bool should_drop = category == "multi" || category == "broken";
    const scoring::FilterDecision d = scoring::filter_reference({name, "instruction", text});
    bool wrong = d.keep == should_drop;
    const scoring::QualityScore s = scoring::score_response(text, reference, policy);
    if (category == "multi") wrong = wrong || s.value != -1.0;
    if (category == "valid") wrong = wrong || s.value != 1.0;
    if (wrong) {
      ++misclassified;
      o.fail("misclassified " + name);
    }
  }
  int total = 0;
  for (const auto& [cat, n] : counts) total += n;
  if (total != 50 || counts.size() != 4) o.fail("corpus is not 50 files in 4 categories");
  if (o.ok) o.detail = std::to_string(total) + " files, 0 misclassifications";
  else o.detail += " (" + std::to_string(misclassified) + " total)";
  return o;
}

// --- 7 ---------------------------------------------------------------------

// Independent truncation: sort by probability, keep the shortest prefix
// reaching top_p, renormalise.
std::map<toy::TokenId, double> truncated(const std::vector<double>& probs, double top_p) {
  std::vector<toy::TokenId> order(probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<toy::TokenId>(i);
  std::stable_sort(order.begin(), order.end(), [&](toy::TokenId a, toy::TokenId b) { return probs[a] > probs[b]; });
  std::map<toy::TokenId, double> kept;
  double mass = 0.0;
  for (toy::TokenId id : order) {
    kept[id] = probs[id];
    mass += probs[id];
    if (mass >= top_p) break;
  }
  for (auto& [id, p] : kept) p /= mass;
  return kept;
}

Outcome nucleus_sampling() {
  Outcome o;
  const toy::Vocab vocab({"<bos>", "<eos>", "a", "b", "c", "d"});
  // <bos>, <eos>, a, b, c, d
  const std::vector<double> probs{0.01, 0.06, 0.45, 0.30, 0.15, 0.03};
  toy::ToyModel m(vocab, 1);
  const std::size_t row = m.ensure_row(toy::Context{vocab.bos()});
  for (std::size_t i = 0; i < probs.size(); ++i) m.row_at(row)[i] = std::log(probs[i]);
  const double top_p = 0.85;
  const auto expected = truncated(probs, top_p);

  const int draws = 100000;
  std::vector<int> counts(probs.size(), 0);
  toy::Rng rng(12345);
  const toy::DecodingParams params{1.0, top_p, 1};
  for (int i = 0; i < draws; ++i) {
    const toy::SampleResult s = toy::sample(m, std::vector<toy::TokenId>{}, params, rng);
    ++counts.at(static_cast<std::size_t>(s.tokens.at(0)));
  }
  double worst_sigma = 0.0;
  int excluded = 0;
  for (std::size_t id = 0; id < probs.size(); ++id) {
    const auto it = expected.find(static_cast<toy::TokenId>(id));
    if (it == expected.end()) {
      excluded += counts[id];
      continue;
    }
    const double mean = draws * it->second;
    const double sigma = std::sqrt(draws * it->second * (1.0 - it->second));
    worst_sigma = std::max(worst_sigma, std::abs(counts[id] - mean) / sigma);
  }
  if (worst_sigma > 4.0) o.fail("frequency off by " + fmt(worst_sigma) + " sigma");
  if (excluded != 0) o.fail(std::to_string(excluded) + " draws of excluded tokens");

  // Greedy decoding against the argmax of random rows.
  std::mt19937_64 gen(4);
  std::normal_distribution<double> normal(0.0, 3.0);
  int greedy_mismatch = 0;
  const toy::DecodingParams greedy{0.0, 0.95, 1};
  for (int trial = 0; trial < 1000; ++trial) {
    toy::ToyModel rm(vocab, 1);
    const std::size_t r = rm.ensure_row(toy::Context{vocab.bos()});
    auto span = rm.row_at(r);
    for (double& x : span) x = normal(gen);
    const auto argmax = static_cast<toy::TokenId>(std::max_element(span.begin(), span.end()) - span.begin());
    toy::Rng unused(static_cast<std::uint64_t>(trial));
    if (toy::sample(rm, std::vector<toy::TokenId>{}, greedy, unused).tokens.at(0) != argmax) ++greedy_mismatch;
  }
  if (greedy_mismatch != 0) o.fail(std::to_string(greedy_mismatch) + " greedy draws differ from argmax");
  if (o.ok) o.detail = "max deviation " + fmt(worst_sigma) + " sigma, 0 excluded draws, greedy = argmax on 1000 rows";
  return o;
}

// --- 8 ---------------------------------------------------------------------

Outcome determinism_and_crash_safety(const fs::path& scratch, const pipeline::RunResult& reference_run) {
  Outcome o;
  const pipeline::RunResult again = pipeline::run_loop(pipeline::synthetic_corpus(), pinned_config(scratch / "repeat", 3));
  const std::string a = io::file_sha256(reference_run.manifest_path);
  const std::string b = io::file_sha256(again.manifest_path);
  if (a != b) o.fail("manifest digests differ");

  const fs::path run = scratch / "crash";
  ts::spit(scratch / "crash.conf", pinned_config_text(run, 3));
  const auto res = ts::run_process({ts::cli_path().string(), "train", "--config", (scratch / "crash.conf").string()},
                                   {{"ITERTL_FAULT_INJECT", "1:train"}}, scratch);
  if (res.exit_code != 86) o.fail("fault injection did not kill the run (exit " + std::to_string(res.exit_code) + ")");
  try {
    const io::Json m = io::Json::parse(io::read_file(run / "manifest.json"));
    if (m["status"] != "running") o.fail("manifest status is " + m["status"].dump());
    if (m["iterations"].size() != 1) o.fail("manifest lists " + std::to_string(m["iterations"].size()) + " iterations");
    for (const auto& it : m["iterations"]) {
      for (const char* key : {"scored", "trace", "checkpoint"}) {
        if (io::file_sha256(run / it[key]["path"].get<std::string>()) != it[key]["sha256"]) {
          o.fail(std::string(key) + " hash mismatch");
        }
      }
    }
    // The completed iteration must match the uninterrupted run byte for byte.
    const io::Json& full = reference_run.manifest["iterations"][0];
    if (m["iterations"][0]["checkpoint"]["sha256"] != full["checkpoint"]["sha256"]) {
      o.fail("completed iteration differs from the uninterrupted run");
    }
  } catch (const std::exception& e) {
    o.fail(std::string("manifest unreadable: ") + e.what());
  }
  if (o.ok) o.detail = "manifest sha256 " + a.substr(0, 16) + "..., crash left 1 consistent iteration";
  return o;
}

}  // namespace

int main() {
  ts::TempDir scratch;
  int failures = 0;
  auto report = [&](int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > budget_s) o.fail("over the " + fmt(budget_s) + " s budget");
    failures += o.ok ? 0 : 1;
    std::printf("%s criterion %d: %s: %s (%.2f s)\n", o.ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "ranking loss matches brute-force enumeration", 5.0, ranking_loss_exactness);
  report(2, "gradients match finite differences", 30.0, gradient_fidelity);

  Runs runs;
  bool have_runs = false;
  report(3, "converged loss decreases across iterations", 300.0, [&] {
    runs.t3 = pipeline::run_loop(pipeline::synthetic_corpus(), pinned_config(scratch / "t3", 3));
    have_runs = true;
    return loss_decreases(runs.t3);
  });
  report(4, "iterative, filtered training is not worse than the baselines", 600.0, [&] {
    if (!have_runs) throw std::runtime_error("the T=3 run did not complete");
    runs.t1 = pipeline::run_loop(pipeline::synthetic_corpus(), pinned_config(scratch / "t1", 1));
    pipeline::RunConfig unfiltered = pinned_config(scratch / "unfiltered", 3);
    unfiltered.iteration.filter.enabled = false;
    runs.unfiltered = pipeline::run_loop(pipeline::synthetic_corpus(), unfiltered);
    return iterative_beats_baselines(runs);
  });
  report(5, "pass@k equals exhaustive enumeration", 5.0, pass_at_k_exactness);
  report(6, "data filter classifies the crafted corpus", 60.0, filter_behavior);
  report(7, "nucleus sampling frequencies and greedy argmax", 120.0, nucleus_sampling);
  report(8, "seeded runs are reproducible and crash-safe", 600.0, [&] {
    if (!have_runs) throw std::runtime_error("the T=3 run did not complete");
    return determinism_and_crash_safety(scratch.path(), runs.t3);
  });

  std::printf("%d of 8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
