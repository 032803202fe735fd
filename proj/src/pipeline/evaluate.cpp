// SPDX-License-Identifier: Apache-2.0
#include "itertl/pipeline/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "itertl/metrics.hpp"
#include "itertl/pipeline/curves.hpp"
#include "itertl/pipeline/parallel.hpp"

namespace itertl::pipeline {
namespace {

constexpr std::uint64_t kEvalDomain = 0xE7A1ULL << 48;

std::string sample_key(const std::string& record_id, std::size_t temp_index, int sample) {
  std::string key = record_id + "_t" + std::to_string(temp_index) + "_s" + (sample < 0 ? "g" : std::to_string(sample));
  for (char& c : key) {
    if (c == '/' || c == '\\') c = '_';
  }
  return key;
}

}  // namespace

EvalReport evaluate(GenerationBackend& backend, std::span<const InstructionRecord> corpus, Judge& judge,
                    const EvalConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("evaluate: empty eval corpus");
  if (cfg.n < 1) throw std::invalid_argument("evaluate: n must be positive");
  for (int k : cfg.ks) {
    if (k < 1 || k > cfg.n) throw std::invalid_argument("evaluate: k must be in [1, n]");
  }
  const bool need_grid = std::any_of(cfg.ks.begin(), cfg.ks.end(), [](int k) { return k >= 2; });
  if (need_grid && cfg.decoding.empty()) throw std::invalid_argument("evaluate: no eval temperatures");

  EvalReport report;
  report.judge = judge.name();
  report.problems = corpus.size();
  report.n = cfg.n;

  // Greedy pass@1.
  std::vector<SampleVerdict> greedy(corpus.size());
  const toy::DecodingParams greedy_params{0.0, 1.0, cfg.max_tokens};
  parallel_for(corpus.size(), cfg.workers, [&](std::size_t i) {
    const auto samples = backend.generate(corpus[i], greedy_params, 1, kEvalDomain | i);
    SampleVerdict& v = greedy[i];
    v.record_id = corpus[i].id;
    v.temperature = 0.0;
    v.sample = -1;
    v.code = samples.at(0).code;
    v.verdict = judge.judge(corpus[i], v.code, sample_key(corpus[i].id, 0, -1));
  });
  std::size_t greedy_pass = 0;
  for (const auto& v : greedy) greedy_pass += v.verdict.pass ? 1 : 0;
  report.pass_at_1 = static_cast<double>(greedy_pass) / static_cast<double>(corpus.size());
  report.verdicts = greedy;

  if (need_grid) {
    for (std::size_t ti = 0; ti < cfg.decoding.size(); ++ti) {
      const toy::DecodingParams& params = cfg.decoding[ti];
      std::vector<std::vector<SampleVerdict>> per_problem(corpus.size());
      parallel_for(corpus.size(), cfg.workers, [&](std::size_t i) {
        const std::uint64_t stream = kEvalDomain | (static_cast<std::uint64_t>(ti + 1) << 32) | i;
        const auto samples = backend.generate(corpus[i], params, cfg.n, stream);
        for (int s = 0; s < cfg.n; ++s) {
          SampleVerdict v;
          v.record_id = corpus[i].id;
          v.temperature = params.temperature;
          v.sample = s;
          v.code = samples.at(static_cast<std::size_t>(s)).code;
          v.verdict = judge.judge(corpus[i], v.code, sample_key(corpus[i].id, ti + 1, s));
          per_problem[i].push_back(std::move(v));
        }
      });
      std::vector<metrics::PassAtKInput> inputs;
      for (const auto& verdicts : per_problem) {
        int c = 0;
        for (const auto& v : verdicts) c += v.verdict.pass ? 1 : 0;
        inputs.push_back({cfg.n, c, 1});
        report.verdicts.insert(report.verdicts.end(), verdicts.begin(), verdicts.end());
      }
      TemperatureResult tr;
      tr.temperature = params.temperature;
      for (int k : cfg.ks) {
        if (k < 2) continue;
        tr.pass_at_k[k] = metrics::aggregate_pass_at_k(inputs, k);
        auto [it, inserted] = report.best_pass_at_k.emplace(k, tr.pass_at_k[k]);
        if (!inserted) it->second = std::max(it->second, tr.pass_at_k[k]);
      }
      report.per_temperature.push_back(std::move(tr));
    }
  }
  for (const auto& v : report.verdicts) report.judge_errors += v.verdict.judge_error ? 1 : 0;
  return report;
}

io::Json EvalReport::to_json() const {
  io::Json best = io::Json::object();
  for (const auto& [k, v] : best_pass_at_k) best[std::to_string(k)] = v;
  io::Json temps = io::Json::array();
  for (const auto& t : per_temperature) {
    io::Json ks = io::Json::object();
    for (const auto& [k, v] : t.pass_at_k) ks[std::to_string(k)] = v;
    temps.push_back({{"temperature", t.temperature}, {"pass_at_k", ks}});
  }
  return {{"judge", judge},       {"problems", problems},   {"n", n},
          {"pass_at_1", pass_at_1}, {"pass_at_k", best},     {"per_temperature", temps},
          {"judge_errors", judge_errors}};
}

std::string EvalReport::to_text() const {
  std::string out = "problems " + std::to_string(problems) + ", judge " + judge + "\n";
  char line[96];
  std::snprintf(line, sizeof line, "pass@1   %.4f  (greedy)\n", pass_at_1);
  out += line;
  for (const auto& [k, v] : best_pass_at_k) {
    double best_t = 0.0;
    for (const auto& t : per_temperature) {
      if (t.pass_at_k.at(k) == v) {
        best_t = t.temperature;
        break;
      }
    }
    std::snprintf(line, sizeof line, "pass@%-3d %.4f  (best at temperature %g)\n", k, v, best_t);
    out += line;
  }
  if (judge_errors > 0) out += "judge errors: " + std::to_string(judge_errors) + " (counted as failures)\n";
  return out;
}

std::string EvalReport::verdicts_jsonl() const {
  std::string out;
  for (const auto& v : verdicts) {
    io::Json row{{"record_id", v.record_id},
                 {"temperature", v.temperature},
                 {"sample", v.sample},
                 {"pass", v.verdict.pass},
                 {"judge_error", v.verdict.judge_error},
                 {"detail", v.verdict.detail},
                 {"code", v.code}};
    out += row.dump() + "\n";
  }
  return out;
}

}  // namespace itertl::pipeline
