// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "itertl/io.hpp"
#include "itertl/pipeline/backend.hpp"
#include "itertl/pipeline/judge.hpp"

namespace itertl::pipeline {

struct EvalConfig {
  std::vector<toy::DecodingParams> decoding;  // temperature grid for pass@k, k >= 2
  std::vector<int> ks{1, 5, 10};
  int n = 10;
  std::uint64_t seed = 0;
  int workers = 1;
  int max_tokens = 128;  // for the greedy pass@1 sample
};

struct SampleVerdict {
  std::string record_id;
  double temperature = 0.0;
  int sample = 0;  // -1 for the greedy pass@1 sample
  std::string code;
  Verdict verdict;
};

struct TemperatureResult {
  double temperature = 0.0;
  std::map<int, double> pass_at_k;
};

struct EvalReport {
  std::string judge;
  std::size_t problems = 0;
  int n = 0;
  double pass_at_1 = 0.0;                 // greedy decoding only
  std::map<int, double> best_pass_at_k;   // k >= 2: best over temperatures
  std::vector<TemperatureResult> per_temperature;
  std::vector<SampleVerdict> verdicts;
  std::size_t judge_errors = 0;

  io::Json to_json() const;  // summary without per-sample verdicts
  std::string to_text() const;
  std::string verdicts_jsonl() const;
};

// Throws std::invalid_argument on an empty corpus or a k outside [1, n].
EvalReport evaluate(GenerationBackend& backend, std::span<const InstructionRecord> corpus, Judge& judge,
                    const EvalConfig& cfg);

}  // namespace itertl::pipeline
