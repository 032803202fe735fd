// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "itertl/loss.hpp"
#include "itertl/scoring.hpp"
#include "itertl/toy/model.hpp"
#include "itertl/toy/trainer.hpp"

namespace itertl::pipeline {

// Invalid configuration; maps to the CLI's usage/config exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IterationConfig {
  int K = 4;
  int T = 3;
  loss::RankingConfig ranking;
  toy::DecodingParams train_decoding{0.5, 0.95, 128};
  std::vector<toy::DecodingParams> eval_decoding{{0.0, 0.95, 128}, {0.2, 0.95, 128}, {0.5, 0.95, 128}, {0.8, 0.95, 128}};
  scoring::FilterPolicy filter;
  std::uint64_t seed = 0;

  static constexpr int kMaxIterations = 7;
  void validate() const;  // throws ConfigError
};

struct RemoteOptions {
  std::string url;
  int timeout_ms = 30000;
  int retries = 4;  // attempts after the first one
  int backoff_ms = 200;
  int max_backoff_ms = 5000;
  int checkpoint_poll_ms = 1000;
  int checkpoint_timeout_s = 3600;
};

struct RunConfig {
  IterationConfig iteration;
  toy::TrainerConfig trainer;  // its ranking field is overwritten by iteration.ranking
  int model_order = 2;
  std::filesystem::path corpus;       // empty: bundled synthetic corpus
  std::filesystem::path eval_corpus;  // empty: training corpus records with a valid reference
  std::filesystem::path output_dir = "itertl-run";
  RemoteOptions remote;               // remote mode when remote.url is set
  std::string judge_cmd;              // empty: built-in structural judge
  int workers = 0;                    // 0: hardware concurrency
  bool early_stop = false;
  double early_stop_threshold = 1e-3;  // relative; infinity never stops
  bool accumulate_samples = false;
  std::vector<int> eval_k{1, 5, 10};
  int eval_samples = 10;

  bool remote_mode() const { return !remote.url.empty(); }
  int effective_workers() const;
  toy::TrainerConfig trainer_config() const;
  void validate() const;  // throws ConfigError
};

// Text form: one `key = value` per line, `#` starts a comment, `${NAME}` and
// `${NAME:-fallback}` expand from the environment. Unknown keys and malformed
// values throw ConfigError. Relative paths resolve against `base_dir`.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// Applies a single key/value pair (same keys as the file format).
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value,
                   const std::filesystem::path& base_dir = {});

std::string expand_env(std::string_view text);

// Every recognised key, sorted.
std::vector<std::string> config_keys();

}  // namespace itertl::pipeline
