// SPDX-License-Identifier: Apache-2.0
#include "itertl/pipeline/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <thread>

#include "itertl/io.hpp"

namespace itertl::pipeline {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': expected " + std::string(expected) + ", got '" +
                    std::string(value) + "'");
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || std::isnan(x)) bad_value(key, v, "a number");
  return x;
}

long long parse_int(std::string_view key, std::string_view v) {
  long long x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return x;
}

int parse_small_int(std::string_view key, std::string_view v) {
  const long long x = parse_int(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) bad_value(key, v, "an integer");
  return static_cast<int>(x);
}

std::uint64_t parse_seed(std::string_view key, std::string_view v) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return x;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    std::size_t end = v.find(',', pos);
    if (end == std::string_view::npos) end = v.size();
    out.push_back(trim(v.substr(pos, end - pos)));
    pos = end + 1;
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view v) {
  std::filesystem::path p{std::string(v)};
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value,
                                  const std::filesystem::path& base)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"seed", [](RunConfig& c, auto k, auto v, auto&) { c.iteration.seed = parse_seed(k, v); }},
      {"k", [](RunConfig& c, auto k, auto v, auto&) { c.iteration.K = parse_small_int(k, v); }},
      {"iterations", [](RunConfig& c, auto k, auto v, auto&) { c.iteration.T = parse_small_int(k, v); }},
      {"alpha", [](RunConfig& c, auto k, auto v, auto&) { c.iteration.ranking.alpha = parse_double(k, v); }},
      {"beta", [](RunConfig& c, auto k, auto v, auto&) { c.iteration.ranking.beta = parse_double(k, v); }},
      {"lambda", [](RunConfig& c, auto k, auto v, auto&) { c.iteration.ranking.lambda = parse_double(k, v); }},
      {"train_temperature",
       [](RunConfig& c, auto k, auto v, auto&) { c.iteration.train_decoding.temperature = parse_double(k, v); }},
      {"train_top_p", [](RunConfig& c, auto k, auto v, auto&) { c.iteration.train_decoding.top_p = parse_double(k, v); }},
      {"max_tokens",
       [](RunConfig& c, auto k, auto v, auto&) {
         const int n = parse_small_int(k, v);
         c.iteration.train_decoding.max_tokens = n;
         for (auto& d : c.iteration.eval_decoding) d.max_tokens = n;
       }},
      {"eval_temperatures",
       [](RunConfig& c, auto k, auto v, auto&) {
         const double top_p = c.iteration.eval_decoding.empty() ? 0.95 : c.iteration.eval_decoding.front().top_p;
         const int max_tokens = c.iteration.train_decoding.max_tokens;
         c.iteration.eval_decoding.clear();
         for (std::string_view item : split_list(v)) {
           c.iteration.eval_decoding.push_back({parse_double(k, item), top_p, max_tokens});
         }
       }},
      {"eval_top_p",
       [](RunConfig& c, auto k, auto v, auto&) {
         const double p = parse_double(k, v);
         for (auto& d : c.iteration.eval_decoding) d.top_p = p;
       }},
      {"eval_k",
       [](RunConfig& c, auto k, auto v, auto&) {
         c.eval_k.clear();
         for (std::string_view item : split_list(v)) c.eval_k.push_back(parse_small_int(k, item));
       }},
      {"eval_samples", [](RunConfig& c, auto k, auto v, auto&) { c.eval_samples = parse_small_int(k, v); }},
      {"filter", [](RunConfig& c, auto k, auto v, auto&) { c.iteration.filter.enabled = parse_bool(k, v); }},
      {"strict_self_contained",
       [](RunConfig& c, auto k, auto v, auto&) { c.iteration.filter.strict_self_contained = parse_bool(k, v); }},
      {"penalty", [](RunConfig& c, auto k, auto v, auto&) { c.iteration.filter.penalty_value = parse_double(k, v); }},
      {"model_order", [](RunConfig& c, auto k, auto v, auto&) { c.model_order = parse_small_int(k, v); }},
      {"step_size", [](RunConfig& c, auto k, auto v, auto&) { c.trainer.step_size = parse_double(k, v); }},
      {"batch_size",
       [](RunConfig& c, auto k, auto v, auto&) {
         const long long n = parse_int(k, v);
         if (n < 1) bad_value(k, v, "a positive integer");
         c.trainer.batch_size = static_cast<std::size_t>(n);
       }},
      {"epoch_cap", [](RunConfig& c, auto k, auto v, auto&) { c.trainer.epoch_cap = parse_small_int(k, v); }},
      {"convergence_window", [](RunConfig& c, auto k, auto v, auto&) { c.trainer.window = parse_small_int(k, v); }},
      {"convergence_tolerance",
       [](RunConfig& c, auto k, auto v, auto&) { c.trainer.tolerance = parse_double(k, v); }},
      {"shuffle", [](RunConfig& c, auto k, auto v, auto&) { c.trainer.shuffle = parse_bool(k, v); }},
      {"corpus", [](RunConfig& c, auto, auto v, auto& base) { c.corpus = resolve(base, v); }},
      {"eval_corpus", [](RunConfig& c, auto, auto v, auto& base) { c.eval_corpus = resolve(base, v); }},
      {"output_dir", [](RunConfig& c, auto, auto v, auto& base) { c.output_dir = resolve(base, v); }},
      {"backend_url", [](RunConfig& c, auto, auto v, auto&) { c.remote.url = std::string(v); }},
      {"backend_timeout_ms", [](RunConfig& c, auto k, auto v, auto&) { c.remote.timeout_ms = parse_small_int(k, v); }},
      {"backend_retries", [](RunConfig& c, auto k, auto v, auto&) { c.remote.retries = parse_small_int(k, v); }},
      {"backend_backoff_ms", [](RunConfig& c, auto k, auto v, auto&) { c.remote.backoff_ms = parse_small_int(k, v); }},
      {"backend_max_backoff_ms",
       [](RunConfig& c, auto k, auto v, auto&) { c.remote.max_backoff_ms = parse_small_int(k, v); }},
      {"checkpoint_poll_ms",
       [](RunConfig& c, auto k, auto v, auto&) { c.remote.checkpoint_poll_ms = parse_small_int(k, v); }},
      {"checkpoint_timeout_s",
       [](RunConfig& c, auto k, auto v, auto&) { c.remote.checkpoint_timeout_s = parse_small_int(k, v); }},
      {"judge_cmd", [](RunConfig& c, auto, auto v, auto&) { c.judge_cmd = std::string(v); }},
      {"workers", [](RunConfig& c, auto k, auto v, auto&) { c.workers = parse_small_int(k, v); }},
      {"early_stop", [](RunConfig& c, auto k, auto v, auto&) { c.early_stop = parse_bool(k, v); }},
      {"early_stop_threshold",
       [](RunConfig& c, auto k, auto v, auto&) { c.early_stop_threshold = parse_double(k, v); }},
      {"accumulate_samples", [](RunConfig& c, auto k, auto v, auto&) { c.accumulate_samples = parse_bool(k, v); }},
  };
  return table;
}

}  // namespace

void IterationConfig::validate() const {
  if (K < 2) throw ConfigError("k must be >= 2");
  if (T < 1 || T > kMaxIterations) throw ConfigError("iterations must be in [1, " + std::to_string(kMaxIterations) + "]");
  if (eval_decoding.empty()) throw ConfigError("eval_temperatures must not be empty");
  try {
    ranking.validate();
    train_decoding.validate();
    for (const auto& d : eval_decoding) d.validate();
    filter.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

int RunConfig::effective_workers() const {
  if (workers > 0) return workers;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

toy::TrainerConfig RunConfig::trainer_config() const {
  toy::TrainerConfig t = trainer;
  t.ranking = iteration.ranking;
  t.seed = iteration.seed;
  return t;
}

void RunConfig::validate() const {
  iteration.validate();
  try {
    trainer_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (model_order < 1) throw ConfigError("model_order must be >= 1");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (eval_samples < 1) throw ConfigError("eval_samples must be positive");
  if (eval_k.empty()) throw ConfigError("eval_k must not be empty");
  for (int k : eval_k) {
    if (k < 1 || k > eval_samples) throw ConfigError("eval_k entries must be in [1, eval_samples]");
  }
  if (std::isnan(early_stop_threshold)) throw ConfigError("early_stop_threshold must be a number");
  if (remote_mode()) {
    if (remote.url.rfind("http://", 0) != 0 && remote.url.rfind("https://", 0) != 0) {
      throw ConfigError("backend_url must start with http:// or https://");
    }
    if (remote.timeout_ms < 1 || remote.retries < 0 || remote.backoff_ms < 0 || remote.max_backoff_ms < 0 ||
        remote.checkpoint_poll_ms < 1 || remote.checkpoint_timeout_s < 1) {
      throw ConfigError("backend timing options must be positive");
    }
  }
}

std::string expand_env(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find("${", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const std::size_t close = text.find('}', open + 2);
    if (close == std::string_view::npos) throw ConfigError("unterminated ${ in '" + std::string(text) + "'");
    std::string_view body = text.substr(open + 2, close - open - 2);
    std::optional<std::string_view> fallback;
    if (const auto sep = body.find(":-"); sep != std::string_view::npos) {
      fallback = body.substr(sep + 2);
      body = body.substr(0, sep);
    }
    if (body.empty()) throw ConfigError("empty variable name in '" + std::string(text) + "'");
    const char* value = std::getenv(std::string(body).c_str());
    if (value != nullptr && (*value != '\0' || !fallback)) {
      out += value;
    } else if (fallback) {
      out.append(*fallback);
    } else {
      throw ConfigError("environment variable '" + std::string(body) + "' is not set");
    }
    pos = close + 1;
  }
  return out;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value, const std::filesystem::path& base_dir) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second(cfg, key, value, base_dir);
}

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    try {
      apply_setting(cfg, key, expand_env(trim(line.substr(eq + 1))), base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace itertl::pipeline
