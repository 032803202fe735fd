// SPDX-License-Identifier: Apache-2.0
#include "itertl/pipeline/backend.hpp"

#include <chrono>
#include <thread>

#include "httplib.h"
#include "itertl/io.hpp"

namespace itertl::pipeline {

// --- toy --------------------------------------------------------------------

ToyBackend::ToyBackend(std::shared_ptr<const toy::ToyModel> model, std::string digest, std::uint64_t seed)
    : model_(std::move(model)), digest_(std::move(digest)), seed_(seed) {
  if (!model_) throw std::invalid_argument("ToyBackend: null model");
}

std::vector<Sample> ToyBackend::generate(const InstructionRecord& record, const toy::DecodingParams& params, int n,
                                         std::uint64_t stream) {
  const std::vector<toy::TokenId> prompt = model_->vocab().encode_prompt(record.instruction);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    toy::Rng rng = toy::Rng::derive(seed_, stream, static_cast<std::uint64_t>(i));
    toy::SampleResult s = toy::sample(*model_, prompt, params, rng);
    Sample sample;
    sample.code = model_->vocab().decode(s.tokens);
    sample.token_logprobs = toy::score_sequence(*model_, prompt, s.tokens).token_logprobs;
    sample.tokens = std::move(s.tokens);
    out.push_back(std::move(sample));
  }
  return out;
}

std::optional<std::vector<double>> ToyBackend::score(const InstructionRecord& record, std::string_view code) {
  std::vector<toy::TokenId> tokens = model_->vocab().encode_code(code);
  tokens.push_back(model_->vocab().eos());
  return toy::score_sequence(*model_, model_->vocab().encode_prompt(record.instruction), tokens).token_logprobs;
}

// --- remote -----------------------------------------------------------------

namespace {

std::vector<double> logprob_list(const io::Json& j, const char* where) {
  if (!j.is_array()) throw BackendError(std::string(where) + ": token_logprobs must be an array");
  std::vector<double> out;
  for (const auto& x : j) {
    if (!x.is_number()) throw BackendError(std::string(where) + ": token_logprobs must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

io::Json parse_body(const std::string& body, const char* where) {
  try {
    return io::Json::parse(body);
  } catch (const io::Json::parse_error&) {
    throw BackendError(std::string(where) + ": malformed JSON response");
  }
}

}  // namespace

RemoteBackend::RemoteBackend(RemoteOptions options) : options_(std::move(options)) {
  const std::string& url = options_.url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("RemoteBackend: malformed URL '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  base_path_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

std::string RemoteBackend::request(const std::string& method, const std::string& path, const std::string& body) {
  std::string last_error;
  int delay_ms = options_.backoff_ms;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms = std::min(options_.max_backoff_ms, std::max(1, delay_ms * 2));
    }
    httplib::Client client(scheme_host_port_);
    const auto timeout = std::chrono::milliseconds(options_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    const std::string full = base_path_ + path;
    httplib::Result res = method == "GET" ? client.Get(full) : client.Post(full, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw BackendError(method + " " + full + ": HTTP " + std::to_string(res->status));
    }
    return res->body;
  }
  throw BackendError(method + " " + options_.url + path + ": giving up after " + std::to_string(options_.retries + 1) +
                     " attempts (" + last_error + ")");
}

std::vector<Sample> RemoteBackend::generate(const InstructionRecord& record, const toy::DecodingParams& params, int n,
                                            std::uint64_t stream) {
  const io::Json req{{"instruction", record.instruction}, {"temperature", params.temperature},
                     {"top_p", params.top_p},             {"max_tokens", params.max_tokens},
                     {"n", n},                            {"seed", stream}};
  const io::Json res = parse_body(request("POST", "/generate", req.dump()), "/generate");
  if (!res.is_object() || !res.contains("samples") || !res["samples"].is_array()) {
    throw BackendError("/generate: response lacks a samples array");
  }
  if (res["samples"].size() != static_cast<std::size_t>(n)) {
    throw BackendError("/generate: asked for " + std::to_string(n) + " samples, got " +
                       std::to_string(res["samples"].size()));
  }
  std::vector<Sample> out;
  for (const auto& s : res["samples"]) {
    if (!s.is_object() || !s.contains("code") || !s["code"].is_string()) throw BackendError("/generate: sample without code");
    Sample sample;
    sample.code = s["code"].get<std::string>();
    if (s.contains("token_logprobs") && !s["token_logprobs"].is_null()) {
      sample.token_logprobs = logprob_list(s["token_logprobs"], "/generate");
    }
    out.push_back(std::move(sample));
  }
  return out;
}

std::optional<std::vector<double>> RemoteBackend::score(const InstructionRecord& record, std::string_view code) {
  const io::Json req{{"instruction", record.instruction}, {"code", code}};
  const io::Json res = parse_body(request("POST", "/score", req.dump()), "/score");
  if (!res.is_object() || !res.contains("token_logprobs") || res["token_logprobs"].is_null()) return std::nullopt;
  return logprob_list(res["token_logprobs"], "/score");
}

std::string RemoteBackend::checkpoint_digest() {
  const io::Json res = parse_body(request("GET", "/checkpoint", ""), "/checkpoint");
  if (!res.is_object() || !res.contains("digest") || !res["digest"].is_string()) {
    throw BackendError("/checkpoint: response lacks a digest string");
  }
  return res["digest"].get<std::string>();
}

std::string RemoteBackend::wait_for_new_checkpoint(const std::string& previous) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(options_.checkpoint_timeout_s);
  while (true) {
    std::string digest = checkpoint_digest();
    if (digest != previous) return digest;
    if (std::chrono::steady_clock::now() >= deadline) {
      throw BackendError("no new checkpoint registered within " + std::to_string(options_.checkpoint_timeout_s) + " s");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(options_.checkpoint_poll_ms));
  }
}

}  // namespace itertl::pipeline
