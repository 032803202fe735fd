// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "itertl/pipeline/config.hpp"
#include "itertl/records.hpp"
#include "itertl/toy/model.hpp"

namespace itertl::pipeline {

// Generation backend unreachable or misbehaving after all retries.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sample {
  std::string code;
  std::vector<toy::TokenId> tokens;  // toy backend only; includes <eos> when produced
  std::optional<std::vector<double>> token_logprobs;  // full-distribution log-probs
};

// Source of candidate responses for one model state. Implementations must be
// safe to call concurrently from several workers.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  // n samples for the instruction. `stream` selects an independent seeded
  // random stream so results do not depend on call order.
  virtual std::vector<Sample> generate(const InstructionRecord& record, const toy::DecodingParams& params, int n,
                                       std::uint64_t stream) = 0;
  // Full-distribution log-probs of `code` as a response; nullopt if unsupported.
  virtual std::optional<std::vector<double>> score(const InstructionRecord& record, std::string_view code) = 0;
  virtual std::string checkpoint_digest() = 0;
};

// In-process context-table model, frozen for the lifetime of the backend.
class ToyBackend final : public GenerationBackend {
 public:
  ToyBackend(std::shared_ptr<const toy::ToyModel> model, std::string digest, std::uint64_t seed);

  std::vector<Sample> generate(const InstructionRecord& record, const toy::DecodingParams& params, int n,
                               std::uint64_t stream) override;
  std::optional<std::vector<double>> score(const InstructionRecord& record, std::string_view code) override;
  std::string checkpoint_digest() override { return digest_; }

  const toy::ToyModel& model() const { return *model_; }

 private:
  std::shared_ptr<const toy::ToyModel> model_;
  std::string digest_;
  std::uint64_t seed_;
};

// HTTP/JSON client:
//   POST /generate {instruction, temperature, top_p, max_tokens, n, seed}
//        -> {samples: [{code, token_logprobs?}]}
//   POST /score {instruction, code} -> {token_logprobs}
//   GET  /checkpoint -> {digest}
// Transport failures and 5xx answers are retried with exponential backoff
// (backoff_ms doubling up to max_backoff_ms); 4xx answers and malformed
// bodies fail at once. Exhausted retries raise BackendError.
class RemoteBackend final : public GenerationBackend {
 public:
  explicit RemoteBackend(RemoteOptions options);

  std::vector<Sample> generate(const InstructionRecord& record, const toy::DecodingParams& params, int n,
                               std::uint64_t stream) override;
  std::optional<std::vector<double>> score(const InstructionRecord& record, std::string_view code) override;
  std::string checkpoint_digest() override;

  // Polls /checkpoint until the digest differs from `previous`.
  std::string wait_for_new_checkpoint(const std::string& previous);

  const RemoteOptions& options() const { return options_; }

 private:
  std::string request(const std::string& method, const std::string& path, const std::string& body);

  RemoteOptions options_;
  std::string scheme_host_port_;
  std::string base_path_;
};

}  // namespace itertl::pipeline
