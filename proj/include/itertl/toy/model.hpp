// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "itertl/loss.hpp"
#include "itertl/records.hpp"

namespace itertl::toy {

using TokenId = int;

class Vocab {
 public:
  static constexpr std::string_view kBos = "<bos>";
  static constexpr std::string_view kEos = "<eos>";

  // Tokens must be distinct, contain both markers exactly once, and number
  // at least three.
  explicit Vocab(std::vector<std::string> tokens);

  // Markers first, then the sorted union of the lexer units of every
  // reference and instruction.
  static Vocab from_corpus(std::span<const InstructionRecord> corpus);

  std::size_t size() const { return tokens_.size(); }
  TokenId bos() const { return bos_; }
  TokenId eos() const { return eos_; }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Lexer units of Verilog text; throws std::invalid_argument on a unit that
  // is not in the vocabulary.
  std::vector<TokenId> encode_code(std::string_view code) const;
  // Lexer units of an instruction; unknown units are skipped.
  std::vector<TokenId> encode_prompt(std::string_view instruction) const;
  // Joins units back into source text; markers are dropped.
  std::string decode(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> index_;
  TokenId bos_ = -1;
  TokenId eos_ = -1;
};

using Context = std::vector<TokenId>;

// Context-table autoregressive model: the next-token logits are a learnable
// row looked up by the last `order` tokens of (prompt, <bos>, generated...).
// Rows are created lazily; an absent row reads as zeros.
class ToyModel {
 public:
  ToyModel(Vocab vocab, int order = 2, std::uint64_t seed = 0);

  const Vocab& vocab() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  int order() const { return order_; }
  std::uint64_t seed() const { return seed_; }

  // Last `order` tokens of history, left-padded with <bos>.
  Context context_of(std::span<const TokenId> history) const;

  std::optional<std::size_t> row_index(std::span<const TokenId> context) const;
  // Zero-filled span (shared) when the row does not exist yet.
  std::span<const double> row(std::span<const TokenId> context) const;
  // Creates the row if needed. Invalidates spans from earlier calls.
  std::size_t ensure_row(std::span<const TokenId> context);
  std::span<double> row_at(std::size_t index);
  std::span<const double> row_at(std::size_t index) const;

  std::size_t row_count() const { return contexts_.size(); }
  const std::vector<Context>& contexts() const { return contexts_; }
  std::span<const double> logits() const { return logits_; }
  std::span<double> mutable_logits() { return logits_; }

  // Rebuilds a model from serialized parts; rows follow `contexts` order.
  static ToyModel from_parts(Vocab vocab, int order, std::uint64_t seed, std::vector<Context> contexts,
                             std::vector<double> logits);

 private:
  Vocab vocab_;
  int order_;
  std::uint64_t seed_;
  std::map<Context, std::size_t> index_;
  std::vector<Context> contexts_;
  std::vector<double> logits_;
  std::vector<double> zero_row_;
};

struct DecodingParams {
  double temperature = 0.5;  // 0 selects greedy decoding
  double top_p = 0.95;
  int max_tokens = 128;

  bool greedy() const { return temperature == 0.0; }
  void validate() const;
};

// Deterministic 64-bit generator (SplitMix64) with a portable uniform draw,
// so seeded runs reproduce bit-for-bit on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();  // [0, 1)

  // Independent stream for (seed, a, b, c).
  static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

 private:
  std::uint64_t state_;
};

struct WeightedToken {
  TokenId id;
  double probability;
};

// Probabilities sorted by descending probability (ties by lower id), cut at
// the shortest prefix whose mass reaches top_p, renormalised.
std::vector<WeightedToken> nucleus(std::span<const double> probabilities, double top_p);

std::vector<double> next_distribution(const ToyModel& model, std::span<const TokenId> context,
                                      double temperature = 1.0);

struct SampleResult {
  std::vector<TokenId> tokens;  // includes the final <eos> if one was produced
  std::vector<double> logprobs;  // under the truncated distribution actually sampled from
  bool hit_eos = false;
};

SampleResult sample(const ToyModel& model, std::span<const TokenId> prompt, const DecodingParams& params,
                    Rng& rng);

// Log-probabilities under the full model distribution at temperature 1.
// Throws std::invalid_argument on an empty sequence or an id outside the
// vocabulary.
loss::ResponseLogProbs score_sequence(const ToyModel& model, std::span<const TokenId> prompt,
                                      std::span<const TokenId> tokens);

}  // namespace itertl::toy
