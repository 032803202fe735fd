// SPDX-License-Identifier: Apache-2.0
#include "itertl/toy/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "itertl/kernels.hpp"
#include "itertl/metrics.hpp"

namespace itertl::toy {

// --- Vocab ------------------------------------------------------------------

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 3) throw std::invalid_argument("Vocab: need at least three tokens");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw std::invalid_argument("Vocab: duplicate token '" + tokens_[i] + "'");
    }
  }
  const auto bos = index_.find(kBos);
  const auto eos = index_.find(kEos);
  if (bos == index_.end() || eos == index_.end()) throw std::invalid_argument("Vocab: missing <bos>/<eos> marker");
  bos_ = bos->second;
  eos_ = eos->second;
}

Vocab Vocab::from_corpus(std::span<const InstructionRecord> corpus) {
  std::set<std::string> units;
  for (const InstructionRecord& r : corpus) {
    for (std::string& u : metrics::verilog_token_units(r.reference)) units.insert(std::move(u));
    for (std::string& u : metrics::verilog_token_units(r.instruction)) units.insert(std::move(u));
  }
  units.erase(std::string(kBos));
  units.erase(std::string(kEos));
  std::vector<std::string> tokens{std::string(kBos), std::string(kEos)};
  tokens.insert(tokens.end(), units.begin(), units.end());
  return Vocab(std::move(tokens));
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("Vocab: token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> Vocab::encode_code(std::string_view code) const {
  std::vector<TokenId> ids;
  for (const std::string& unit : metrics::verilog_token_units(code)) {
    const auto id = find(unit);
    if (!id) throw std::invalid_argument("Vocab: unit '" + unit + "' is not in the vocabulary");
    ids.push_back(*id);
  }
  return ids;
}

std::vector<TokenId> Vocab::encode_prompt(std::string_view instruction) const {
  std::vector<TokenId> ids;
  for (const std::string& unit : metrics::verilog_token_units(instruction)) {
    if (const auto id = find(unit)) ids.push_back(*id);
  }
  return ids;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  bool line_start = true;
  for (TokenId id : ids) {
    if (id == bos_ || id == eos_) continue;
    const std::string& t = token(id);
    if (!line_start) out += ' ';
    out += t;
    line_start = t == ";" || t == "begin" || t == "end" || t == "endcase" || t == "endmodule";
    if (line_start) out += '\n';
  }
  return out;
}

// --- ToyModel ---------------------------------------------------------------

ToyModel::ToyModel(Vocab vocab, int order, std::uint64_t seed)
    : vocab_(std::move(vocab)), order_(order), seed_(seed), zero_row_(vocab_.size(), 0.0) {
  if (order_ < 1) throw std::invalid_argument("ToyModel: order must be >= 1");
}

Context ToyModel::context_of(std::span<const TokenId> history) const {
  Context ctx(static_cast<std::size_t>(order_), vocab_.bos());
  const std::size_t take = std::min(history.size(), ctx.size());
  std::copy(history.end() - static_cast<std::ptrdiff_t>(take), history.end(),
            ctx.end() - static_cast<std::ptrdiff_t>(take));
  return ctx;
}

std::optional<std::size_t> ToyModel::row_index(std::span<const TokenId> context) const {
  const auto it = index_.find(Context(context.begin(), context.end()));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> ToyModel::row(std::span<const TokenId> context) const {
  if (const auto idx = row_index(context)) return row_at(*idx);
  return zero_row_;
}

std::size_t ToyModel::ensure_row(std::span<const TokenId> context) {
  if (context.size() != static_cast<std::size_t>(order_)) throw std::invalid_argument("ToyModel: context size != order");
  Context key(context.begin(), context.end());
  const auto [it, inserted] = index_.emplace(key, contexts_.size());
  if (inserted) {
    contexts_.push_back(std::move(key));
    logits_.resize(logits_.size() + vocab_.size(), 0.0);
  }
  return it->second;
}

std::span<double> ToyModel::row_at(std::size_t index) {
  return std::span<double>(logits_).subspan(index * vocab_.size(), vocab_.size());
}

std::span<const double> ToyModel::row_at(std::size_t index) const {
  return std::span<const double>(logits_).subspan(index * vocab_.size(), vocab_.size());
}

ToyModel ToyModel::from_parts(Vocab vocab, int order, std::uint64_t seed, std::vector<Context> contexts,
                              std::vector<double> logits) {
  ToyModel model(std::move(vocab), order, seed);
  if (logits.size() != contexts.size() * model.vocab_size()) {
    throw std::invalid_argument("ToyModel: logits size does not match contexts x vocab");
  }
  for (const Context& c : contexts) {
    if (c.size() != static_cast<std::size_t>(order)) throw std::invalid_argument("ToyModel: context size != order");
    for (TokenId id : c) model.vocab_.token(id);
    model.ensure_row(c);
  }
  if (model.row_count() != contexts.size()) throw std::invalid_argument("ToyModel: duplicate context rows");
  model.logits_ = std::move(logits);
  for (double x : model.logits_) {
    if (!std::isfinite(x)) throw std::invalid_argument("ToyModel: non-finite logit");
  }
  return model;
}

// --- decoding ---------------------------------------------------------------

void DecodingParams::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw std::invalid_argument("DecodingParams: temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("DecodingParams: top_p must be in (0, 1]");
  if (max_tokens < 1) throw std::invalid_argument("DecodingParams: max_tokens must be positive");
}

namespace {
std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Rng::next() { return splitmix(state_); }

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

Rng Rng::derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t s = seed;
  for (std::uint64_t part : {a, b, c}) {
    s ^= part + 0x632BE59BD9B4E019ULL;
    s = splitmix(s);
  }
  return Rng(s);
}

std::vector<WeightedToken> nucleus(std::span<const double> probabilities, double top_p) {
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("nucleus: top_p must be in (0, 1]");
  std::vector<WeightedToken> sorted;
  sorted.reserve(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    sorted.push_back({static_cast<TokenId>(i), probabilities[i]});
  }
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const WeightedToken& a, const WeightedToken& b) { return a.probability > b.probability; });
  // Mass comparisons tolerate accumulated rounding of 1e-12.
  double mass = 0.0;
  std::size_t keep = 0;
  while (keep < sorted.size()) {
    mass += sorted[keep].probability;
    ++keep;
    if (mass >= top_p - 1e-12) break;
  }
  sorted.resize(keep);
  for (WeightedToken& w : sorted) w.probability /= mass;
  return sorted;
}

std::vector<double> next_distribution(const ToyModel& model, std::span<const TokenId> context, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("next_distribution: temperature must be positive");
  const std::span<const double> logits = model.row(model.context_of(context));
  std::vector<double> probs(logits.size());
  kernels::softmax(logits, 1.0 / temperature, probs);
  return probs;
}

SampleResult sample(const ToyModel& model, std::span<const TokenId> prompt, const DecodingParams& params, Rng& rng) {
  params.validate();
  std::vector<TokenId> history(prompt.begin(), prompt.end());
  history.push_back(model.vocab().bos());
  SampleResult out;
  std::vector<double> probs(model.vocab_size());
  for (int step = 0; step < params.max_tokens; ++step) {
    const std::span<const double> logits = model.row(model.context_of(history));
    TokenId next = 0;
    double logprob = 0.0;
    if (params.greedy()) {
      next = static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    } else {
      kernels::softmax(logits, 1.0 / params.temperature, probs);
      const std::vector<WeightedToken> support = nucleus(probs, params.top_p);
      const double u = rng.uniform();
      double cumulative = 0.0;
      const WeightedToken* chosen = &support.back();
      for (const WeightedToken& w : support) {
        cumulative += w.probability;
        if (u < cumulative) {
          chosen = &w;
          break;
        }
      }
      next = chosen->id;
      logprob = std::log(chosen->probability);
    }
    out.tokens.push_back(next);
    out.logprobs.push_back(logprob);
    history.push_back(next);
    if (next == model.vocab().eos()) {
      out.hit_eos = true;
      break;
    }
  }
  return out;
}

loss::ResponseLogProbs score_sequence(const ToyModel& model, std::span<const TokenId> prompt,
                                      std::span<const TokenId> tokens) {
  if (tokens.empty()) throw std::invalid_argument("score_sequence: empty sequence");
  std::vector<TokenId> history(prompt.begin(), prompt.end());
  history.push_back(model.vocab().bos());
  std::vector<double> scratch(model.vocab_size());
  loss::ResponseLogProbs out;
  out.token_logprobs.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= model.vocab_size()) {
      throw std::invalid_argument("score_sequence: token id " + std::to_string(t) + " outside the vocabulary");
    }
    const std::span<const double> logits = model.row(model.context_of(history));
    out.token_logprobs.push_back(kernels::log_softmax_at(logits, static_cast<std::size_t>(t), scratch));
    history.push_back(t);
  }
  return out;
}

}  // namespace itertl::toy
