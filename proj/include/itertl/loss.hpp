// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace itertl::loss {

// Natural-log probabilities of each generated token given the instruction and
// the token prefix. Non-empty; every entry <= 0.
struct ResponseLogProbs {
  std::vector<double> token_logprobs;

  std::size_t length() const { return token_logprobs.size(); }
  // Throws std::invalid_argument on an empty list or a positive / NaN entry.
  void validate() const;
};

struct RankingConfig {
  double alpha = 0.3;   // margin
  double beta = 0.2;    // minimum score gap for a pair to count
  double lambda = 1.0;  // weight of the ranking term

  void validate() const;
};

// Ordered pair (lower, higher) with z[lower] < z[higher] - beta; hinge is
// max(p[lower] - p[higher] + alpha, 0).
struct RankingPair {
  std::size_t lower = 0;
  std::size_t higher = 0;
  double hinge = 0.0;

  bool active() const { return hinge > 0.0; }
};

struct RankingResult {
  double value = 0.0;
  std::vector<RankingPair> pairs;  // every eligible pair, active or not

  std::size_t active_pairs() const;
};

struct LossBreakdown {
  double l_ce = 0.0;
  double l_ranking = 0.0;
  std::size_t active_pairs = 0;
  double total = 0.0;
};

// Mean token log-probability (length-normalised sequence log-probability).
double normalized_logprob(const ResponseLogProbs& r);

// Pairwise margin ranking loss over raw normalised log-probabilities; no
// softmax or other renormalisation is applied to p.
RankingResult ranking_loss(std::span<const double> p, std::span<const double> z, const RankingConfig& cfg);

// Negated sum of the reference token log-probabilities (not length-normalised).
double ce_loss(const ResponseLogProbs& reference);

LossBreakdown total_loss(std::span<const ResponseLogProbs> group, std::span<const double> z,
                         std::size_t reference_index, const RankingConfig& cfg);

// d total / d token_logprob for every token of every response, shaped like
// the group. The hinge subgradient at the kink is 0.
std::vector<std::vector<double>> loss_gradients(std::span<const ResponseLogProbs> group,
                                                std::span<const double> z, std::size_t reference_index,
                                                const RankingConfig& cfg);

}  // namespace itertl::loss
