// SPDX-License-Identifier: Apache-2.0
#include "itertl/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace itertl::loss {
namespace {

void check_group(std::span<const ResponseLogProbs> group, std::span<const double> z, std::size_t reference_index) {
  if (group.size() != z.size()) {
    throw std::invalid_argument("loss: group has " + std::to_string(group.size()) + " responses but " +
                                std::to_string(z.size()) + " scores");
  }
  if (reference_index >= group.size()) {
    throw std::invalid_argument("loss: reference index " + std::to_string(reference_index) + " out of range");
  }
  for (const ResponseLogProbs& r : group) r.validate();
}

std::vector<double> normalized(std::span<const ResponseLogProbs> group) {
  std::vector<double> p;
  p.reserve(group.size());
  for (const ResponseLogProbs& r : group) p.push_back(normalized_logprob(r));
  return p;
}

}  // namespace

void ResponseLogProbs::validate() const {
  if (token_logprobs.empty()) throw std::invalid_argument("ResponseLogProbs: empty generation");
  for (double lp : token_logprobs) {
    if (std::isnan(lp) || lp > 0.0) {
      throw std::invalid_argument("ResponseLogProbs: log-probability must be <= 0, got " + std::to_string(lp));
    }
  }
}

void RankingConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(lambda >= 0.0)) {
    throw std::invalid_argument("RankingConfig: alpha, beta and lambda must be non-negative");
  }
}

std::size_t RankingResult::active_pairs() const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const RankingPair& p) { return p.active(); }));
}

double normalized_logprob(const ResponseLogProbs& r) {
  r.validate();
  double sum = 0.0;
  for (double lp : r.token_logprobs) sum += lp;
  return sum / static_cast<double>(r.length());
}

RankingResult ranking_loss(std::span<const double> p, std::span<const double> z, const RankingConfig& cfg) {
  cfg.validate();
  if (p.size() != z.size()) throw std::invalid_argument("ranking_loss: |p| != |z|");
  if (p.size() < 2) throw std::invalid_argument("ranking_loss: need at least two responses");
  RankingResult result;
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t tau = 0; tau < p.size(); ++tau) {
      if (!(z[k] < z[tau] - cfg.beta)) continue;
      const double hinge = std::max(p[k] - p[tau] + cfg.alpha, 0.0);
      result.pairs.push_back({k, tau, hinge});
      result.value += hinge;
    }
  }
  return result;
}

double ce_loss(const ResponseLogProbs& reference) {
  reference.validate();
  double sum = 0.0;
  for (double lp : reference.token_logprobs) sum += lp;
  return -sum;
}

LossBreakdown total_loss(std::span<const ResponseLogProbs> group, std::span<const double> z,
                         std::size_t reference_index, const RankingConfig& cfg) {
  check_group(group, z, reference_index);
  const RankingResult ranking = ranking_loss(normalized(group), z, cfg);
  LossBreakdown out;
  out.l_ce = ce_loss(group[reference_index]);
  out.l_ranking = ranking.value;
  out.active_pairs = ranking.active_pairs();
  out.total = out.l_ce + cfg.lambda * out.l_ranking;
  return out;
}

std::vector<std::vector<double>> loss_gradients(std::span<const ResponseLogProbs> group,
                                                std::span<const double> z, std::size_t reference_index,
                                                const RankingConfig& cfg) {
  check_group(group, z, reference_index);
  std::vector<std::vector<double>> grads;
  grads.reserve(group.size());
  for (const ResponseLogProbs& r : group) grads.emplace_back(r.length(), 0.0);

  for (double& g : grads[reference_index]) g -= 1.0;

  const RankingResult ranking = ranking_loss(normalized(group), z, cfg);
  for (const RankingPair& pair : ranking.pairs) {
    if (!pair.active()) continue;
    const double up = cfg.lambda / static_cast<double>(group[pair.lower].length());
    const double down = cfg.lambda / static_cast<double>(group[pair.higher].length());
    for (double& g : grads[pair.lower]) g += up;
    for (double& g : grads[pair.higher]) g -= down;
  }
  return grads;
}

}  // namespace itertl::loss
