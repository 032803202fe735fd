// SPDX-License-Identifier: Apache-2.0
#include "itertl/toy/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace itertl::toy {
namespace {

void check_group_shape(const TrainingGroup& g, std::size_t vocab_size) {
  if (g.responses.size() != g.scores.size()) throw std::invalid_argument("TrainingGroup: responses/scores size mismatch");
  if (g.responses.size() < 2) throw std::invalid_argument("TrainingGroup: need at least two responses");
  if (g.reference_index >= g.responses.size()) throw std::invalid_argument("TrainingGroup: reference index out of range");
  for (const auto& r : g.responses) {
    if (r.empty()) throw std::invalid_argument("TrainingGroup: empty response");
    for (TokenId t : r) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) throw std::invalid_argument("TrainingGroup: token outside the vocabulary");
    }
  }
}

std::vector<loss::ResponseLogProbs> score_group(const ToyModel& model, const TrainingGroup& g) {
  std::vector<loss::ResponseLogProbs> out;
  out.reserve(g.responses.size());
  for (const auto& r : g.responses) out.push_back(score_sequence(model, g.prompt, r));
  return out;
}

loss::LossBreakdown mean_of(std::span<const loss::LossBreakdown> xs) {
  loss::LossBreakdown m;
  for (const auto& x : xs) {
    m.l_ce += x.l_ce;
    m.l_ranking += x.l_ranking;
    m.active_pairs += x.active_pairs;
    m.total += x.total;
  }
  const double n = static_cast<double>(xs.size());
  m.l_ce /= n;
  m.l_ranking /= n;
  m.total /= n;
  return m;
}

}  // namespace

void TrainerConfig::validate() const {
  ranking.validate();
  if (!(step_size > 0.0)) throw std::invalid_argument("TrainerConfig: step_size must be positive");
  if (batch_size < 1) throw std::invalid_argument("TrainerConfig: batch_size must be positive");
  if (epoch_cap < 1) throw std::invalid_argument("TrainerConfig: epoch_cap must be positive");
  if (window < 1) throw std::invalid_argument("TrainerConfig: window must be positive");
}

double TrainingTrace::converged_loss() const {
  if (epochs.empty()) throw std::logic_error("TrainingTrace: no epochs recorded");
  return epochs.back().total;
}

loss::LossBreakdown evaluate_group(const ToyModel& model, const TrainingGroup& group, const loss::RankingConfig& ranking) {
  check_group_shape(group, model.vocab_size());
  const auto logprobs = score_group(model, group);
  return loss::total_loss(logprobs, group.scores, group.reference_index, ranking);
}

std::vector<double> batch_gradient(ToyModel& model, std::span<const TrainingGroup> batch,
                                   const loss::RankingConfig& ranking, std::vector<loss::LossBreakdown>* losses) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  for (const TrainingGroup& g : batch) {
    check_group_shape(g, model.vocab_size());
    // Materialise every row the batch reads so gradient indices are stable.
    for (const auto& r : g.responses) {
      std::vector<TokenId> history(g.prompt.begin(), g.prompt.end());
      history.push_back(model.vocab().bos());
      for (TokenId t : r) {
        model.ensure_row(model.context_of(history));
        history.push_back(t);
      }
    }
  }

  const std::size_t V = model.vocab_size();
  std::vector<double> grad(model.logits().size(), 0.0);
  std::vector<double> probs(V);
  const double batch_weight = 1.0 / static_cast<double>(batch.size());
  if (losses != nullptr) losses->clear();

  for (const TrainingGroup& g : batch) {
    const auto logprobs = score_group(model, g);
    if (losses != nullptr) losses->push_back(loss::total_loss(logprobs, g.scores, g.reference_index, ranking));
    const auto dlogp = loss::loss_gradients(logprobs, g.scores, g.reference_index, ranking);

    // d log softmax(x)[t] / dx = onehot(t) - softmax(x)
    for (std::size_t k = 0; k < g.responses.size(); ++k) {
      std::vector<TokenId> history(g.prompt.begin(), g.prompt.end());
      history.push_back(model.vocab().bos());
      for (std::size_t j = 0; j < g.responses[k].size(); ++j) {
        const TokenId t = g.responses[k][j];
        const double w = dlogp[k][j] * batch_weight;
        if (w != 0.0) {
          const std::size_t row = *model.row_index(model.context_of(history));
          const std::span<const double> logits = model.row_at(row);
          kernels::softmax(logits, 1.0, probs);
          const std::span<double> grow = std::span<double>(grad).subspan(row * V, V);
          kernels::axpy(-w, probs, grow);
          grow[static_cast<std::size_t>(t)] += w;
        }
        history.push_back(t);
      }
    }
  }
  return grad;
}

Trainer::Trainer(ToyModel& model, TrainerConfig config) : model_(model), config_(config) { config_.validate(); }

std::vector<loss::LossBreakdown> Trainer::train_step(std::span<const TrainingGroup> batch) {
  std::vector<loss::LossBreakdown> losses;
  const std::vector<double> grad = batch_gradient(model_, batch, config_.ranking, &losses);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      const std::size_t V = model_.vocab_size();
      std::ostringstream msg;
      msg << "train_step: non-finite gradient " << grad[i] << " at row " << i / V << " token '"
          << model_.vocab().token(static_cast<TokenId>(i % V)) << "' (step " << steps_ << ")";
      throw std::runtime_error(msg.str());
    }
  }
  m_.resize(grad.size(), 0.0);
  v_.resize(grad.size(), 0.0);
  ++steps_;
  kernels::AdamCoefficients c;
  c.step_size = config_.step_size;
  c.beta1 = config_.beta1;
  c.beta2 = config_.beta2;
  c.epsilon = config_.epsilon;
  c.bias_correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  c.bias_correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  kernels::adam_update(model_.mutable_logits(), grad, m_, v_, c);
  return losses;
}

TrainingTrace Trainer::train_to_convergence(std::span<const TrainingGroup> dataset) {
  if (dataset.empty()) throw std::invalid_argument("train_to_convergence: empty dataset");
  TrainingTrace trace;
  std::vector<std::size_t> order(dataset.size());
  int step = 0;
  for (int epoch = 0; epoch < config_.epoch_cap; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config_.shuffle) {
      Rng rng = Rng::derive(config_.seed, 0x5348u, static_cast<std::uint64_t>(epoch));
      for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next() % i);
        std::swap(order[i - 1], order[j]);
      }
    }
    std::vector<loss::LossBreakdown> epoch_losses;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      std::vector<TrainingGroup> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config_.batch_size); ++i) {
        batch.push_back(dataset[order[i]]);
      }
      const auto losses = train_step(batch);
      trace.steps.push_back({epoch, step++, mean_of(losses)});
      epoch_losses.insert(epoch_losses.end(), losses.begin(), losses.end());
    }
    const loss::LossBreakdown m = mean_of(epoch_losses);
    trace.epochs.push_back({epoch, m.l_ce, m.l_ranking, m.total});

    const std::size_t w = static_cast<std::size_t>(config_.window);
    if (trace.epochs.size() > w) {
      const double before = trace.epochs[trace.epochs.size() - 1 - w].total;
      const double now = trace.epochs.back().total;
      const double scale = std::max(std::abs(before), 1e-300);
      if ((before - now) / scale < config_.tolerance) {
        trace.converged = true;
        break;
      }
    }
  }
  return trace;
}

}  // namespace itertl::toy
