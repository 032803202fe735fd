// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "itertl/kernels.hpp"
#include "itertl/loss.hpp"
#include "itertl/toy/model.hpp"

namespace itertl::toy {

// One ranked group: K responses (sampled ones plus the reference) for a
// single prompt, with their quality scores.
struct TrainingGroup {
  std::vector<TokenId> prompt;
  std::vector<std::vector<TokenId>> responses;
  std::vector<double> scores;
  std::size_t reference_index = 0;
};

struct TrainerConfig {
  loss::RankingConfig ranking;
  double step_size = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 4;
  int epoch_cap = 50;
  // Stop when the mean epoch loss improved by less than `tolerance`
  // (relative) over the last `window` epochs.
  int window = 3;
  double tolerance = 1e-3;
  bool shuffle = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepRecord {
  int epoch = 0;
  int step = 0;  // global step within this training run
  loss::LossBreakdown mean;  // batch mean, evaluated before the update
};

struct EpochRecord {
  int epoch = 0;
  double l_ce = 0.0;
  double l_ranking = 0.0;
  double total = 0.0;
};

struct TrainingTrace {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  bool converged = false;  // false when the epoch cap stopped training

  double converged_loss() const;
};

// Loss of one group under the current model (no update).
loss::LossBreakdown evaluate_group(const ToyModel& model, const TrainingGroup& group,
                                   const loss::RankingConfig& ranking);

// Gradient of the batch-mean total loss with respect to every logit of the
// model, laid out like ToyModel::logits(). Rows touched by the batch are
// created in the model first.
std::vector<double> batch_gradient(ToyModel& model, std::span<const TrainingGroup> batch,
                                   const loss::RankingConfig& ranking,
                                   std::vector<loss::LossBreakdown>* losses = nullptr);

// Single-writer optimiser over a model. Moment accumulators start at zero.
class Trainer {
 public:
  Trainer(ToyModel& model, TrainerConfig config);

  // One adaptive-moment update on the batch; returns the per-group losses
  // evaluated before the update. Throws std::runtime_error (and leaves the
  // model untouched) on a non-finite gradient.
  std::vector<loss::LossBreakdown> train_step(std::span<const TrainingGroup> batch);

  // Epochs over the dataset until the stop rule fires or epoch_cap is hit.
  TrainingTrace train_to_convergence(std::span<const TrainingGroup> dataset);

  const TrainerConfig& config() const { return config_; }
  std::int64_t steps_taken() const { return steps_; }

 private:
  ToyModel& model_;
  TrainerConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t steps_ = 0;
};

}  // namespace itertl::toy
