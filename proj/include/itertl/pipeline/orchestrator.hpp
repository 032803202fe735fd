// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "itertl/io.hpp"
#include "itertl/pipeline/backend.hpp"
#include "itertl/pipeline/config.hpp"
#include "itertl/scoring.hpp"
#include "itertl/toy/trainer.hpp"

namespace itertl::pipeline {

enum class Origin { sampled, reference };

std::string_view origin_name(Origin origin);

struct ScoredResponse {
  std::string record_id;
  Origin origin = Origin::sampled;
  std::string code;
  scoring::QualityScore score;
  std::optional<std::vector<double>> token_logprobs;
  int iteration = 0;
  std::string model_digest;  // checkpoint that generated (sampled) or scored the row

  io::Json to_json() const;
  static ScoredResponse from_json(const io::Json& row);
};

struct IterationState {
  int t = 0;
  std::string checkpoint_digest;           // model the iteration samples from
  std::filesystem::path model_checkpoint;  // header of that model; empty for the initial toy model
  std::filesystem::path dataset_path;
  std::filesystem::path loss_trace_path;
  std::optional<double> converged_loss;
  std::string started;
  std::string finished;
};

// Called at the start of each stage: "sample", "score", "persist", "train",
// "checkpoint", "manifest". Used for progress logging and fault injection.
using StageObserver = std::function<void(int t, std::string_view stage)>;

struct RunResult {
  std::filesystem::path manifest_path;
  io::Json manifest;
  std::vector<IterationState> states;  // t = 0..T (the last one has not run)
  std::shared_ptr<const toy::ToyModel> final_model;  // toy mode only
  bool stopped_early = false;
};

// Runs the sample -> filter/score -> train cycle T times. In toy mode
// (remote == nullptr) the context-table model is trained in-process and a
// checkpoint is written per iteration; in remote mode scored datasets are
// exported and each iteration waits for the external trainer to register a
// new checkpoint. Throws ConfigError before any side effect on invalid input
// and BackendError when the backend gives up; the manifest on disk then
// still describes the last completed iteration.
RunResult run_loop(std::span<const InstructionRecord> corpus, const RunConfig& cfg,
                   RemoteBackend* remote = nullptr, const StageObserver& observer = {});

// Groups the K rows of each record (reference last) for training. Rows must
// satisfy the cardinality rule: exactly K rows, one reference, per record.
std::vector<toy::TrainingGroup> training_groups(std::span<const ScoredResponse> rows,
                                                std::span<const InstructionRecord> corpus,
                                                const toy::Vocab& vocab, int K);

std::vector<ScoredResponse> read_scored(const std::filesystem::path& path);

}  // namespace itertl::pipeline
