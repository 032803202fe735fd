// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "itertl/toy/model.hpp"

// Checkpoint layout: a JSON header
//   {"format": "itertl-toy-checkpoint", "version": 1, "vocab": [...],
//    "order": n, "seed": s, "iteration": t, "contexts": [[ids...], ...],
//    "rows": R, "logits_file": "<name>", "logits_sha256": "<hex>"}
// next to a raw array of R * |vocab| little-endian IEEE-754 doubles, row i
// belonging to contexts[i]. The logits file path is relative to the header.

namespace itertl::toy {

struct CheckpointInfo {
  std::filesystem::path header;
  std::filesystem::path logits;
  std::string digest;  // SHA-256 over header bytes, which embed the logits digest
  int iteration = 0;
};

// Writes `<stem>.json` and `<stem>.logits.f64` in `dir`, each atomically;
// the logits file lands first so a visible header is always complete.
CheckpointInfo save_checkpoint(const ToyModel& model, int iteration, const std::filesystem::path& dir,
                               const std::string& stem);

struct LoadedCheckpoint {
  ToyModel model;
  int iteration;
  std::string digest;
};

// Digest save_checkpoint would report for this state, without writing.
std::string checkpoint_digest(const ToyModel& model, int iteration, const std::string& stem);

// Validates format, version, sizes and the logits digest.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& header);

}  // namespace itertl::toy
