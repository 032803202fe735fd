// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "itertl/io.hpp"
#include "itertl/toy/trainer.hpp"

namespace itertl::pipeline {

// s[0] = x[0], s[i] = factor * s[i-1] + (1 - factor) * x[i].
std::vector<double> exponential_smoothing(std::span<const double> xs, double factor = 0.9);

// Per-iteration trace: one row per optimiser step.
std::string trace_csv(const toy::TrainingTrace& trace);

// Writes the long-format curve CSV (iteration, epoch, step, l_ce, l_ranking,
// total, total_smoothed) for every iteration of the manifest; smoothing
// restarts at each iteration. Trace paths resolve against `run_dir`.
// Throws std::runtime_error naming the iteration when a trace is missing.
std::filesystem::path export_curves(const io::Json& manifest, const std::filesystem::path& run_dir,
                                    const std::filesystem::path& out);

// Shortest round-trip decimal form.
std::string format_double(double x);

}  // namespace itertl::pipeline
