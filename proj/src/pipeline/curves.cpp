// SPDX-License-Identifier: Apache-2.0
#include "itertl/pipeline/curves.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace itertl::pipeline {

std::string format_double(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

std::vector<double> exponential_smoothing(std::span<const double> xs, double factor) {
  if (!(factor >= 0.0 && factor < 1.0)) throw std::invalid_argument("exponential_smoothing: factor must be in [0, 1)");
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(out.empty() ? x : factor * out.back() + (1.0 - factor) * x);
  return out;
}

std::string trace_csv(const toy::TrainingTrace& trace) {
  std::string out = "epoch,step,l_ce,l_ranking,total,active_pairs\n";
  for (const toy::StepRecord& s : trace.steps) {
    out += std::to_string(s.epoch) + ',' + std::to_string(s.step) + ',' + format_double(s.mean.l_ce) + ',' +
           format_double(s.mean.l_ranking) + ',' + format_double(s.mean.total) + ',' +
           std::to_string(s.mean.active_pairs) + '\n';
  }
  return out;
}

namespace {

struct TraceRow {
  std::string epoch, step, l_ce, l_ranking;
  double total;
};

std::vector<TraceRow> read_trace(const std::filesystem::path& path, int t) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::runtime_error&) {
    throw std::runtime_error("iteration " + std::to_string(t) + ": trace file " + path.string() + " is missing");
  }
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line.rfind("epoch,step,l_ce,l_ranking,total", 0) != 0) {
    throw std::runtime_error("iteration " + std::to_string(t) + ": unexpected trace header in " + path.string());
  }
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() < 5) throw std::runtime_error("iteration " + std::to_string(t) + ": short trace row in " + path.string());
    rows.push_back({cells[0], cells[1], cells[2], cells[3], std::stod(cells[4])});
  }
  return rows;
}

}  // namespace

std::filesystem::path export_curves(const io::Json& manifest, const std::filesystem::path& run_dir,
                                    const std::filesystem::path& out) {
  if (!manifest.contains("iterations") || !manifest["iterations"].is_array() || manifest["iterations"].empty()) {
    throw std::runtime_error("export_curves: manifest lists no completed iteration");
  }
  std::string csv = "iteration,epoch,step,l_ce,l_ranking,total,total_smoothed\n";
  for (const auto& it : manifest["iterations"]) {
    const int t = it.at("t").get<int>();
    if (!it.contains("trace") || it["trace"].is_null()) {
      throw std::runtime_error("iteration " + std::to_string(t) + ": no loss trace recorded");
    }
    const auto rows = read_trace(run_dir / it["trace"].at("path").get<std::string>(), t);
    std::vector<double> totals;
    for (const auto& r : rows) totals.push_back(r.total);
    const std::vector<double> smooth = exponential_smoothing(totals, 0.9);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      csv += std::to_string(t) + ',' + rows[i].epoch + ',' + rows[i].step + ',' + rows[i].l_ce + ',' + rows[i].l_ranking +
             ',' + format_double(rows[i].total) + ',' + format_double(smooth[i]) + '\n';
    }
  }
  io::write_file_atomic(out, csv);
  return out;
}

}  // namespace itertl::pipeline
