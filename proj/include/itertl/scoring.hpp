// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "itertl/records.hpp"

namespace itertl::scoring {

enum class ScoreBasis { syntax_pass, rouge_fallback, multi_module_penalty };

std::string_view basis_name(ScoreBasis basis);
ScoreBasis parse_basis(std::string_view name);

// Value is 1 for syntax_pass, in [0,1] for rouge_fallback and the policy's
// (negative) penalty for multi_module_penalty.
struct QualityScore {
  double value = 0.0;
  ScoreBasis basis = ScoreBasis::rouge_fallback;

  friend bool operator==(const QualityScore&, const QualityScore&) = default;
};

struct FilterPolicy {
  // Also penalise single-module samples that instantiate undeclared modules.
  bool strict_self_contained = false;
  double penalty_value = -1.0;
  // When false, neither prong of the filter runs: references are not
  // screened and multi-module samples are scored like any other sample.
  bool enabled = true;

  // Throws std::invalid_argument unless penalty_value < 0.
  void validate() const;
};

enum class FilterReason { kept, multi_module, reference_syntax };

std::string_view reason_name(FilterReason reason);

struct FilterDecision {
  bool keep = true;
  FilterReason reason = FilterReason::kept;
  std::string detail;
};

// Drops references that declare two or more modules or fail the syntax check.
FilterDecision filter_reference(const InstructionRecord& record);

// Throws std::invalid_argument if the reference would itself be dropped by
// filter_reference (only when the policy is enabled) or is empty.
QualityScore score_response(std::string_view candidate, std::string_view reference,
                            const FilterPolicy& policy);

// Scores the K-1 candidates followed by the reference itself, so the result
// has candidates.size() + 1 entries and the reference is last.
std::vector<QualityScore> score_group(std::span<const std::string> candidates, std::string_view reference,
                                      const FilterPolicy& policy);

struct FilterReport {
  std::size_t kept = 0;
  std::size_t dropped_multi_module = 0;
  std::size_t dropped_reference_syntax = 0;

  friend bool operator==(const FilterReport&, const FilterReport&) = default;
};

std::vector<InstructionRecord> filter_corpus(std::span<const InstructionRecord> corpus, FilterReport* report = nullptr);

}  // namespace itertl::scoring
