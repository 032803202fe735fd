// SPDX-License-Identifier: Apache-2.0
#include "itertl/scoring.hpp"

#include <stdexcept>

#include "itertl/metrics.hpp"
#include "itertl/rtl/analyzer.hpp"

namespace itertl::scoring {
namespace {

struct PreparedReference {
  metrics::TokenSeq units;
};

PreparedReference prepare_reference(std::string_view reference, const FilterPolicy& policy) {
  policy.validate();
  PreparedReference prepared{metrics::verilog_token_units(reference)};
  if (prepared.units.empty()) throw std::invalid_argument("score_response: empty reference");
  if (policy.enabled) {
    const FilterDecision d = filter_reference(InstructionRecord{"", "", std::string(reference)});
    if (!d.keep) {
      throw std::invalid_argument("score_response: reference rejected by the reference filter (" +
                                  std::string(reason_name(d.reason)) + ")");
    }
  }
  return prepared;
}

QualityScore score_prepared(std::string_view candidate, const PreparedReference& ref, const FilterPolicy& policy) {
  const rtl::StructureReport report = rtl::analyze_structure(candidate);
  if (policy.enabled && (report.multi_module() || (policy.strict_self_contained && !report.self_contained()))) {
    return {policy.penalty_value, ScoreBasis::multi_module_penalty};
  }
  if (report.syntax_ok) return {1.0, ScoreBasis::syntax_pass};
  const metrics::TokenSeq units = metrics::verilog_token_units(candidate);
  return {metrics::rouge_l(units, ref.units), ScoreBasis::rouge_fallback};
}

}  // namespace

std::string_view basis_name(ScoreBasis basis) {
  switch (basis) {
    case ScoreBasis::syntax_pass:
      return "syntax_pass";
    case ScoreBasis::rouge_fallback:
      return "rouge_fallback";
    case ScoreBasis::multi_module_penalty:
      return "multi_module_penalty";
  }
  return "unknown";
}

ScoreBasis parse_basis(std::string_view name) {
  if (name == "syntax_pass") return ScoreBasis::syntax_pass;
  if (name == "rouge_fallback") return ScoreBasis::rouge_fallback;
  if (name == "multi_module_penalty") return ScoreBasis::multi_module_penalty;
  throw std::invalid_argument("unknown score basis: " + std::string(name));
}

std::string_view reason_name(FilterReason reason) {
  switch (reason) {
    case FilterReason::kept:
      return "kept";
    case FilterReason::multi_module:
      return "multi_module";
    case FilterReason::reference_syntax:
      return "reference_syntax";
  }
  return "unknown";
}

void FilterPolicy::validate() const {
  if (!(penalty_value < 0.0)) throw std::invalid_argument("FilterPolicy: penalty_value must be negative");
}

FilterDecision filter_reference(const InstructionRecord& record) {
  const rtl::StructureReport report = rtl::analyze_structure(record.reference);
  if (report.multi_module()) {
    return {false, FilterReason::multi_module,
            "reference declares " + std::to_string(report.module_count) + " modules"};
  }
  if (!report.syntax_ok) {
    std::string detail = "reference fails the syntax check";
    if (report.first_error) detail += ": " + report.first_error->message;
    return {false, FilterReason::reference_syntax, detail};
  }
  return {true, FilterReason::kept, {}};
}

QualityScore score_response(std::string_view candidate, std::string_view reference, const FilterPolicy& policy) {
  return score_prepared(candidate, prepare_reference(reference, policy), policy);
}

std::vector<QualityScore> score_group(std::span<const std::string> candidates, std::string_view reference,
                                      const FilterPolicy& policy) {
  const PreparedReference ref = prepare_reference(reference, policy);
  std::vector<QualityScore> scores;
  scores.reserve(candidates.size() + 1);
  for (const std::string& c : candidates) scores.push_back(score_prepared(c, ref, policy));
  scores.push_back(score_prepared(reference, ref, policy));
  return scores;
}

std::vector<InstructionRecord> filter_corpus(std::span<const InstructionRecord> corpus, FilterReport* report) {
  FilterReport local;
  std::vector<InstructionRecord> kept;
  for (const InstructionRecord& r : corpus) {
    const FilterDecision d = filter_reference(r);
    switch (d.reason) {
      case FilterReason::kept:
        ++local.kept;
        kept.push_back(r);
        break;
      case FilterReason::multi_module:
        ++local.dropped_multi_module;
        break;
      case FilterReason::reference_syntax:
        ++local.dropped_reference_syntax;
        break;
    }
  }
  if (report != nullptr) *report = local;
  return kept;
}

}  // namespace itertl::scoring
