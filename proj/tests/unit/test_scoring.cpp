// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "itertl/pipeline/corpus.hpp"
#include "itertl/scoring.hpp"
#include "test_support.hpp"

using namespace itertl;
using namespace itertl::scoring;
namespace ts = testing_support;

namespace {

const std::string kReference = "module m(input a, output y);\n  assign y = a;\nendmodule\n";

struct CorpusFile {
  std::string name;
  std::string category;
  std::string text;
};

std::vector<CorpusFile> crafted_corpus() {
  std::vector<CorpusFile> out;
  for (const auto& entry : std::filesystem::directory_iterator(ts::data_dir() / "filter_corpus")) {
    const std::string name = entry.path().filename().string();
    out.push_back({name, name.substr(0, name.find('_')), ts::slurp(entry.path())});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

void check_coupling(const QualityScore& s, const FilterPolicy& policy) {
  switch (s.basis) {
    case ScoreBasis::syntax_pass:
      CHECK(s.value == 1.0);
      break;
    case ScoreBasis::multi_module_penalty:
      CHECK(s.value == policy.penalty_value);
      break;
    case ScoreBasis::rouge_fallback:
      CHECK(s.value >= 0.0);
      CHECK(s.value <= 1.0);
      break;
  }
}

}  // namespace

TEST_CASE("crafted corpus has all four categories") {
  const auto files = crafted_corpus();
  CHECK(files.size() == 50);
  std::map<std::string, int> counts;
  for (const auto& f : files) ++counts[f.category];
  CHECK(counts.size() == 4);
  for (const auto& [cat, n] : counts) CHECK_MESSAGE(n >= 10, cat);
}

TEST_CASE("filter_reference drops exactly multi-module and broken references") {
  for (const auto& f : crafted_corpus()) {
    const FilterDecision d = filter_reference({f.name, "instr", f.text});
    if (f.category == "multi") {
      CHECK_MESSAGE(!d.keep, f.name);
      CHECK_MESSAGE(d.reason == FilterReason::multi_module, f.name);
    } else if (f.category == "broken") {
      CHECK_MESSAGE(!d.keep, f.name);
      CHECK_MESSAGE(d.reason == FilterReason::reference_syntax, f.name);
      CHECK_FALSE(d.detail.empty());
    } else {
      CHECK_MESSAGE(d.keep, f.name);
      CHECK(d.reason == FilterReason::kept);
    }
  }
}

TEST_CASE("score_response on the crafted corpus") {
  const FilterPolicy policy;
  for (const auto& f : crafted_corpus()) {
    const QualityScore s = score_response(f.text, kReference, policy);
    check_coupling(s, policy);
    if (f.category == "multi") {
      CHECK_MESSAGE((s == QualityScore{-1.0, ScoreBasis::multi_module_penalty}), f.name);
    } else if (f.category == "valid" || f.category == "nonself") {
      CHECK_MESSAGE((s == QualityScore{1.0, ScoreBasis::syntax_pass}), f.name);
    } else {
      CHECK_MESSAGE(s.basis == ScoreBasis::rouge_fallback, f.name);
    }
  }
}

TEST_CASE("strict policy also penalises non-self-contained candidates") {
  FilterPolicy strict;
  strict.strict_self_contained = true;
  for (const auto& f : crafted_corpus()) {
    const QualityScore s = score_response(f.text, kReference, strict);
    if (f.category == "nonself" || f.category == "multi") {
      CHECK_MESSAGE(s.basis == ScoreBasis::multi_module_penalty, f.name);
    } else if (f.category == "valid") {
      CHECK_MESSAGE(s.value == 1.0, f.name);
    }
  }
}

TEST_CASE("score examples") {
  const FilterPolicy policy;
  CHECK(score_response("module m(input a, output b); assign b = a; endmodule", kReference, policy).value == 1.0);
  CHECK(score_response("module a; endmodule module b; endmodule", kReference, policy).value == -1.0);
  // Units: candidate [module m endmodule], reference [module m ; endmodule]:
  // P = 3/3, R = 3/4, F1 = 6/7.
  const QualityScore broken = score_response("module m endmodule", "module m; endmodule", policy);
  CHECK(broken.basis == ScoreBasis::rouge_fallback);
  CHECK(broken.value == doctest::Approx(6.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("custom penalty value") {
  FilterPolicy policy;
  policy.penalty_value = -0.5;
  CHECK(score_response("module a; endmodule module b; endmodule", kReference, policy).value == -0.5);
  policy.penalty_value = 0.0;
  CHECK_THROWS_AS(score_response("module a; endmodule", kReference, policy), std::invalid_argument);
}

TEST_CASE("disabled filter scores multi-module candidates like any other") {
  FilterPolicy off;
  off.enabled = false;
  CHECK(score_response("module a; endmodule module b; endmodule", kReference, off).value == 1.0);
  // and accepts a reference the filter would reject
  CHECK_NOTHROW(score_response("module a; endmodule", "module a; endmodule module b; endmodule", off));
}

TEST_CASE("reference precondition violations throw") {
  const FilterPolicy policy;
  CHECK_THROWS_AS(score_response("module a; endmodule", "module a; endmodule module b; endmodule", policy),
                  std::invalid_argument);
  CHECK_THROWS_AS(score_response("module a; endmodule", "module a endmodule", policy), std::invalid_argument);
  CHECK_THROWS_AS(score_response("module a; endmodule", "  // nothing\n", policy), std::invalid_argument);
}

TEST_CASE("score_group appends the reference last") {
  const FilterPolicy policy;
  const std::vector<std::string> all_valid(3, kReference);
  const auto s = score_group(all_valid, kReference, policy);
  REQUIRE(s.size() == 4);
  for (const auto& x : s) CHECK(x.value == 1.0);

  const std::vector<std::string> mixed{kReference, "module a; endmodule module b; endmodule", "module m(input a"};
  const auto m = score_group(mixed, kReference, policy);
  REQUIRE(m.size() == 4);
  CHECK(m[0].value == 1.0);
  CHECK(m[1].value == -1.0);
  CHECK(m[2].basis == ScoreBasis::rouge_fallback);
  CHECK(m[2].value >= 0.0);
  CHECK(m[2].value <= 1.0);
  CHECK(m[3] == QualityScore{1.0, ScoreBasis::syntax_pass});
  CHECK(score_group(mixed, kReference, policy) == m);
}

TEST_CASE("fuzzed candidates respect range, coupling and penalty dominance") {
  std::mt19937_64 rng(9);
  const auto files = crafted_corpus();
  const FilterPolicy policy;
  std::vector<QualityScore> penalised;
  std::vector<QualityScore> others;
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text = files[rng() % files.size()].text;
    for (int e = 0; e < 3 && !text.empty(); ++e) {
      const std::size_t at = rng() % text.size();
      if (rng() % 2 == 0) {
        text.erase(at, 1 + rng() % 8);
      } else {
        text.insert(at, files[rng() % files.size()].text.substr(0, rng() % 40));
      }
    }
    const QualityScore s = score_response(text, kReference, policy);
    check_coupling(s, policy);
    (s.basis == ScoreBasis::multi_module_penalty ? penalised : others).push_back(s);
  }
  REQUIRE_FALSE(penalised.empty());
  REQUIRE_FALSE(others.empty());
  double min_other = 1.0;
  for (const auto& s : others) min_other = std::min(min_other, s.value);
  for (const auto& s : penalised) CHECK(s.value < min_other);
}

TEST_CASE("filter_corpus counts reasons and is idempotent") {
  const auto corpus = pipeline::synthetic_corpus();
  FilterReport report;
  const auto kept = filter_corpus(corpus, &report);
  CHECK(report.kept == kept.size());
  CHECK(report.kept + report.dropped_multi_module + report.dropped_reference_syntax == corpus.size());
  CHECK(report.dropped_multi_module > 0);
  CHECK(report.dropped_reference_syntax > 0);
  FilterReport again;
  CHECK(filter_corpus(kept, &again) == kept);
  CHECK(again == FilterReport{kept.size(), 0, 0});
  CHECK(filter_corpus({}, nullptr).empty());
}

TEST_CASE("basis and reason names round-trip") {
  for (ScoreBasis b : {ScoreBasis::syntax_pass, ScoreBasis::rouge_fallback, ScoreBasis::multi_module_penalty}) {
    CHECK(parse_basis(basis_name(b)) == b);
  }
  CHECK_THROWS_AS(parse_basis("bogus"), std::invalid_argument);
  CHECK(reason_name(FilterReason::multi_module) == "multi_module");
}
