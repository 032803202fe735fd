// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace itertl::metrics {

// Comparison units for sequence similarity; compared by exact equality.
using TokenSeq = std::vector<std::string>;

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// Rouge-L F1 (beta = 1): P = LCS/|candidate|, R = LCS/|reference|,
// F = 2PR/(P+R). Empty candidate scores 0. Throws std::invalid_argument for
// an empty reference.
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

// Verilog lexer tokens with whitespace and comments dropped.
TokenSeq verilog_token_units(std::string_view source);

struct PassAtKInput {
  int n = 0;  // candidates generated
  int c = 0;  // candidates passing
  int k = 1;
};

// Unbiased estimator 1 - C(n-c, k) / C(n, k), evaluated as a running product
// so it stays exact-ish for n up to 1e4 and beyond. Throws
// std::invalid_argument when n < 1, k < 1, c < 0, c > n or k > n.
double pass_at_k(const PassAtKInput& input);

// Mean of pass_at_k over problems, each evaluated at `k`. Throws on an empty
// list.
double aggregate_pass_at_k(std::span<const PassAtKInput> per_problem, int k);

}  // namespace itertl::metrics
