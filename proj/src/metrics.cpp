// SPDX-License-Identifier: Apache-2.0
#include "itertl/metrics.hpp"

#include <algorithm>
#include <stdexcept>

#include "itertl/rtl/lexer.hpp"

namespace itertl::metrics {

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  // Keep the shorter sequence on the row so memory is O(min(|a|, |b|)).
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return 0;
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (const std::string& x : a) {
    std::size_t diag = 0;  // row[j-1] from the previous pass
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = x == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row.back();
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  if (reference.empty()) throw std::invalid_argument("rouge_l: empty reference");
  if (candidate.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  const double precision = lcs / static_cast<double>(candidate.size());
  const double recall = lcs / static_cast<double>(reference.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

TokenSeq verilog_token_units(std::string_view source) {
  TokenSeq units;
  for (const rtl::Token& t : rtl::tokenize(source)) {
    if (t.significant()) units.emplace_back(t.text);
  }
  return units;
}

double pass_at_k(const PassAtKInput& in) {
  if (in.n < 1 || in.k < 1 || in.c < 0 || in.c > in.n || in.k > in.n) {
    throw std::invalid_argument("pass_at_k: require n >= 1, 1 <= k <= n, 0 <= c <= n (got n=" +
                                std::to_string(in.n) + ", c=" + std::to_string(in.c) +
                                ", k=" + std::to_string(in.k) + ")");
  }
  if (in.n - in.c < in.k) return 1.0;
  // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k/i)
  double miss = 1.0;
  for (int i = in.n - in.c + 1; i <= in.n; ++i) {
    miss *= 1.0 - static_cast<double>(in.k) / static_cast<double>(i);
  }
  return 1.0 - miss;
}

double aggregate_pass_at_k(std::span<const PassAtKInput> per_problem, int k) {
  if (per_problem.empty()) throw std::invalid_argument("aggregate_pass_at_k: no problems");
  double sum = 0.0;
  for (PassAtKInput p : per_problem) {
    p.k = k;
    sum += pass_at_k(p);
  }
  return sum / static_cast<double>(per_problem.size());
}

}  // namespace itertl::metrics
