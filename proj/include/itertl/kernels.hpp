// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops of the toy model: softmax rows, gradient
// accumulation and the adaptive-moment parameter update. Each kernel has a
// scalar reference implementation; AVX2 (x86-64) and NEON (aarch64) variants
// are selected once at runtime. ITERTL_SIMD=scalar|avx2|neon|auto overrides
// the selection.

namespace itertl::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

struct AdamCoefficients {
  double step_size = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // 1 - beta^t, supplied by the caller for the current step.
  double bias_correction1 = 1.0;
  double bias_correction2 = 1.0;
};

struct KernelTable {
  Isa isa;
  double (*max)(const double* x, std::size_t n);
  // out[i] = exp((x[i] - shift) * scale); returns the sum of out.
  double (*exp_shift_sum)(const double* x, double shift, double scale, double* out,
                          std::size_t n);
  void (*scale)(double* x, double factor, std::size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*adam_update)(double* param, const double* grad, double* m, double* v, std::size_t n,
                      const AdamCoefficients& c);
};

const KernelTable& scalar_table();
// nullptr when the variant is not compiled in or not supported by this CPU.
const KernelTable* avx2_table();
const KernelTable* neon_table();

const KernelTable& table_for(Isa isa);
bool isa_available(Isa isa);

// Currently selected table. Thread-safe to read; force_isa is meant for tests
// and benchmarks and must not race with kernel calls.
const KernelTable& active();
Isa active_isa();
void force_isa(Isa isa);
void reset_isa();

// Span front-ends over active().
double max_value(std::span<const double> x);
// out = softmax(logits * inv_temperature). out may alias logits.
void softmax(std::span<const double> logits, double inv_temperature, std::span<double> out);
// log-sum-exp of logits, computed with max subtraction. scratch.size() >= logits.size().
double log_sum_exp(std::span<const double> logits, std::span<double> scratch);
// log softmax(logits)[index], computed as (x - max) - log(sum exp(x - max))
// so the result is never positive.
double log_softmax_at(std::span<const double> logits, std::size_t index, std::span<double> scratch);
void scale(std::span<double> x, double factor);
void axpy(double a, std::span<const double> x, std::span<double> y);
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoefficients& c);

}  // namespace itertl::kernels
