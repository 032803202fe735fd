// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "itertl/kernels.hpp"
#include "variants.hpp"

namespace itertl::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(ITERTL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* pick_default() {
  const char* env = std::getenv("ITERTL_SIMD");
  const std::string choice = env != nullptr ? env : "auto";
  if (choice == "scalar") return &scalar_table();
  if (choice == "avx2" && avx2_table() != nullptr) return avx2_table();
  if (choice == "neon" && neon_table() != nullptr) return neon_table();
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

void check_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": span size mismatch");
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

const KernelTable* avx2_table() {
  static const KernelTable* table = cpu_has_avx2() ? detail::avx2_variant() : nullptr;
  return table;
}

const KernelTable* neon_table() { return detail::neon_variant(); }

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
      return avx2_table() != nullptr;
    case Isa::neon:
      return neon_table() != nullptr;
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::scalar:
      t = &scalar_table();
      break;
    case Isa::avx2:
      t = avx2_table();
      break;
    case Isa::neon:
      t = neon_table();
      break;
  }
  if (t == nullptr) throw std::runtime_error("kernel variant not available: " + std::string(isa_name(isa)));
  return *t;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }
Isa active_isa() { return active().isa; }
void force_isa(Isa isa) { current().store(&table_for(isa), std::memory_order_release); }
void reset_isa() { current().store(pick_default(), std::memory_order_release); }

double max_value(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("max_value: empty input");
  return active().max(x.data(), x.size());
}

void softmax(std::span<const double> logits, double inv_temperature, std::span<double> out) {
  check_same_size(logits.size(), out.size(), "softmax");
  if (logits.empty()) return;
  const KernelTable& k = active();
  const double peak = k.max(logits.data(), logits.size());
  const double sum = k.exp_shift_sum(logits.data(), peak, inv_temperature, out.data(), out.size());
  k.scale(out.data(), 1.0 / sum, out.size());
}

double log_sum_exp(std::span<const double> logits, std::span<double> scratch) {
  if (logits.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  if (scratch.size() < logits.size()) throw std::invalid_argument("log_sum_exp: scratch too small");
  const KernelTable& k = active();
  const double peak = k.max(logits.data(), logits.size());
  const double sum = k.exp_shift_sum(logits.data(), peak, 1.0, scratch.data(), logits.size());
  return peak + std::log(sum);
}

double log_softmax_at(std::span<const double> logits, std::size_t index, std::span<double> scratch) {
  if (index >= logits.size()) throw std::invalid_argument("log_softmax_at: index out of range");
  if (scratch.size() < logits.size()) throw std::invalid_argument("log_softmax_at: scratch too small");
  const KernelTable& k = active();
  const double peak = k.max(logits.data(), logits.size());
  const double sum = k.exp_shift_sum(logits.data(), peak, 1.0, scratch.data(), logits.size());
  return (logits[index] - peak) - std::log(sum);
}

void scale(std::span<double> x, double factor) { active().scale(x.data(), factor, x.size()); }

void axpy(double a, std::span<const double> x, std::span<double> y) {
  check_same_size(x.size(), y.size(), "axpy");
  active().axpy(a, x.data(), y.data(), x.size());
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoefficients& c) {
  check_same_size(param.size(), grad.size(), "adam_update");
  check_same_size(param.size(), m.size(), "adam_update");
  check_same_size(param.size(), v.size(), "adam_update");
  active().adam_update(param.data(), grad.data(), m.data(), v.data(), param.size(), c);
}

}  // namespace itertl::kernels
