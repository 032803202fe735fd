// SPDX-License-Identifier: Apache-2.0
// AVX2 kernel variants. Compiled with -mavx2 -mno-fma -ffp-contract=off.
// This translation unit must not instantiate standard-library inline
// functions: their AVX2-compiled copies could be picked by the linker for
// callers running on CPUs without AVX2.

#include "variants.hpp"

#if defined(ITERTL_HAVE_AVX2)

#include <immintrin.h>

namespace itertl::kernels::detail {
namespace {

constexpr std::size_t kLanes = 4;

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  hi = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, hi));
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  hi = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, hi));
}

// Cephes-style exp: x = n ln2 + r, |r| <= ln2/2, e^r from a (3,3) rational
// approximation, then scaled by 2^n through the exponent bits. Input is
// clamped to [-708, 709] so 2^n stays a normal number.
inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125E-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212E-6);
  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878E-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300E-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910E-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042E-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192E-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766E-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000009E0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);

  x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-708.0)), _mm256_set1_pd(709.0));
  const __m256d fx =
      _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_sub_pd(x, _mm256_mul_pd(fx, c1));
  x = _mm256_sub_pd(x, _mm256_mul_pd(fx, c2));

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_add_pd(_mm256_mul_pd(p0, xx), p1);
  px = _mm256_add_pd(_mm256_mul_pd(px, xx), p2);
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_add_pd(_mm256_mul_pd(q0, xx), q1);
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), q2);
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), q3);
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_add_pd(one, _mm256_mul_pd(two, r));

  const __m128i n32 = _mm256_cvtpd_epi32(fx);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  n64 = _mm256_slli_epi64(n64, 52);
  return _mm256_mul_pd(r, _mm256_castsi256_pd(n64));
}

double max_avx2(const double* x, std::size_t n) {
  std::size_t i = 0;
  double best = x[0];
  if (n >= kLanes) {
    __m256d acc = _mm256_loadu_pd(x);
    for (i = kLanes; i + kLanes <= n; i += kLanes) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
    best = hmax(acc);
  }
  for (; i < n; ++i) best = x[i] > best ? x[i] : best;
  return best;
}

double exp_shift_sum_avx2(const double* x, double shift, double scale, double* out,
                          std::size_t n) {
  const __m256d vshift = _mm256_set1_pd(shift);
  const __m256d vscale = _mm256_set1_pd(scale);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d arg = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), vshift), vscale);
    const __m256d e = exp_pd(arg);
    _mm256_storeu_pd(out + i, e);
    acc = _mm256_add_pd(acc, e);
  }
  double sum = hsum(acc);
  if (i < n) {
    alignas(32) double in_tail[kLanes] = {shift, shift, shift, shift};
    alignas(32) double out_tail[kLanes];
    const std::size_t rest = n - i;
    for (std::size_t j = 0; j < rest; ++j) in_tail[j] = x[i + j];
    const __m256d arg = _mm256_mul_pd(_mm256_sub_pd(_mm256_load_pd(in_tail), vshift), vscale);
    _mm256_store_pd(out_tail, exp_pd(arg));
    for (std::size_t j = 0; j < rest; ++j) {
      out[i + j] = out_tail[j];
      sum += out_tail[j];
    }
  }
  return sum;
}

void scale_avx2(double* x, double factor, std::size_t n) {
  const __m256d f = _mm256_set1_pd(factor);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), f));
  for (; i < n; ++i) x[i] *= factor;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void adam_update_avx2(double* param, const double* grad, double* m, double* v, std::size_t n,
                      const AdamCoefficients& c) {
  const double omb1 = 1.0 - c.beta1;
  const double omb2 = 1.0 - c.beta2;
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d vomb1 = _mm256_set1_pd(omb1);
  const __m256d vomb2 = _mm256_set1_pd(omb2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.step_size);
  const __m256d eps = _mm256_set1_pd(c.epsilon);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d vm = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(vomb1, g));
    __m256d vv = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(vomb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d m_hat = _mm256_div_pd(vm, bc1);
    const __m256d v_hat = _mm256_div_pd(vv, bc2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + omb1 * g;
    v[i] = c.beta2 * v[i] + omb2 * (g * g);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    const __m128d root = _mm_sqrt_sd(_mm_setzero_pd(), _mm_set_sd(v_hat));
    param[i] -= (c.step_size * m_hat) / (_mm_cvtsd_f64(root) + c.epsilon);
  }
}

const KernelTable kTable{Isa::avx2, max_avx2,  exp_shift_sum_avx2,
                         scale_avx2, axpy_avx2, adam_update_avx2};

}  // namespace

const KernelTable* avx2_variant() { return &kTable; }

}  // namespace itertl::kernels::detail

#else

namespace itertl::kernels::detail {
const KernelTable* avx2_variant() { return nullptr; }
}  // namespace itertl::kernels::detail

#endif
