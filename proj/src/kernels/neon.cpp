// SPDX-License-Identifier: Apache-2.0
// NEON kernel variants for aarch64 (two double lanes). NEON is mandatory on
// aarch64, so no runtime probe is needed. Same standard-library restriction
// as the AVX2 unit.

#include "variants.hpp"

#if defined(ITERTL_HAVE_NEON)

#include <arm_neon.h>

namespace itertl::kernels::detail {
namespace {

constexpr std::size_t kLanes = 2;

inline float64x2_t exp_f64x2(float64x2_t x) {
  const float64x2_t log2e = vdupq_n_f64(1.4426950408889634073599);
  const float64x2_t c1 = vdupq_n_f64(6.93145751953125E-1);
  const float64x2_t c2 = vdupq_n_f64(1.42860682030941723212E-6);
  const float64x2_t p0 = vdupq_n_f64(1.26177193074810590878E-4);
  const float64x2_t p1 = vdupq_n_f64(3.02994407707441961300E-2);
  const float64x2_t p2 = vdupq_n_f64(9.99999999999999999910E-1);
  const float64x2_t q0 = vdupq_n_f64(3.00198505138664455042E-6);
  const float64x2_t q1 = vdupq_n_f64(2.52448340349684104192E-3);
  const float64x2_t q2 = vdupq_n_f64(2.27265548208155028766E-1);
  const float64x2_t q3 = vdupq_n_f64(2.00000000000000000009E0);
  const float64x2_t one = vdupq_n_f64(1.0);
  const float64x2_t two = vdupq_n_f64(2.0);

  x = vminq_f64(vmaxq_f64(x, vdupq_n_f64(-708.0)), vdupq_n_f64(709.0));
  const float64x2_t fx = vrndnq_f64(vmulq_f64(x, log2e));
  x = vsubq_f64(x, vmulq_f64(fx, c1));
  x = vsubq_f64(x, vmulq_f64(fx, c2));

  const float64x2_t xx = vmulq_f64(x, x);
  float64x2_t px = vaddq_f64(vmulq_f64(p0, xx), p1);
  px = vaddq_f64(vmulq_f64(px, xx), p2);
  px = vmulq_f64(px, x);
  float64x2_t qx = vaddq_f64(vmulq_f64(q0, xx), q1);
  qx = vaddq_f64(vmulq_f64(qx, xx), q2);
  qx = vaddq_f64(vmulq_f64(qx, xx), q3);
  float64x2_t r = vdivq_f64(px, vsubq_f64(qx, px));
  r = vaddq_f64(one, vmulq_f64(two, r));

  int64x2_t n = vcvtq_s64_f64(fx);
  n = vaddq_s64(n, vdupq_n_s64(1023));
  n = vshlq_n_s64(n, 52);
  return vmulq_f64(r, vreinterpretq_f64_s64(n));
}

double max_neon(const double* x, std::size_t n) {
  std::size_t i = 0;
  double best = x[0];
  if (n >= kLanes) {
    float64x2_t acc = vld1q_f64(x);
    for (i = kLanes; i + kLanes <= n; i += kLanes) acc = vmaxq_f64(acc, vld1q_f64(x + i));
    best = vmaxvq_f64(acc);
  }
  for (; i < n; ++i) best = x[i] > best ? x[i] : best;
  return best;
}

double exp_shift_sum_neon(const double* x, double shift, double scale, double* out,
                          std::size_t n) {
  const float64x2_t vshift = vdupq_n_f64(shift);
  const float64x2_t vscale = vdupq_n_f64(scale);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t e = exp_f64x2(vmulq_f64(vsubq_f64(vld1q_f64(x + i), vshift), vscale));
    vst1q_f64(out + i, e);
    acc = vaddq_f64(acc, e);
  }
  double sum = vaddvq_f64(acc);
  if (i < n) {
    double in_tail[kLanes] = {x[i], shift};
    double out_tail[kLanes];
    vst1q_f64(out_tail, exp_f64x2(vmulq_f64(vsubq_f64(vld1q_f64(in_tail), vshift), vscale)));
    out[i] = out_tail[0];
    sum += out_tail[0];
  }
  return sum;
}

void scale_neon(double* x, double factor, std::size_t n) {
  const float64x2_t f = vdupq_n_f64(factor);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), f));
  for (; i < n; ++i) x[i] *= factor;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void adam_update_neon(double* param, const double* grad, double* m, double* v, std::size_t n,
                      const AdamCoefficients& c) {
  const double omb1 = 1.0 - c.beta1;
  const double omb2 = 1.0 - c.beta2;
  const float64x2_t b1 = vdupq_n_f64(c.beta1);
  const float64x2_t b2 = vdupq_n_f64(c.beta2);
  const float64x2_t vomb1 = vdupq_n_f64(omb1);
  const float64x2_t vomb2 = vdupq_n_f64(omb2);
  const float64x2_t bc1 = vdupq_n_f64(c.bias_correction1);
  const float64x2_t bc2 = vdupq_n_f64(c.bias_correction2);
  const float64x2_t lr = vdupq_n_f64(c.step_size);
  const float64x2_t eps = vdupq_n_f64(c.epsilon);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t g = vld1q_f64(grad + i);
    const float64x2_t vm = vaddq_f64(vmulq_f64(b1, vld1q_f64(m + i)), vmulq_f64(vomb1, g));
    const float64x2_t vv =
        vaddq_f64(vmulq_f64(b2, vld1q_f64(v + i)), vmulq_f64(vomb2, vmulq_f64(g, g)));
    vst1q_f64(m + i, vm);
    vst1q_f64(v + i, vv);
    const float64x2_t m_hat = vdivq_f64(vm, bc1);
    const float64x2_t v_hat = vdivq_f64(vv, bc2);
    const float64x2_t step = vdivq_f64(vmulq_f64(lr, m_hat), vaddq_f64(vsqrtq_f64(v_hat), eps));
    vst1q_f64(param + i, vsubq_f64(vld1q_f64(param + i), step));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + omb1 * g;
    v[i] = c.beta2 * v[i] + omb2 * (g * g);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    param[i] -= (c.step_size * m_hat) / (vget_lane_f64(vsqrt_f64(vdup_n_f64(v_hat)), 0) + c.epsilon);
  }
}

const KernelTable kTable{Isa::neon, max_neon,  exp_shift_sum_neon,
                         scale_neon, axpy_neon, adam_update_neon};

}  // namespace

const KernelTable* neon_variant() { return &kTable; }

}  // namespace itertl::kernels::detail

#else

namespace itertl::kernels::detail {
const KernelTable* neon_variant() { return nullptr; }
}  // namespace itertl::kernels::detail

#endif
