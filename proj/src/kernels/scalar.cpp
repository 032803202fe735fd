// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "itertl/kernels.hpp"

namespace itertl::kernels {
namespace {

double max_scalar(const double* x, std::size_t n) {
  double best = x[0];
  for (std::size_t i = 1; i < n; ++i) best = std::max(best, x[i]);
  return best;
}

double exp_shift_sum_scalar(const double* x, double shift, double scale, double* out,
                            std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp((x[i] - shift) * scale);
    sum += out[i];
  }
  return sum;
}

void scale_scalar(double* x, double factor, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= factor;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// The SIMD variants perform exactly this sequence of IEEE operations per
// lane, so their results are bit-identical to this loop.
void adam_update_scalar(double* param, const double* grad, double* m, double* v, std::size_t n,
                        const AdamCoefficients& c) {
  const double omb1 = 1.0 - c.beta1;
  const double omb2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + omb1 * g;
    v[i] = c.beta2 * v[i] + omb2 * (g * g);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    param[i] -= (c.step_size * m_hat) / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar,  max_scalar,  exp_shift_sum_scalar,
                                 scale_scalar, axpy_scalar, adam_update_scalar};
  return table;
}

}  // namespace itertl::kernels
