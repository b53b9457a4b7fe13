#include "pdhams/simd.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>
#define PDHAMS_HAVE_NEON_TU 1
#endif

namespace pdhams::simd {

#ifdef PDHAMS_HAVE_NEON_TU
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_neon(const double* a, std::size_t rows, std::size_t cols,
               const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const float64x2_t xj = vdupq_n_f64(x[j]);
    const double* col = a + j * rows;
    std::size_t i = 0;
    for (; i + 2 <= rows; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), vld1q_f64(col + i), xj));
    for (; i < rows; ++i) y[i] += col[i] * x[j];
  }
}

void affine_rows_neon(const double* base, const double* levels,
                      const double* coef, std::size_t d, std::size_t k,
                      double* out) {
  for (std::size_t i = 0; i < d; ++i) {
    const float64x2_t c = vdupq_n_f64(coef[i]);
    double* row = out + i * k;
    std::size_t j = 0;
    for (; j + 2 <= k; j += 2) vst1q_f64(row + j, vfmaq_f64(vld1q_f64(base + j), c, vld1q_f64(levels + j)));
    for (; j < k; ++j) row[j] = base[j] + coef[i] * levels[j];
  }
}

}  // namespace

const KernelSet* neon_kernels() {
  static const KernelSet set{Isa::neon, dot_neon, axpy_neon, gemv_neon, affine_rows_neon};
  return &set;
}

#else

const KernelSet* neon_kernels() { return nullptr; }

#endif

}  // namespace pdhams::simd
