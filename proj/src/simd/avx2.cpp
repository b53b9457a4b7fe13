#include "pdhams/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define PDHAMS_HAVE_AVX2_TU 1
#define PDHAMS_AVX2 __attribute__((target("avx2,fma")))
#endif

namespace pdhams::simd {

#ifdef PDHAMS_HAVE_AVX2_TU
namespace {

PDHAMS_AVX2 double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  const __m128d sh = _mm_unpackhi_pd(s, s);
  return _mm_cvtsd_f64(_mm_add_sd(s, sh));
}

PDHAMS_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

PDHAMS_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

PDHAMS_AVX2 void gemv_avx2(const double* a, std::size_t rows, std::size_t cols,
                           const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = 0.0;
  // Two columns per pass halves the load/store traffic on y.
  std::size_t j = 0;
  for (; j + 2 <= cols; j += 2) {
    const __m256d x0 = _mm256_set1_pd(x[j]);
    const __m256d x1 = _mm256_set1_pd(x[j + 1]);
    const double* c0 = a + j * rows;
    const double* c1 = c0 + rows;
    std::size_t i = 0;
    for (; i + 4 <= rows; i += 4) {
      __m256d acc = _mm256_loadu_pd(y + i);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(c0 + i), x0, acc);
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(c1 + i), x1, acc);
      _mm256_storeu_pd(y + i, acc);
    }
    for (; i < rows; ++i) y[i] += c0[i] * x[j] + c1[i] * x[j + 1];
  }
  for (; j < cols; ++j) {
    const __m256d xj = _mm256_set1_pd(x[j]);
    const double* col = a + j * rows;
    std::size_t i = 0;
    for (; i + 4 <= rows; i += 4) {
      _mm256_storeu_pd(y + i, _mm256_fmadd_pd(_mm256_loadu_pd(col + i), xj, _mm256_loadu_pd(y + i)));
    }
    for (; i < rows; ++i) y[i] += col[i] * x[j];
  }
}

PDHAMS_AVX2 void affine_rows_avx2(const double* base, const double* levels,
                                  const double* coef, std::size_t d, std::size_t k,
                                  double* out) {
  for (std::size_t i = 0; i < d; ++i) {
    const __m256d c = _mm256_set1_pd(coef[i]);
    double* row = out + i * k;
    std::size_t j = 0;
    for (; j + 4 <= k; j += 4) {
      _mm256_storeu_pd(row + j, _mm256_fmadd_pd(c, _mm256_loadu_pd(levels + j), _mm256_loadu_pd(base + j)));
    }
    for (; j < k; ++j) row[j] = base[j] + coef[i] * levels[j];
  }
}

}  // namespace

const KernelSet* avx2_kernels() {
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  static const KernelSet set{Isa::avx2, dot_avx2, axpy_avx2, gemv_avx2, affine_rows_avx2};
  return supported ? &set : nullptr;
}

#else

const KernelSet* avx2_kernels() { return nullptr; }

#endif

}  // namespace pdhams::simd
