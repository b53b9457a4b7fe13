#include "pdhams/simd.hpp"

namespace pdhams::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double xj = x[j];
    const double* col = a + j * rows;
    for (std::size_t i = 0; i < rows; ++i) y[i] += col[i] * xj;
  }
}

void affine_rows_scalar(const double* base, const double* levels,
                        const double* coef, std::size_t d, std::size_t k,
                        double* out) {
  for (std::size_t i = 0; i < d; ++i) {
    const double c = coef[i];
    double* row = out + i * k;
    for (std::size_t j = 0; j < k; ++j) row[j] = base[j] + c * levels[j];
  }
}

}  // namespace

const KernelSet& scalar_kernels() {
  static const KernelSet set{Isa::scalar, dot_scalar, axpy_scalar, gemv_scalar,
                             affine_rows_scalar};
  return set;
}

}  // namespace pdhams::simd
