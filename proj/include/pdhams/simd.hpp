#pragma once

// Dense inner-loop kernels used by the samplers, with a scalar reference
// implementation and vectorized variants selected once at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace pdhams::simd {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa);

/// One implementation of every kernel. All matrices are column-major.
struct KernelSet {
  Isa isa;

  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  /// y = A x for a rows x cols column-major A.
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols,
               const double* x, double* y);

  /// out[i * k + j] = base[j] + coef[i] * levels[j], a d x k row-major table.
  void (*affine_rows)(const double* base, const double* levels,
                      const double* coef, std::size_t d, std::size_t k,
                      double* out);
};

const KernelSet& scalar_kernels();

/// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelSet* avx2_kernels();
const KernelSet* neon_kernels();

/// The set chosen at first use. PDHAMS_SIMD=scalar|avx2|neon|auto overrides
/// the automatic choice; an unavailable request falls back to scalar.
const KernelSet& active();

/// Test hook: force a specific ISA for the rest of the process.
/// Returns false (and leaves the selection alone) when unavailable.
bool select(Isa isa);

// Span conveniences over the active set.

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace pdhams::simd
