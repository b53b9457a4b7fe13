#pragma once

// Product-categorical proposals and discrete over-relaxation.

#include <cstddef>
#include <span>
#include <vector>

#include "pdhams/lattice.hpp"
#include "pdhams/precondition.hpp"
#include "pdhams/rng.hpp"

namespace pdhams {

/// Floor for per-value log-probabilities inside a row.
inline constexpr double kLogProbFloor = -745.0;

struct ProductCategorical {
  std::size_t d = 0;
  std::size_t K = 0;
  std::vector<double> logits;     // d x K, row-major
  std::vector<double> log_norms;  // per-row log Σ exp(logits)

  std::span<const double> row_logits(std::size_t i) const { return {&logits[i * K], K}; }

  /// Normalized log-probability of level k at coordinate i, floored at kLogProbFloor.
  double log_prob(std::size_t i, std::size_t k) const;
  /// Σ_i log_prob(i, idx[i])
  double log_prob(std::span<const std::uint16_t> idx) const;
  std::vector<double> row_pmf(std::size_t i) const;
};

/// Rows with logits(i, k) = -½ λ a_k² + coef_i a_k.
ProductCategorical proposal_from_coefficients(const Vec& coef, double lambda, const LatticeSpec& lattice);

/// coef = grad - W s_ref + (W + λI) z.
ProductCategorical build_proposal(const Vec& grad, const Vec& s_ref, const Vec& z,
                                  const Preconditioner& pre, const LatticeSpec& lattice);

/// Inverse CDF over one row: first k with u < F(k).
std::size_t sample_row(std::span<const double> pmf, double u);

/// One uniform per coordinate, ascending.
IndexPoint sample_product(const ProductCategorical& dist, std::span<const double> uniforms);
IndexPoint sample_product(const ProductCategorical& dist, Philox& rng);

/// A row pmf with its left CDF limits F(k⁻).
struct RowCdf {
  std::vector<double> p;
  std::vector<double> lower;  // lower[k] = Σ_{j<k} p[j]

  RowCdf() = default;
  explicit RowCdf(std::vector<double> pmf);
  std::size_t K() const { return p.size(); }
  double upper(std::size_t k) const { return lower[k] + p[k]; }
};

RowCdf row_cdf(const ProductCategorical& dist, std::size_t i);

struct OverRelaxDraw {
  std::size_t x1;
  double log_prob;  // log P(x1 | x0)
};

/// The deterministic part of the over-relaxation move: w0 = F(x0⁻) + p(x0)·u0,
/// w1 = (-w0 + β·u_tilde) mod 1, x1 the level whose CDF interval holds w1.
std::size_t over_relax_map(const RowCdf& row, std::size_t x0, double beta, double u0, double u_tilde);

/// Exact log P(x1 | x0), the measure of (w0, w̃) landing in x1's interval
/// divided by p(x0). -inf when unreachable.
double over_relax_log_prob(const RowCdf& row, std::size_t x0, std::size_t x1, double beta);

OverRelaxDraw over_relax(std::size_t x0, const RowCdf& row, double beta, double u0, double u_tilde);
OverRelaxDraw over_relax(std::size_t x0, std::span<const double> row_pmf, double beta, Philox& rng);

}  // namespace pdhams
