#pragma once

// Target distributions pi(s) ∝ exp(f(s)) on a homogeneous lattice, and exact
// enumeration of their low-dimensional marginals.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "pdhams/lattice.hpp"

namespace pdhams {

/// Probability table over a coordinate tuple. Cells are row-major with
/// coords[0] the most significant digit.
struct PmfTable {
  std::vector<std::size_t> coords;
  std::size_t K = 0;
  std::vector<double> p;

  std::size_t cell(std::span<const std::uint16_t> tuple_idx) const;
};

class QuadraticTarget;

class TargetModel {
 public:
  explicit TargetModel(LatticeSpec lattice) : lattice_(std::move(lattice)) {}
  virtual ~TargetModel() = default;

  const LatticeSpec& lattice() const { return lattice_; }
  std::size_t dim() const { return lattice_.dim(); }

  virtual std::string name() const = 0;
  virtual double f(const Vec& s) const = 0;
  virtual Vec grad(const Vec& s) const = 0;
  virtual nlohmann::json describe() const = 0;

  /// Non-null when f is exactly quadratic.
  virtual const QuadraticTarget* as_quadratic() const { return nullptr; }

  /// Structured exact marginal for targets too large to brute-force.
  virtual std::optional<PmfTable> exact_marginal(std::span<const std::size_t> coords) const;

  /// True when the law is invariant under coordinate permutations, so every
  /// marginal of a given size is the same table.
  virtual bool exchangeable() const { return false; }

 private:
  LatticeSpec lattice_;
};

/// f(s) = ½ sᵀ W s + bᵀ s
class QuadraticTarget : public TargetModel {
 public:
  QuadraticTarget(LatticeSpec lattice, Mat W_true, Vec b);

  std::string name() const override { return "quadratic"; }
  double f(const Vec& s) const override;
  Vec grad(const Vec& s) const override;
  nlohmann::json describe() const override;
  const QuadraticTarget* as_quadratic() const override { return this; }

  const Mat& W_true() const { return W_; }
  const Vec& b() const { return b_; }

 private:
  Mat W_;
  Vec b_;
};

/// f(s) = -½ sᵀ Σ⁻¹ s, Σ = σ²[ρ 11ᵀ + (1-ρ)I], on {-k..k}^d.
class DiscreteGaussian : public QuadraticTarget {
 public:
  DiscreteGaussian(std::size_t d, int k, double sigma, double rho);

  std::string name() const override { return "discrete_gaussian"; }
  nlohmann::json describe() const override;
  std::optional<PmfTable> exact_marginal(std::span<const std::size_t> coords) const override;
  bool exchangeable() const override { return true; }

  const Mat& sigma_inv() const { return sigma_inv_; }
  int k() const { return k_; }

 private:
  static Mat closed_form_inverse(std::size_t d, double sigma, double rho);

  int k_;
  double sigma_, rho_;
  Mat sigma_inv_;
};

/// f(s) = log Σ_m exp(-½‖s - μ_m‖² / σ_m²) on {-k..k}^d.
class QuadraticMixture : public TargetModel {
 public:
  QuadraticMixture(std::size_t d, int k, std::vector<Vec> means, std::vector<double> variances);

  /// μ_m = (-5.625 + 1.125 m)·1, σ_m² = 2.10 + 0.15|m-5|, m = 1..M.
  static std::unique_ptr<QuadraticMixture> standard(std::size_t d = 10, int k = 10, int M = 9);

  std::string name() const override { return "quadratic_mixture"; }
  double f(const Vec& s) const override;
  Vec grad(const Vec& s) const override;
  nlohmann::json describe() const override;
  std::optional<PmfTable> exact_marginal(std::span<const std::size_t> coords) const override;
  bool exchangeable() const override { return exchangeable_; }

 private:
  int k_;
  std::vector<Vec> means_;
  std::vector<double> variances_;
  bool exchangeable_;
};

/// f(s) = J Σ_<ij> cos(θ_i - θ_j), θ = 2πs/q, periodic side x side grid.
class ClockPotts : public TargetModel {
 public:
  ClockPotts(std::size_t side, int q, double J);

  std::string name() const override { return "clock_potts"; }
  double f(const Vec& s) const override;
  Vec grad(const Vec& s) const override;
  nlohmann::json describe() const override;

  std::size_t side() const { return side_; }
  int q() const { return q_; }
  double J() const { return J_; }
  /// Each unordered neighbor pair once (right and down links).
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  /// The 4 periodic neighbors of site i.
  std::span<const std::size_t> neighbors(std::size_t i) const { return {&nbr_[4 * i], 4}; }

 private:
  std::size_t side_;
  int q_;
  double J_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::size_t> nbr_;
};

std::unique_ptr<DiscreteGaussian> discrete_gaussian(std::size_t d, int k, double sigma, double rho);
std::unique_ptr<QuadraticMixture> quadratic_mixture(std::size_t d, int k, std::vector<Vec> means,
                                                    std::vector<double> variances);
std::unique_ptr<ClockPotts> clock_potts(std::size_t side, int q, double J);

inline constexpr double kEnumerationBudget = 1e7;

/// Exact marginal pmf of `coords`. Brute force when K^d fits the budget,
/// otherwise the target's structured route; EnumerationBudgetError if neither.
PmfTable enumerate_joint(const TargetModel& target, std::span<const std::size_t> coords,
                         double budget = kEnumerationBudget);

/// Brute-force route only.
PmfTable enumerate_brute_force(const TargetModel& target, std::span<const std::size_t> coords,
                               double budget = kEnumerationBudget);

/// log Σ exp(x)
double log_sum_exp(std::span<const double> x);

}  // namespace pdhams
