#pragma once

// The preconditioning triple (W, D = λI, L) with W + D = L Lᵀ, and the two
// ways of estimating W from a burn-in trajectory.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdhams/lattice.hpp"

namespace pdhams {

class TargetModel;

enum class FactorKind { cholesky, eigen };

std::string to_string(FactorKind k);
FactorKind factor_kind_from_string(const std::string& s);

struct Preconditioner {
  Mat W;
  double lambda = 0.0;
  Mat L;        // W + λI = L Lᵀ
  Mat L_inv_T;  // (Lᵀ)⁻¹
  Mat WD;       // W + λI
  FactorKind kind = FactorKind::cholesky;
  double cond = 1.0;
  double log_det = 0.0;  // log det(W + λI)

  std::size_t dim() const { return static_cast<std::size_t>(W.rows()); }
};

struct CalibrationSample {
  std::vector<Vec> states;
  std::vector<Vec> grads;
  std::vector<double> energies;

  std::size_t size() const { return states.size(); }
  /// Throws ConfigError unless the three sequences agree and have length >= 2.
  void validate() const;
};

enum class LyapunovRoute { bartels_stewart, kronecker };

/// Symmetric W solving A W + W A = C for symmetric positive definite A.
/// Reduces A to its (diagonal) Schur form, solves elementwise, maps back.
Mat solve_lyapunov_symmetric(const Mat& A, const Mat& C);

/// Same equation through the d²×d² system (I⊗A + A⊗I) vec(W) = vec(C).
Mat solve_lyapunov_kronecker(const Mat& A, const Mat& C);

/// Least-squares fit of gradient differences: (DsᵀDs)W + W(DsᵀDs) = DsᵀDf + DfᵀDs.
Mat calibrate_w_gradient_diff(const CalibrationSample& sample,
                              LyapunovRoute route = LyapunovRoute::bartels_stewart);

/// Least-squares fit of second-order energy residuals over vech(W).
Mat calibrate_w_energy_diff(const CalibrationSample& sample);

enum class CalibrationMethod { gradient_diff, energy_diff, exact_quadratic, none };

std::string to_string(CalibrationMethod m);
CalibrationMethod calibration_method_from_string(const std::string& s);

/// λ = δ - min{0, λ_min(W)}
double lambda_shift(const Mat& W, double delta);

/// Factor W + λI. Cholesky when cond < cond_threshold, eigen otherwise,
/// unless `force` picks the path.
Preconditioner factorize(const Mat& W, double lambda, double cond_threshold = 100.0,
                         std::optional<FactorKind> force = std::nullopt);

/// lambda_shift followed by factorize.
Preconditioner make_preconditioner(const Mat& W, double delta, double cond_threshold = 100.0,
                                   std::optional<FactorKind> force = std::nullopt);

/// W = 0, λ = δ, L = √δ I.
Preconditioner first_order_preconditioner(std::size_t d, double delta);

struct ScalingPair {
  Mat w_s;  // fitted on the original sample
  Mat w_y;  // fitted on states scaled by c
};

/// Refits W after the substitution y = c s (energies kept, gradients / c).
ScalingPair scaling_check(const TargetModel& target, double c, const CalibrationSample& sample,
                          CalibrationMethod method = CalibrationMethod::gradient_diff);

nlohmann::json to_json(const Preconditioner& p);
Preconditioner preconditioner_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j);

}  // namespace pdhams
