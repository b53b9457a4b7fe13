#include "pdhams/precondition.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "pdhams/error.hpp"
#include "pdhams/targets.hpp"

namespace pdhams {

namespace {

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Rows s_{t+1} - s_t and the matching gradient differences, zero moves dropped.
void difference_rows(const CalibrationSample& sample, Mat& Ds, Mat& Df) {
  const auto d = sample.states.front().size();
  std::vector<Eigen::Index> keep;
  for (std::size_t t = 0; t + 1 < sample.size(); ++t)
    if (sample.states[t + 1] != sample.states[t]) keep.push_back(static_cast<Eigen::Index>(t));
  Ds.resize(static_cast<Eigen::Index>(keep.size()), d);
  Df.resize(static_cast<Eigen::Index>(keep.size()), d);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto t = static_cast<std::size_t>(keep[r]);
    Ds.row(static_cast<Eigen::Index>(r)) = (sample.states[t + 1] - sample.states[t]).transpose();
    Df.row(static_cast<Eigen::Index>(r)) = (sample.grads[t + 1] - sample.grads[t]).transpose();
  }
}

}  // namespace

std::string to_string(FactorKind k) { return k == FactorKind::cholesky ? "cholesky" : "eigen"; }

FactorKind factor_kind_from_string(const std::string& s) {
  if (s == "cholesky") return FactorKind::cholesky;
  if (s == "eigen") return FactorKind::eigen;
  throw ConfigError("unknown factorization kind '" + s + "'");
}

std::string to_string(CalibrationMethod m) {
  switch (m) {
    case CalibrationMethod::gradient_diff: return "gradient_diff";
    case CalibrationMethod::energy_diff: return "energy_diff";
    case CalibrationMethod::exact_quadratic: return "exact_quadratic";
    case CalibrationMethod::none: return "none";
  }
  return "none";
}

CalibrationMethod calibration_method_from_string(const std::string& s) {
  if (s == "gradient_diff") return CalibrationMethod::gradient_diff;
  if (s == "energy_diff") return CalibrationMethod::energy_diff;
  if (s == "exact_quadratic") return CalibrationMethod::exact_quadratic;
  if (s == "none") return CalibrationMethod::none;
  throw ConfigError("unknown calibration method '" + s + "'");
}

void CalibrationSample::validate() const {
  if (states.size() < 2) throw ConfigError("calibration sample needs at least two states");
  if (grads.size() != states.size() || energies.size() != states.size())
    throw ConfigError("calibration states, gradients and energies differ in length");
  const auto d = states.front().size();
  for (std::size_t t = 0; t < states.size(); ++t)
    if (states[t].size() != d || grads[t].size() != d)
      throw ConfigError("calibration sample has inconsistent dimensions");
}

Mat solve_lyapunov_symmetric(const Mat& A, const Mat& C) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  if (es.info() != Eigen::Success) throw CalibrationError("eigensolver failed on DsᵀDs");
  const Mat& Q = es.eigenvectors();
  const Vec& lam = es.eigenvalues();
  Mat X = Q.transpose() * C * Q;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) /= lam[i] + lam[j];
  return symmetrize(Q * X * Q.transpose());
}

Mat solve_lyapunov_kronecker(const Mat& A, const Mat& C) {
  const Eigen::Index d = A.rows();
  const Mat I = Mat::Identity(d, d);
  Mat K = Mat::Zero(d * d, d * d);
  // Column-major vec: vec(AW) = (I⊗A) vec(W), vec(WA) = (Aᵀ⊗I) vec(W).
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      K.block(i * d, j * d, d, d) += I(i, j) * A;
      K.block(i * d, j * d, d, d) += A(j, i) * I;
    }
  const Vec rhs = Eigen::Map<const Vec>(C.data(), d * d);
  const Vec w = K.partialPivLu().solve(rhs);
  return symmetrize(Eigen::Map<const Mat>(w.data(), d, d));
}

Mat calibrate_w_gradient_diff(const CalibrationSample& sample, LyapunovRoute route) {
  sample.validate();
  Mat Ds, Df;
  difference_rows(sample, Ds, Df);
  const Eigen::Index d = sample.states.front().size();
  if (Ds.rows() < d) throw RankDeficiencyError("fewer distinct moves than dimensions");
  const Mat A = Ds.transpose() * Ds;
  const Mat C = Ds.transpose() * Df + Df.transpose() * Ds;

  Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  if (!(es.eigenvalues().minCoeff() > 1e-10 * top))
    throw RankDeficiencyError("state differences do not span all coordinates");

  if (route == LyapunovRoute::kronecker) {
    if (d > 32) throw ConfigError("Kronecker Lyapunov route is limited to d <= 32");
    return solve_lyapunov_kronecker(A, C);
  }
  return solve_lyapunov_symmetric(A, C);
}

Mat calibrate_w_energy_diff(const CalibrationSample& sample) {
  sample.validate();
  const Eigen::Index d = sample.states.front().size();
  const Eigen::Index p = d * (d + 1) / 2;

  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t + 1 < sample.size(); ++t)
    if (sample.states[t + 1] != sample.states[t]) rows.push_back(t);
  if (static_cast<Eigen::Index>(rows.size()) < p)
    throw RankDeficiencyError("fewer distinct moves than free entries of W");

  Mat B(static_cast<Eigen::Index>(rows.size()), p);
  Vec a(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t t = rows[r];
    const Vec beta = sample.states[t + 1] - sample.states[t];
    const auto ri = static_cast<Eigen::Index>(r);
    a[ri] = sample.energies[t + 1] - sample.energies[t] - sample.grads[t].dot(beta);
    Eigen::Index col = 0;
    for (Eigen::Index k = 0; k < d; ++k) {
      B(ri, col++) = 0.5 * beta[k] * beta[k];
      for (Eigen::Index l = k + 1; l < d; ++l) B(ri, col++) = beta[k] * beta[l];
    }
  }

  Eigen::ColPivHouseholderQR<Mat> qr(B);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw RankDeficiencyError("energy-difference design is rank deficient");
  const Vec x = qr.solve(a);

  Mat W(d, d);
  Eigen::Index col = 0;
  for (Eigen::Index k = 0; k < d; ++k) {
    W(k, k) = x[col++];
    for (Eigen::Index l = k + 1; l < d; ++l) {
      W(k, l) = x[col];
      W(l, k) = x[col];
      ++col;
    }
  }
  return W;
}

double lambda_shift(const Mat& W, double delta) {
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(W), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw CalibrationError("eigensolver failed on W");
  return delta - std::min(0.0, es.eigenvalues().minCoeff());
}

Preconditioner factorize(const Mat& W, double lambda, double cond_threshold,
                         std::optional<FactorKind> force) {
  if (W.rows() != W.cols() || W.rows() == 0) throw ConfigError("W must be a non-empty square matrix");
  const Eigen::Index d = W.rows();
  Preconditioner p;
  p.W = symmetrize(W);
  p.lambda = lambda;
  p.WD = p.W;
  p.WD.diagonal().array() += lambda;

  Eigen::SelfAdjointEigenSolver<Mat> es(p.WD);
  if (es.info() != Eigen::Success) throw CalibrationError("eigensolver failed on W + λI");
  const Vec& ev = es.eigenvalues();  // ascending
  if (!(ev[0] > 0.0)) throw CalibrationError("W + λI is not positive definite");
  p.cond = ev[d - 1] / ev[0];
  p.log_det = ev.array().log().sum();
  p.kind = force.value_or(p.cond < cond_threshold ? FactorKind::cholesky : FactorKind::eigen);

  if (p.kind == FactorKind::cholesky) {
    Eigen::LLT<Mat> llt(p.WD);
    if (llt.info() != Eigen::Success) throw CalibrationError("Cholesky breakdown on W + λI");
    p.L = llt.matrixL();
    p.L_inv_T = p.L.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(d, d));
  } else {
    // Descending eigenvalues, each eigenvector signed so its largest entry is positive.
    Mat U(d, d);
    Vec lam(d);
    for (Eigen::Index c = 0; c < d; ++c) {
      Vec u = es.eigenvectors().col(d - 1 - c);
      Eigen::Index arg;
      u.cwiseAbs().maxCoeff(&arg);
      if (u[arg] < 0) u = -u;
      U.col(c) = u;
      lam[c] = ev[d - 1 - c];
    }
    p.L = U * lam.cwiseSqrt().asDiagonal();
    p.L_inv_T = U * lam.cwiseSqrt().cwiseInverse().asDiagonal();
  }
  return p;
}

Preconditioner make_preconditioner(const Mat& W, double delta, double cond_threshold,
                                   std::optional<FactorKind> force) {
  return factorize(W, lambda_shift(W, delta), cond_threshold, force);
}

Preconditioner first_order_preconditioner(std::size_t d, double delta) {
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  const auto n = static_cast<Eigen::Index>(d);
  Preconditioner p;
  p.W = Mat::Zero(n, n);
  p.lambda = delta;
  p.WD = delta * Mat::Identity(n, n);
  p.L = std::sqrt(delta) * Mat::Identity(n, n);
  p.L_inv_T = (1.0 / std::sqrt(delta)) * Mat::Identity(n, n);
  p.kind = FactorKind::cholesky;
  p.cond = 1.0;
  p.log_det = static_cast<double>(d) * std::log(delta);
  return p;
}

ScalingPair scaling_check(const TargetModel& target, double c, const CalibrationSample& sample,
                          CalibrationMethod method) {
  if (c == 0.0) throw ConfigError("scaling factor must be nonzero");
  sample.validate();
  if (static_cast<std::size_t>(sample.states.front().size()) != target.dim())
    throw ConfigError("calibration sample does not match the target dimension");
  auto fit = [method](const CalibrationSample& s) {
    switch (method) {
      case CalibrationMethod::gradient_diff: return calibrate_w_gradient_diff(s);
      case CalibrationMethod::energy_diff: return calibrate_w_energy_diff(s);
      default: throw ConfigError("scaling check needs a fitted calibration method");
    }
  };
  CalibrationSample scaled = sample;
  for (auto& s : scaled.states) s *= c;
  for (auto& g : scaled.grads) g /= c;
  return {fit(sample), fit(scaled)};
}

nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(r));
  }
  return rows;
}

Mat matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("matrix must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(r.size()) != cols) throw ConfigError("ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

nlohmann::json to_json(const Preconditioner& p) {
  return {{"W", matrix_to_json(p.W)},
          {"lambda", p.lambda},
          {"L", matrix_to_json(p.L)},
          {"kind", to_string(p.kind)},
          {"cond", p.cond},
          {"log_det", p.log_det}};
}

Preconditioner preconditioner_from_json(const nlohmann::json& j) {
  // Refactoring from (W, λ, kind) reproduces L bit for bit; the stored L is a cross-check.
  Preconditioner p = factorize(matrix_from_json(j.at("W")), j.at("lambda").get<double>(), 100.0,
                               factor_kind_from_string(j.at("kind").get<std::string>()));
  if (j.contains("L")) {
    const Mat L = matrix_from_json(j.at("L"));
    if (L.rows() != p.L.rows() || L.cols() != p.L.cols() ||
        (L - p.L).norm() > 1e-10 * std::max(1.0, p.L.norm()))
      throw ConfigError("stored factor L does not match W + λI");
  }
  return p;
}

}  // namespace pdhams
