#include "pdhams/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>

#include "pdhams/error.hpp"
#include "pdhams/simd.hpp"
#include "pdhams/targets.hpp"

namespace pdhams {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Compensated sum; the offsets below are differences of O(1) CDF values and
// must keep full relative precision when they nearly cancel.
double exact_sum(std::initializer_list<double> xs) {
  double s = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    const double t = s + x;
    const double bp = t - s;
    comp += (s - (t - bp)) + (x - bp);
    s = t;
  }
  return s + comp;
}

double clamp_overlap(double a, double b, double c, double d) {
  return std::max(0.0, std::min(std::min(a, b), std::min(c, d)));
}

}  // namespace

double ProductCategorical::log_prob(std::size_t i, std::size_t k) const {
  return std::max(logits[i * K + k] - log_norms[i], kLogProbFloor);
}

double ProductCategorical::log_prob(std::span<const std::uint16_t> idx) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) acc += log_prob(i, idx[i]);
  return acc;
}

std::vector<double> ProductCategorical::row_pmf(std::size_t i) const {
  std::vector<double> p(K);
  for (std::size_t k = 0; k < K; ++k) p[k] = std::exp(log_prob(i, k));
  return p;
}

ProductCategorical proposal_from_coefficients(const Vec& coef, double lambda, const LatticeSpec& lattice) {
  ProductCategorical out;
  out.d = static_cast<std::size_t>(coef.size());
  out.K = lattice.K();
  for (Eigen::Index i = 0; i < coef.size(); ++i)
    if (std::isnan(coef[i]) || std::isinf(coef[i])) throw NumericGuardError("non-finite proposal coefficient");
  std::vector<double> base(out.K);
  for (std::size_t k = 0; k < out.K; ++k) base[k] = -0.5 * lambda * lattice.value(k) * lattice.value(k);
  out.logits.resize(out.d * out.K);
  simd::active().affine_rows(base.data(), lattice.values().data(), coef.data(), out.d, out.K,
                             out.logits.data());
  out.log_norms.resize(out.d);
  for (std::size_t i = 0; i < out.d; ++i) {
    out.log_norms[i] = log_sum_exp(out.row_logits(i));
    if (!std::isfinite(out.log_norms[i])) throw NumericGuardError("non-finite proposal normalizer");
  }
  return out;
}

ProductCategorical build_proposal(const Vec& grad, const Vec& s_ref, const Vec& z,
                                  const Preconditioner& pre, const LatticeSpec& lattice) {
  const std::size_t d = pre.dim();
  if (static_cast<std::size_t>(grad.size()) != d || static_cast<std::size_t>(s_ref.size()) != d ||
      static_cast<std::size_t>(z.size()) != d || lattice.dim() != d)
    throw ConfigError("proposal inputs have inconsistent dimensions");
  const auto& ks = simd::active();
  Vec ws(grad.size()), wdz(grad.size());
  ks.gemv(pre.W.data(), d, d, s_ref.data(), ws.data());
  ks.gemv(pre.WD.data(), d, d, z.data(), wdz.data());
  const Vec coef = grad - ws + wdz;
  return proposal_from_coefficients(coef, pre.lambda, lattice);
}

std::size_t sample_row(std::span<const double> pmf, double u) {
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    if (pmf[k] > 0.0) last = k;
    acc += pmf[k];
    if (u < acc) return k;
  }
  return last;
}

IndexPoint sample_product(const ProductCategorical& dist, std::span<const double> uniforms) {
  if (uniforms.size() < dist.d) throw ConfigError("need one uniform per coordinate");
  IndexPoint out(dist.d);
  for (std::size_t i = 0; i < dist.d; ++i)
    out[i] = static_cast<std::uint16_t>(sample_row(dist.row_pmf(i), uniforms[i]));
  return out;
}

IndexPoint sample_product(const ProductCategorical& dist, Philox& rng) {
  std::vector<double> u(dist.d);
  for (auto& x : u) x = rng.uniform();
  return sample_product(dist, u);
}

RowCdf::RowCdf(std::vector<double> pmf) : p(std::move(pmf)), lower(p.size(), 0.0) {
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!(p[k] >= 0.0)) throw InvalidStateError("row pmf has a negative or NaN entry");
    lower[k] = acc;
    acc += p[k];
  }
}

RowCdf row_cdf(const ProductCategorical& dist, std::size_t i) { return RowCdf(dist.row_pmf(i)); }

std::size_t over_relax_map(const RowCdf& row, std::size_t x0, double beta, double u0, double u_tilde) {
  if (x0 >= row.K() || !(row.p[x0] > 0.0)) throw InvalidStateError("over-relaxation from a zero-mass level");
  if (row.K() == 1) return 0;
  const double w0 = row.lower[x0] + row.p[x0] * u0;
  double w1 = -w0 + beta * u_tilde;
  w1 -= std::floor(w1);
  if (w1 >= 1.0) w1 = std::nextafter(1.0, 0.0);
  std::size_t last = 0;
  for (std::size_t k = 0; k < row.K(); ++k) {
    if (row.p[k] > 0.0) last = k;
    if (w1 < row.upper(k)) return k;
  }
  return last;
}

double over_relax_log_prob(const RowCdf& row, std::size_t x0, std::size_t x1, double beta) {
  if (x0 >= row.K() || x1 >= row.K()) throw InvalidStateError("over-relaxation level out of range");
  const double p0 = row.p[x0];
  if (!(p0 > 0.0)) throw InvalidStateError("over-relaxation from a zero-mass level");
  if (row.K() == 1) return 0.0;
  const double p1 = row.p[x1];
  if (!(p1 > 0.0)) return kNegInf;
  const double A0 = row.lower[x0];
  const double A1 = row.lower[x1];

  if (beta == 0.0) {
    // w1 = -w0 mod 1: x1's interval pulls back to (n - A1 - p1, n - A1].
    double acc = 0.0;
    for (int n = -1; n <= 3; ++n) {
      const double dn = n;
      acc += clamp_overlap(p0, p1, exact_sum({A0, p0, -dn, A1, p1}), exact_sum({dn, -A1, -A0}));
    }
    return acc > 0.0 ? std::log(acc / p0) : kNegInf;
  }

  // y = β w̃ is uniform on [lo, hi). For w0 = A0 + τ the landing set in y is
  // ∪_n [A1 + n + w0, A1 + n + w0 + p1); its overlap with [lo, hi) is a
  // trapezoid in τ, so integrating over τ ∈ [0, p0] is exact piecewise.
  const double lo = std::min(0.0, beta);
  const double hi = std::max(0.0, beta);
  const double h = hi - lo;
  struct Shift {
    double E;  // A1 + A0 + n - lo
    double F;  // hi - (A1 + A0 + n)
  };
  std::vector<Shift> shifts;
  std::vector<double> knots{0.0, p0};
  const int n_lo = static_cast<int>(std::floor(lo)) - 3;
  const int n_hi = static_cast<int>(std::ceil(hi)) + 2;
  for (int n = n_lo; n <= n_hi; ++n) {
    const double dn = n;
    const Shift s{exact_sum({A1, A0, dn, -lo}), exact_sum({hi, -A1, -A0, -dn})};
    if (!(s.F > 0.0) || !(s.E + p1 + p0 > 0.0)) continue;
    shifts.push_back(s);
    for (double t : {s.F, -s.E, s.F - p1, -s.E - p1})
      if (t > 0.0 && t < p0) knots.push_back(t);
  }
  if (shifts.empty()) return kNegInf;
  std::sort(knots.begin(), knots.end());

  auto g = [&](double tau) {
    double acc = 0.0;
    for (const auto& s : shifts) acc += clamp_overlap(h, p1, s.F - tau, s.E + p1 + tau);
    return acc;
  };
  double integral = 0.0;
  double g_prev = g(knots.front());
  for (std::size_t j = 1; j < knots.size(); ++j) {
    const double g_next = g(knots[j]);
    integral += 0.5 * (knots[j] - knots[j - 1]) * (g_prev + g_next);
    g_prev = g_next;
  }
  const double prob = integral / (h * p0);
  return prob > 0.0 ? std::log(prob) : kNegInf;
}

OverRelaxDraw over_relax(std::size_t x0, const RowCdf& row, double beta, double u0, double u_tilde) {
  const std::size_t x1 = over_relax_map(row, x0, beta, u0, u_tilde);
  return {x1, over_relax_log_prob(row, x0, x1, beta)};
}

OverRelaxDraw over_relax(std::size_t x0, std::span<const double> row_pmf, double beta, Philox& rng) {
  const RowCdf row(std::vector<double>(row_pmf.begin(), row_pmf.end()));
  const double u0 = rng.uniform();
  const double ut = rng.uniform();
  return over_relax(x0, row, beta, u0, ut);
}

}  // namespace pdhams
