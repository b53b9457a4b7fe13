#include "pdhams/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pdhams/error.hpp"

namespace pdhams {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_coords(const TargetModel& t, std::span<const std::size_t> coords) {
  if (coords.empty()) throw ConfigError("marginal needs at least one coordinate");
  std::vector<std::size_t> sorted(coords.begin(), coords.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("marginal coordinates must be distinct");
  if (sorted.back() >= t.dim()) throw ConfigError("marginal coordinate out of range");
}

std::size_t table_size(std::size_t K, std::size_t r) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < r; ++i) n *= K;
  return n;
}

// Odometer over K^r cells, coords[0] most significant.
bool advance(std::vector<std::uint16_t>& idx, std::size_t K) {
  for (std::size_t pos = idx.size(); pos-- > 0;) {
    if (++idx[pos] < K) return true;
    idx[pos] = 0;
  }
  return false;
}

// Turns log-weights into a normalized table in place.
void normalize_log(std::vector<double>& logw) {
  const double z = log_sum_exp(logw);
  if (!std::isfinite(z)) throw NumericGuardError("marginal normalizer is not finite");
  for (double& x : logw) x = std::exp(x - z);
}

}  // namespace

double log_sum_exp(std::span<const double> x) {
  double m = kNegInf;
  for (double v : x) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

std::size_t PmfTable::cell(std::span<const std::uint16_t> tuple_idx) const {
  std::size_t c = 0;
  for (auto i : tuple_idx) c = c * K + i;
  return c;
}

std::optional<PmfTable> TargetModel::exact_marginal(std::span<const std::size_t>) const {
  return std::nullopt;
}

// ---------------------------------------------------------------- quadratic

QuadraticTarget::QuadraticTarget(LatticeSpec lattice, Mat W_true, Vec b)
    : TargetModel(std::move(lattice)), W_(std::move(W_true)), b_(std::move(b)) {
  const auto d = static_cast<Eigen::Index>(dim());
  if (W_.rows() != d || W_.cols() != d || b_.size() != d)
    throw ConfigError("quadratic target dimensions do not match the lattice");
  if ((W_ - W_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, W_.cwiseAbs().maxCoeff()))
    throw ConfigError("quadratic target matrix must be symmetric");
}

double QuadraticTarget::f(const Vec& s) const { return 0.5 * s.dot(W_ * s) + b_.dot(s); }

Vec QuadraticTarget::grad(const Vec& s) const { return W_ * s + b_; }

nlohmann::json QuadraticTarget::describe() const {
  nlohmann::json W = nlohmann::json::array();
  for (Eigen::Index i = 0; i < W_.rows(); ++i) {
    std::vector<double> row(W_.cols());
    for (Eigen::Index j = 0; j < W_.cols(); ++j) row[j] = W_(i, j);
    W.push_back(row);
  }
  return {{"name", name()},
          {"W", W},
          {"b", std::vector<double>(b_.data(), b_.data() + b_.size())},
          {"values", lattice().values()}};
}

// ---------------------------------------------------------- discrete gaussian

Mat DiscreteGaussian::closed_form_inverse(std::size_t d, double sigma, double rho) {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (!(rho < 1.0) || (d > 1 && !(rho > -1.0 / static_cast<double>(d - 1))))
    throw ConfigError("rho outside the positive-definite range");
  const double dd = static_cast<double>(d);
  const double gamma = rho / (1.0 + (dd - 1.0) * rho);
  const double scale = 1.0 / (sigma * sigma * (1.0 - rho));
  const auto n = static_cast<Eigen::Index>(d);
  Mat inv = Mat::Constant(n, n, -scale * gamma);
  inv.diagonal().array() += scale;
  return inv;
}

DiscreteGaussian::DiscreteGaussian(std::size_t d, int k, double sigma, double rho)
    : QuadraticTarget(LatticeSpec::integer_range(d, -k, k),
                      -closed_form_inverse(d, sigma, rho), Vec::Zero(static_cast<Eigen::Index>(d))),
      k_(k), sigma_(sigma), rho_(rho), sigma_inv_(-W_true()) {
  if (k < 1) throw ConfigError("discrete gaussian needs k >= 1");
}

nlohmann::json DiscreteGaussian::describe() const {
  return {{"name", name()}, {"d", dim()}, {"k", k_}, {"sigma", sigma_}, {"rho", rho_}};
}

std::optional<PmfTable> DiscreteGaussian::exact_marginal(std::span<const std::size_t> coords) const {
  check_coords(*this, coords);
  // f = -c[Σ s² - γ(Σ s)²]; sum out the remaining coordinates through the
  // distribution of their partial sum.
  const double dd = static_cast<double>(dim());
  const double c = 1.0 / (2.0 * sigma_ * sigma_ * (1.0 - rho_));
  const double gamma = rho_ / (1.0 + (dd - 1.0) * rho_);
  const std::size_t r = coords.size();
  const std::size_t n_rest = dim() - r;
  const int k = k_;

  // h[S + n_rest*k] = log Σ_{rest : Σ = S} exp(-c Σ a²)
  std::vector<double> h{0.0};
  for (std::size_t step = 0; step < n_rest; ++step) {
    const int half = static_cast<int>(h.size() / 2);
    std::vector<double> next(h.size() + 2 * static_cast<std::size_t>(k), kNegInf);
    for (int S = -half; S <= half; ++S) {
      const double hs = h[static_cast<std::size_t>(S + half)];
      if (hs == kNegInf) continue;
      for (int a = -k; a <= k; ++a) {
        double& slot = next[static_cast<std::size_t>(S + a + half + k)];
        const double term = hs - c * a * a;
        if (slot == kNegInf) {
          slot = term;
        } else {
          const double m = std::max(slot, term);
          slot = m + std::log1p(std::exp(-std::abs(slot - term)));
        }
      }
    }
    h = std::move(next);
  }
  const int half = static_cast<int>(h.size() / 2);

  PmfTable out{{coords.begin(), coords.end()}, lattice().K(), {}};
  out.p.assign(table_size(out.K, r), 0.0);
  std::vector<std::uint16_t> idx(r, 0);
  std::vector<double> terms(h.size());
  std::size_t cell = 0;
  do {
    int SR = 0;
    double sq = 0.0;
    for (auto i : idx) {
      const int a = static_cast<int>(i) - k;
      SR += a;
      sq += static_cast<double>(a) * a;
    }
    for (int S = -half; S <= half; ++S) {
      const double tot = SR + S;
      terms[static_cast<std::size_t>(S + half)] = h[static_cast<std::size_t>(S + half)] + c * gamma * tot * tot;
    }
    out.p[cell++] = -c * sq + log_sum_exp(terms);
  } while (advance(idx, out.K));
  normalize_log(out.p);
  return out;
}

// ---------------------------------------------------------- quadratic mixture

QuadraticMixture::QuadraticMixture(std::size_t d, int k, std::vector<Vec> means,
                                   std::vector<double> variances)
    : TargetModel(LatticeSpec::integer_range(d, -k, k)),
      k_(k), means_(std::move(means)), variances_(std::move(variances)) {
  if (means_.empty()) throw ConfigError("mixture needs at least one component");
  if (means_.size() != variances_.size()) throw ConfigError("mixture means/variances length mismatch");
  exchangeable_ = true;
  for (std::size_t m = 0; m < means_.size(); ++m) {
    if (static_cast<std::size_t>(means_[m].size()) != d) throw ConfigError("mixture mean has wrong dimension");
    if (!(variances_[m] > 0.0)) throw ConfigError("mixture variances must be positive");
    if ((means_[m].array() != means_[m][0]).any()) exchangeable_ = false;
  }
}

std::unique_ptr<QuadraticMixture> QuadraticMixture::standard(std::size_t d, int k, int M) {
  std::vector<Vec> means;
  std::vector<double> vars;
  for (int m = 1; m <= M; ++m) {
    means.push_back(Vec::Constant(static_cast<Eigen::Index>(d), -5.625 + 1.125 * m));
    vars.push_back(2.10 + 0.15 * std::abs(m - 5));
  }
  return std::make_unique<QuadraticMixture>(d, k, std::move(means), std::move(vars));
}

double QuadraticMixture::f(const Vec& s) const {
  std::vector<double> l(means_.size());
  for (std::size_t m = 0; m < means_.size(); ++m)
    l[m] = -0.5 * (s - means_[m]).squaredNorm() / variances_[m];
  return log_sum_exp(l);
}

Vec QuadraticMixture::grad(const Vec& s) const {
  std::vector<double> l(means_.size());
  for (std::size_t m = 0; m < means_.size(); ++m)
    l[m] = -0.5 * (s - means_[m]).squaredNorm() / variances_[m];
  const double z = log_sum_exp(l);
  Vec g = Vec::Zero(s.size());
  for (std::size_t m = 0; m < means_.size(); ++m)
    g += std::exp(l[m] - z) / variances_[m] * (means_[m] - s);
  return g;
}

nlohmann::json QuadraticMixture::describe() const {
  nlohmann::json means = nlohmann::json::array();
  for (const auto& mu : means_) means.push_back(std::vector<double>(mu.data(), mu.data() + mu.size()));
  return {{"name", name()}, {"d", dim()}, {"k", k_}, {"means", means}, {"variances", variances_}};
}

std::optional<PmfTable> QuadraticMixture::exact_marginal(std::span<const std::size_t> coords) const {
  check_coords(*this, coords);
  const std::size_t M = means_.size();
  const std::size_t K = lattice().K();
  const std::size_t r = coords.size();
  std::vector<bool> requested(dim(), false);
  for (auto c : coords) requested[c] = true;

  // Per-component log mass of the coordinates summed out.
  std::vector<double> rest(M, 0.0);
  std::vector<double> row(K);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 0; j < dim(); ++j) {
      if (requested[j]) continue;
      for (std::size_t a = 0; a < K; ++a) {
        const double diff = lattice().value(a) - means_[m][static_cast<Eigen::Index>(j)];
        row[a] = -0.5 * diff * diff / variances_[m];
      }
      rest[m] += log_sum_exp(row);
    }
  }

  PmfTable out{{coords.begin(), coords.end()}, K, {}};
  out.p.assign(table_size(K, r), 0.0);
  std::vector<std::uint16_t> idx(r, 0);
  std::vector<double> comp(M);
  std::size_t cell = 0;
  do {
    for (std::size_t m = 0; m < M; ++m) {
      double acc = rest[m];
      for (std::size_t pos = 0; pos < r; ++pos) {
        const double diff = lattice().value(idx[pos]) - means_[m][static_cast<Eigen::Index>(coords[pos])];
        acc -= 0.5 * diff * diff / variances_[m];
      }
      comp[m] = acc;
    }
    out.p[cell++] = log_sum_exp(comp);
  } while (advance(idx, K));
  normalize_log(out.p);
  return out;
}

// ---------------------------------------------------------------- clock potts

namespace {

std::vector<double> spin_levels(int q) {
  if (q < 2) throw ConfigError("clock potts needs q >= 2");
  std::vector<double> v(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

}  // namespace

ClockPotts::ClockPotts(std::size_t side, int q, double J)
    : TargetModel(LatticeSpec(side * side, spin_levels(q))), side_(side), q_(q), J_(J) {
  if (side < 2) throw ConfigError("clock potts needs side >= 2");
  const std::size_t n = side * side;
  nbr_.resize(4 * n);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const std::size_t i = r * side + c;
      const std::size_t right = r * side + (c + 1) % side;
      const std::size_t left = r * side + (c + side - 1) % side;
      const std::size_t down = ((r + 1) % side) * side + c;
      const std::size_t up = ((r + side - 1) % side) * side + c;
      edges_.emplace_back(i, right);
      edges_.emplace_back(i, down);
      nbr_[4 * i + 0] = right;
      nbr_[4 * i + 1] = left;
      nbr_[4 * i + 2] = down;
      nbr_[4 * i + 3] = up;
    }
  }
}

double ClockPotts::f(const Vec& s) const {
  const double w = 2.0 * std::numbers::pi / q_;
  double acc = 0.0;
  for (const auto& [i, j] : edges_)
    acc += std::cos(w * (s[static_cast<Eigen::Index>(i)] - s[static_cast<Eigen::Index>(j)]));
  return J_ * acc;
}

Vec ClockPotts::grad(const Vec& s) const {
  const double w = 2.0 * std::numbers::pi / q_;
  Vec g(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    double acc = 0.0;
    for (auto j : neighbors(static_cast<std::size_t>(i)))
      acc += std::sin(w * (s[i] - s[static_cast<Eigen::Index>(j)]));
    g[i] = -J_ * w * acc;
  }
  return g;
}

nlohmann::json ClockPotts::describe() const {
  return {{"name", name()}, {"side", side_}, {"q", q_}, {"J", J_}};
}

// ------------------------------------------------------------------ factories

std::unique_ptr<DiscreteGaussian> discrete_gaussian(std::size_t d, int k, double sigma, double rho) {
  return std::make_unique<DiscreteGaussian>(d, k, sigma, rho);
}

std::unique_ptr<QuadraticMixture> quadratic_mixture(std::size_t d, int k, std::vector<Vec> means,
                                                    std::vector<double> variances) {
  return std::make_unique<QuadraticMixture>(d, k, std::move(means), std::move(variances));
}

std::unique_ptr<ClockPotts> clock_potts(std::size_t side, int q, double J) {
  return std::make_unique<ClockPotts>(side, q, J);
}

// ----------------------------------------------------------------- enumeration

PmfTable enumerate_brute_force(const TargetModel& target, std::span<const std::size_t> coords,
                               double budget) {
  check_coords(target, coords);
  const std::size_t K = target.lattice().K();
  const std::size_t d = target.dim();
  if (std::pow(static_cast<double>(K), static_cast<double>(d)) > budget)
    throw EnumerationBudgetError("full enumeration of K^d states exceeds the budget");

  std::vector<std::uint16_t> idx(d, 0);
  double fmax = kNegInf;
  do {
    fmax = std::max(fmax, target.f(target.lattice().point(idx)));
  } while (advance(idx, K));
  if (!std::isfinite(fmax)) throw NumericGuardError("enumeration found no finite f");

  PmfTable out{{coords.begin(), coords.end()}, K, {}};
  out.p.assign(table_size(K, coords.size()), 0.0);
  std::vector<std::uint16_t> sub(coords.size());
  std::fill(idx.begin(), idx.end(), 0);
  do {
    for (std::size_t pos = 0; pos < coords.size(); ++pos) sub[pos] = idx[coords[pos]];
    out.p[out.cell(sub)] += std::exp(target.f(target.lattice().point(idx)) - fmax);
  } while (advance(idx, K));
  double total = 0.0;
  for (double x : out.p) total += x;
  for (double& x : out.p) x /= total;
  return out;
}

PmfTable enumerate_joint(const TargetModel& target, std::span<const std::size_t> coords,
                         double budget) {
  check_coords(target, coords);
  const double states = std::pow(static_cast<double>(target.lattice().K()),
                                 static_cast<double>(target.dim()));
  if (states <= budget) return enumerate_brute_force(target, coords, budget);
  if (auto structured = target.exact_marginal(coords)) return *std::move(structured);
  throw EnumerationBudgetError("target " + target.name() +
                               " has no exact marginal route within the enumeration budget");
}

}  // namespace pdhams
