#include "pdhams/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pdhams/error.hpp"

namespace pdhams {

namespace {

double mean_of(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc / static_cast<double>(x.size());
}

// Sample variance with m - 1; zero for a single value.
double spread(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size() - 1);
}

std::size_t pow_size(std::size_t K, std::size_t r) {
  std::size_t n = 1;
  for (std::size_t i = 0; i < r; ++i) n *= K;
  return n;
}

}  // namespace

void ChainRecord::push(std::span<const std::uint16_t> idx, double energy, bool acc) {
  draws.insert(draws.end(), idx.begin(), idx.end());
  energies.push_back(energy);
  accepted.push_back(acc ? 1 : 0);
  if (acc) ++accept_count;
}

double tv_distance(const PmfTable& a, const PmfTable& b) {
  if (a.K != b.K || a.coords != b.coords || a.p.size() != b.p.size())
    throw SupportMismatchError("probability tables are over different supports");
  double acc = 0.0;
  for (std::size_t c = 0; c < a.p.size(); ++c) acc += std::abs(a.p[c] - b.p[c]);
  return 0.5 * acc;
}

PmfTable empirical_pmf(const ChainRecord& rec, std::span<const std::size_t> coords, std::size_t K,
                       std::size_t n_draws) {
  if (n_draws == 0 || n_draws > rec.T()) throw ConfigError("empirical pmf needs 1..T draws");
  PmfTable out{{coords.begin(), coords.end()}, K, std::vector<double>(pow_size(K, coords.size()), 0.0)};
  std::vector<std::uint16_t> sub(coords.size());
  for (std::size_t t = 0; t < n_draws; ++t) {
    for (std::size_t j = 0; j < coords.size(); ++j) sub[j] = rec.at(t, coords[j]);
    out.p[out.cell(sub)] += 1.0;
  }
  for (double& x : out.p) x /= static_cast<double>(n_draws);
  return out;
}

double ess_multichain(const std::vector<std::vector<double>>& x) {
  const std::size_t m = x.size();
  if (m < 2) throw ConfigError("ESS needs at least two chains");
  const std::size_t T = x.front().size();
  if (T < 2) throw ConfigError("ESS needs at least two draws per chain");
  std::vector<double> means(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (x[i].size() != T) throw ConfigError("ESS chains differ in length");
    means[i] = mean_of(x[i]);
  }
  const double grand = mean_of(means);
  double within = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (double v : x[i]) within += (v - means[i]) * (v - means[i]);
  within /= static_cast<double>(m) * static_cast<double>(T - 1);
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= static_cast<double>(T) / static_cast<double>(m - 1);
  if (between == 0.0) throw UndefinedEssError("between-chain variance is zero");
  return static_cast<double>(T) * within / between;
}

std::vector<double> acf(std::span<const double> x, std::size_t max_lag) {
  const std::size_t T = x.size();
  if (T <= max_lag) throw ConfigError("ACF needs more draws than the maximum lag");
  const double m = mean_of(x);
  double denom = 0.0;
  for (double v : x) denom += (v - m) * (v - m);
  if (denom == 0.0) throw ZeroVarianceError("ACF of a constant series");
  std::vector<double> out(max_lag + 1);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < T; ++t) acc += (x[t] - m) * (x[t + lag] - m);
    out[lag] = acc / denom;
  }
  return out;
}

EssSummary ess_summary(const std::vector<ChainRecord>& records, const LatticeSpec& lattice, std::size_t n_draws) {
  if (records.empty()) throw ConfigError("no chains to summarize");
  const std::size_t d = records.front().d;
  std::vector<std::vector<double>> series(records.size(), std::vector<double>(n_draws));
  std::vector<double> per_coord;
  EssSummary out;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t c = 0; c < records.size(); ++c)
      for (std::size_t t = 0; t < n_draws; ++t) series[c][t] = lattice.value(records[c].at(t, i));
    try {
      per_coord.push_back(ess_multichain(series));
    } catch (const UndefinedEssError&) {
      ++out.undefined_coords;
    }
  }
  if (per_coord.empty()) {
    out.min = out.median = out.max = std::nan("");
  } else {
    std::sort(per_coord.begin(), per_coord.end());
    const std::size_t n = per_coord.size();
    out.min = per_coord.front();
    out.max = per_coord.back();
    out.median = n % 2 == 1 ? per_coord[n / 2] : 0.5 * (per_coord[n / 2 - 1] + per_coord[n / 2]);
  }
  for (std::size_t c = 0; c < records.size(); ++c)
    std::copy_n(records[c].energies.begin(), n_draws, series[c].begin());
  try {
    out.energy = ess_multichain(series);
  } catch (const UndefinedEssError&) {
    out.energy.reset();
  }
  return out;
}

ExactMoments exact_moments(const TargetModel& target) {
  const std::size_t d = target.dim();
  const auto& lat = target.lattice();
  const std::size_t K = lat.K();
  ExactMoments out{Vec::Zero(static_cast<Eigen::Index>(d)), Vec::Zero(static_cast<Eigen::Index>(d)),
                   Mat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))};
  std::optional<PmfTable> one, two;
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t c[1] = {i};
    if (!one || !target.exchangeable()) one = enumerate_joint(target, c);
    for (std::size_t k = 0; k < K; ++k) {
      const auto ii = static_cast<Eigen::Index>(i);
      out.mean[ii] += one->p[k] * lat.value(k);
      out.second[ii] += one->p[k] * lat.value(k) * lat.value(k);
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const std::size_t c[2] = {i, j};
      if (!two || !target.exchangeable()) two = enumerate_joint(target, c);
      double acc = 0.0;
      for (std::size_t a = 0; a < K; ++a)
        for (std::size_t b = 0; b < K; ++b) acc += two->p[a * K + b] * lat.value(a) * lat.value(b);
      out.cross(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
      out.cross(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = acc;
    }
  return out;
}

MomentReport moment_report(const std::vector<ChainRecord>& records, const LatticeSpec& lattice,
                           const ExactMoments* exact, std::size_t n_draws) {
  if (records.size() < 2) throw ConfigError("moment report needs at least two chains");
  const std::size_t m = records.size();
  const std::size_t d = records.front().d;
  MomentReport out;
  out.has_bias = exact != nullptr;
  std::vector<double> est(m);
  // Squared bias of the across-chain average, and across-chain variance.
  auto accumulate = [&](double truth, double& bias2, double& var) {
    const double avg = mean_of(est);
    if (exact) bias2 += (avg - truth) * (avg - truth);
    var += spread(est);
  };
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<double> sq(m);
    for (std::size_t c = 0; c < m; ++c) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t t = 0; t < n_draws; ++t) {
        const double v = lattice.value(records[c].at(t, i));
        s1 += v;
        s2 += v * v;
      }
      est[c] = s1 / static_cast<double>(n_draws);
      sq[c] = s2 / static_cast<double>(n_draws);
    }
    const auto ii = static_cast<Eigen::Index>(i);
    accumulate(exact ? exact->mean[ii] : 0.0, out.bias2_mean, out.var_mean);
    est = sq;
    accumulate(exact ? exact->second[ii] : 0.0, out.bias2_second, out.var_second);
  }
  out.bias2_mean /= static_cast<double>(d);
  out.var_mean /= static_cast<double>(d);
  out.bias2_second /= static_cast<double>(d);
  out.var_second /= static_cast<double>(d);

  std::size_t pairs = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      for (std::size_t c = 0; c < m; ++c) {
        double acc = 0.0;
        for (std::size_t t = 0; t < n_draws; ++t)
          acc += lattice.value(records[c].at(t, i)) * lattice.value(records[c].at(t, j));
        est[c] = acc / static_cast<double>(n_draws);
      }
      accumulate(exact ? exact->cross(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) : 0.0,
                 out.bias2_cross, out.var_cross);
      ++pairs;
    }
  if (pairs > 0) {
    out.bias2_cross /= static_cast<double>(pairs);
    out.var_cross /= static_cast<double>(pairs);
  }
  return out;
}

std::vector<std::vector<std::size_t>> combinations(std::size_t d, std::size_t r) {
  std::vector<std::vector<std::size_t>> out;
  if (r == 0 || r > d) return out;
  std::vector<std::size_t> c(r);
  for (std::size_t i = 0; i < r; ++i) c[i] = i;
  while (true) {
    out.push_back(c);
    std::size_t pos = r;
    while (pos > 0 && c[pos - 1] == d - r + pos - 1) --pos;
    if (pos == 0) break;
    ++c[pos - 1];
    for (std::size_t j = pos; j < r; ++j) c[j] = c[j - 1] + 1;
  }
  return out;
}

std::vector<TvRow> tv_report(const TargetModel& target, const std::vector<ChainRecord>& records,
                             std::size_t tuple_size, std::span<const std::size_t> checkpoints) {
  const std::size_t m = records.size();
  std::vector<TvRow> out;
  std::optional<PmfTable> exact;
  std::vector<std::uint32_t> counts;
  std::vector<std::size_t> visited;
  std::vector<std::uint16_t> sub(tuple_size);
  for (const auto& coords : combinations(target.dim(), tuple_size)) {
    if (!exact || !target.exchangeable()) exact = enumerate_joint(target, coords);
    counts.assign(exact->p.size(), 0);
    std::vector<std::vector<double>> tv(checkpoints.size(), std::vector<double>(m));
    for (std::size_t c = 0; c < m; ++c) {
      const ChainRecord& rec = records[c];
      std::size_t t = 0;
      for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        const std::size_t n = checkpoints[k];
        for (; t < n; ++t) {
          for (std::size_t j = 0; j < tuple_size; ++j) sub[j] = rec.at(t, coords[j]);
          const std::size_t cell = exact->cell(sub);
          if (counts[cell]++ == 0) visited.push_back(cell);
        }
        // Unvisited cells contribute their exact mass.
        double acc = 0.0, covered = 0.0;
        for (std::size_t cell : visited) {
          const double pe = exact->p[cell];
          acc += std::abs(pe - static_cast<double>(counts[cell]) / static_cast<double>(n));
          covered += pe;
        }
        tv[k][c] = 0.5 * (acc + std::max(0.0, 1.0 - covered));
      }
      for (std::size_t cell : visited) counts[cell] = 0;
      visited.clear();
    }
    for (std::size_t k = 0; k < checkpoints.size(); ++k)
      out.push_back({coords, checkpoints[k], mean_of(tv[k]), std::sqrt(spread(tv[k]))});
  }
  return out;
}

}  // namespace pdhams
