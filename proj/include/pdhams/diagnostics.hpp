#pragma once

// Evaluation metrics over completed multi-chain runs.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdhams/lattice.hpp"
#include "pdhams/targets.hpp"

namespace pdhams {

struct ChainRecord {
  std::size_t chain = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string kernel_id;
  nlohmann::json config;

  std::size_t d = 0;
  std::vector<std::uint16_t> draws;   // T x d lattice indices, row-major
  std::vector<double> energies;       // f at each draw
  std::vector<std::uint8_t> accepted;
  std::size_t accept_count = 0;

  std::size_t T() const { return energies.size(); }
  std::uint16_t at(std::size_t t, std::size_t i) const { return draws[t * d + i]; }
  std::span<const std::uint16_t> row(std::size_t t) const { return {&draws[t * d], d}; }

  void push(std::span<const std::uint16_t> idx, double energy, bool acc);
};

/// ½ Σ |π - π̂| over a shared support.
double tv_distance(const PmfTable& a, const PmfTable& b);

/// Frequencies of the coordinate tuple over the first n_draws draws.
PmfTable empirical_pmf(const ChainRecord& rec, std::span<const std::size_t> coords, std::size_t K,
                       std::size_t n_draws);

/// T·W/B over m chains (rows) of equal length T.
double ess_multichain(const std::vector<std::vector<double>>& x);

/// Biased autocorrelation ρ̂(0..max_lag).
std::vector<double> acf(std::span<const double> x, std::size_t max_lag);

struct EssSummary {
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
  std::optional<double> energy;
  std::size_t undefined_coords = 0;
};

/// Per-coordinate ESS (min/median/max) and the ESS of f over the first n_draws.
EssSummary ess_summary(const std::vector<ChainRecord>& records, const LatticeSpec& lattice, std::size_t n_draws);

struct ExactMoments {
  Vec mean;    // E[s_i]
  Vec second;  // E[s_i²]
  Mat cross;   // E[s_i s_j], i < j used
};

/// From exact one- and two-coordinate marginals.
ExactMoments exact_moments(const TargetModel& target);

struct MomentReport {
  bool has_bias = false;
  double bias2_mean = 0.0, var_mean = 0.0;
  double bias2_second = 0.0, var_second = 0.0;
  double bias2_cross = 0.0, var_cross = 0.0;
};

/// Squared bias of the across-chain average and across-chain variance of the
/// per-chain estimates, averaged over coordinates (pairs for the cross term).
MomentReport moment_report(const std::vector<ChainRecord>& records, const LatticeSpec& lattice,
                           const ExactMoments* exact, std::size_t n_draws);

struct TvRow {
  std::vector<std::size_t> coords;
  std::size_t n_draws = 0;
  double mean = 0.0;
  double sd = 0.0;
};

/// TV between each chain's empirical tuple pmf and the exact one, for every
/// tuple of the given size and every checkpoint; mean and sd across chains.
std::vector<TvRow> tv_report(const TargetModel& target, const std::vector<ChainRecord>& records,
                             std::size_t tuple_size, std::span<const std::size_t> checkpoints);

/// All size-r subsets of {0..d-1} in lexicographic order.
std::vector<std::vector<std::size_t>> combinations(std::size_t d, std::size_t r);

}  // namespace pdhams
