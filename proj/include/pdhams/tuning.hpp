#pragma once

// Stepsize tuning toward a target acceptance rate, and the staged grid
// search over (δ, φ) ranked by the ESS of the energy series.

#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pdhams/samplers.hpp"

namespace pdhams {

struct ProbeResult {
  std::optional<double> ess;  // empty when undefined
  double acceptance = 0.0;
};

struct TuneEntry {
  SamplerConfig config;
  ProbeResult result;
  bool in_window = true;
};

struct TuneTrace {
  std::vector<double> deltas;
  std::vector<double> rates;
  double chosen = 0.0;
  std::size_t chosen_index = 0;
  std::vector<TuneEntry> ess_table;
};

nlohmann::json to_json(const TuneTrace& t);

using AcceptanceProbe = std::function<double(double delta)>;
using EssProbe = std::function<ProbeResult(const SamplerConfig&)>;
using KernelBuilder = std::function<std::unique_ptr<Kernel>(const SamplerConfig&)>;

/// δ_{m+1} = δ_m·exp(±(1+m)^{-a}) for m = 0..M, moving up while the observed
/// rate is below target. Picks the first δ_m minimizing |α_m - target|.
TuneTrace target_acceptance(const AcceptanceProbe& probe, double delta0, double alpha_target, double a = 0.6,
                            int M = 20);

struct Grids {
  std::vector<double> deltas;
  std::vector<double> phis;
  double epsilon = 0.9;
  double beta = 1.0;
};

struct GridSearchResult {
  SamplerConfig chosen;
  TuneTrace trace;
};

/// Stage 1 fixes ε and β; stage 2 picks δ with φ = 0; stage 3 picks φ at
/// that δ. Higher ESS wins; undefined ESS and (when a window is given)
/// out-of-window acceptance rank last; ties go to the smaller δ, then φ.
GridSearchResult staged_grid_search(const EssProbe& probe, SamplerConfig base, const Grids& grids,
                                    std::optional<std::pair<double, double>> acceptance_window = std::nullopt);

struct ProbeSpec {
  std::size_t chains = 10;
  std::size_t length = 1000;  // kept draws per chain
  std::size_t burn_in = 100;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

/// Runs `chains` chains from uniform random starts and reports the
/// post-burn-in acceptance rate and energy ESS.
ProbeResult run_probe(const Kernel& kernel, const ProbeSpec& spec);

TuneTrace target_acceptance(const KernelBuilder& build, SamplerConfig base, double delta0, double alpha_target,
                            double a, int M, const ProbeSpec& spec);

GridSearchResult staged_grid_search(const KernelBuilder& build, SamplerConfig base, const Grids& grids,
                                    const ProbeSpec& spec,
                                    std::optional<std::pair<double, double>> acceptance_window = std::nullopt);

}  // namespace pdhams
