#include "pdhams/tuning.hpp"

#include <cmath>

#include "pdhams/diagnostics.hpp"
#include "pdhams/error.hpp"
#include "pdhams/parallel.hpp"

namespace pdhams {

nlohmann::json to_json(const TuneTrace& t) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& e : t.ess_table) {
    table.push_back({{"config", to_json(e.config)},
                     {"ess", e.result.ess ? nlohmann::json(*e.result.ess) : nlohmann::json("undefined")},
                     {"acceptance", e.result.acceptance},
                     {"in_window", e.in_window}});
  }
  return {{"deltas", t.deltas}, {"rates", t.rates}, {"chosen", t.chosen}, {"chosen_index", t.chosen_index},
          {"ess_table", table}};
}

TuneTrace target_acceptance(const AcceptanceProbe& probe, double delta0, double alpha_target, double a, int M) {
  if (!(delta0 > 0.0)) throw ConfigError("delta0 must be positive");
  if (!(alpha_target > 0.0 && alpha_target < 1.0)) throw ConfigError("target acceptance must lie in (0, 1)");
  if (!(a > 0.0)) throw ConfigError("decay exponent a must be positive");
  if (M < 1) throw ConfigError("M must be at least 1");
  TuneTrace trace;
  double delta = delta0;
  double best = std::numeric_limits<double>::infinity();
  for (int m = 0; m <= M; ++m) {
    const double rate = probe(delta);
    trace.deltas.push_back(delta);
    trace.rates.push_back(rate);
    const double gap = std::abs(rate - alpha_target);
    if (gap < best) {
      best = gap;
      trace.chosen = delta;
      trace.chosen_index = static_cast<std::size_t>(m);
    }
    const double step = std::exp(std::pow(1.0 + m, -a));
    if (rate < alpha_target) {
      delta *= step;
    } else if (rate > alpha_target) {
      delta /= step;
    }
  }
  return trace;
}

namespace {

// True when candidate x ranks strictly ahead of y; ties resolved by the caller's order.
bool better(const TuneEntry& x, const TuneEntry& y) {
  if (x.in_window != y.in_window) return x.in_window;
  if (x.result.ess.has_value() != y.result.ess.has_value()) return x.result.ess.has_value();
  if (x.result.ess && *x.result.ess != *y.result.ess) return *x.result.ess > *y.result.ess;
  return false;
}

std::size_t pick(const std::vector<TuneEntry>& entries, std::size_t from, double SamplerConfig::*key) {
  std::size_t best = from;
  for (std::size_t i = from + 1; i < entries.size(); ++i) {
    const TuneEntry& c = entries[i];
    const TuneEntry& b = entries[best];
    if (better(c, b) || (!better(b, c) && c.config.*key < b.config.*key)) best = i;
  }
  return best;
}

}  // namespace

GridSearchResult staged_grid_search(const EssProbe& probe, SamplerConfig base, const Grids& grids,
                                    std::optional<std::pair<double, double>> window) {
  if (grids.deltas.empty()) throw ConfigError("empty delta grid");
  if (grids.phis.empty()) throw ConfigError("empty phi grid");
  base.epsilon = grids.epsilon;
  base.beta = grids.beta;
  GridSearchResult out;

  auto evaluate = [&](SamplerConfig cfg) {
    TuneEntry e{cfg, probe(cfg), true};
    if (window) e.in_window = e.result.acceptance >= window->first && e.result.acceptance <= window->second;
    out.trace.ess_table.push_back(e);
  };

  for (double delta : grids.deltas) {
    SamplerConfig c = base;
    c.delta = delta;
    c.phi = 0.0;
    evaluate(c);
  }
  const std::size_t d_best = pick(out.trace.ess_table, 0, &SamplerConfig::delta);
  const double delta = out.trace.ess_table[d_best].config.delta;

  const std::size_t stage3 = out.trace.ess_table.size();
  for (double phi : grids.phis) {
    SamplerConfig c = base;
    c.delta = delta;
    c.phi = phi;
    evaluate(c);
  }
  const std::size_t p_best = pick(out.trace.ess_table, stage3, &SamplerConfig::phi);
  out.chosen = out.trace.ess_table[p_best].config;
  out.trace.chosen = out.chosen.delta;
  out.trace.chosen_index = p_best;
  for (std::size_t i = 0; i < stage3; ++i) {
    out.trace.deltas.push_back(out.trace.ess_table[i].config.delta);
    out.trace.rates.push_back(out.trace.ess_table[i].result.acceptance);
  }
  return out;
}

ProbeResult run_probe(const Kernel& kernel, const ProbeSpec& spec) {
  if (spec.chains < 2 || spec.length < 2) throw ConfigError("probe needs at least two chains of two draws");
  std::vector<std::vector<double>> energies(spec.chains, std::vector<double>(spec.length));
  std::vector<std::size_t> accepts(spec.chains, 0);
  parallel_for(spec.chains, spec.threads, [&](std::size_t c) {
    Philox rng(spec.seed, stream_id(StreamPurpose::tuning, c));
    ChainState st = kernel.initial_state(random_lattice_point(kernel.target().lattice(), rng), rng);
    for (std::size_t t = 0; t < spec.burn_in + spec.length; ++t) {
      StepOutcome o = kernel.step(st, rng);
      st = std::move(o.next);
      if (t >= spec.burn_in) {
        energies[c][t - spec.burn_in] = st.energy;
        accepts[c] += o.accepted ? 1 : 0;
      }
    }
  });
  ProbeResult r;
  std::size_t total = 0;
  for (auto a : accepts) total += a;
  r.acceptance = static_cast<double>(total) / static_cast<double>(spec.chains * spec.length);
  try {
    r.ess = ess_multichain(energies);
  } catch (const UndefinedEssError&) {
    r.ess.reset();
  }
  return r;
}

TuneTrace target_acceptance(const KernelBuilder& build, SamplerConfig base, double delta0, double alpha_target,
                            double a, int M, const ProbeSpec& spec) {
  return target_acceptance(
      [&](double delta) {
        SamplerConfig c = base;
        c.delta = delta;
        return run_probe(*build(c), spec).acceptance;
      },
      delta0, alpha_target, a, M);
}

GridSearchResult staged_grid_search(const KernelBuilder& build, SamplerConfig base, const Grids& grids,
                                    const ProbeSpec& spec, std::optional<std::pair<double, double>> window) {
  return staged_grid_search([&](const SamplerConfig& c) { return run_probe(*build(c), spec); }, base, grids,
                            window);
}

}  // namespace pdhams
