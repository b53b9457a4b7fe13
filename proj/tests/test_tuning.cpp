#include <cmath>
#include <map>

#include "doctest.h"
#include "pdhams/error.hpp"
#include "pdhams/tuning.hpp"

using namespace pdhams;

namespace {

// Replays the multiplicative update from a recorded rate sequence.
std::vector<double> replay(double delta0, const std::vector<double>& rates, double target, double a) {
  std::vector<double> out{delta0};
  for (std::size_t m = 0; m + 1 < rates.size(); ++m) {
    const double step = std::exp(std::pow(1.0 + double(m), -a));
    double next = out.back();
    if (rates[m] < target) next *= step;
    if (rates[m] > target) next /= step;
    out.push_back(next);
  }
  return out;
}

std::shared_ptr<const QuadraticTarget> gaussian() { return discrete_gaussian(3, 4, 3.0, 0.6); }

}  // namespace

TEST_CASE("always-zero acceptance walks delta up") {
  const auto tr = target_acceptance([](double) { return 0.0; }, 0.1, 0.65, 0.6, 20);
  REQUIRE(tr.deltas.size() == 21);
  for (std::size_t m = 0; m + 1 < tr.deltas.size(); ++m) {
    const double expect = std::exp(std::pow(1.0 + double(m), -0.6));
    CHECK(tr.deltas[m + 1] > tr.deltas[m]);
    CHECK(tr.deltas[m + 1] / tr.deltas[m] == doctest::Approx(expect).epsilon(1e-15));
  }
  CHECK(tr.chosen == tr.deltas[0]);
  CHECK(tr.chosen_index == 0);
}

TEST_CASE("always-one acceptance walks delta down") {
  const auto tr = target_acceptance([](double) { return 1.0; }, 2.0, 0.65, 0.8, 10);
  for (std::size_t m = 0; m + 1 < tr.deltas.size(); ++m) {
    CHECK(tr.deltas[m + 1] < tr.deltas[m]);
    CHECK(tr.deltas[m] / tr.deltas[m + 1] == doctest::Approx(std::exp(std::pow(1.0 + double(m), -0.8))).epsilon(1e-15));
  }
}

TEST_CASE("hitting the target exactly holds delta; replay is exact") {
  int calls = 0;
  const auto tr = target_acceptance(
      [&](double d) {
        ++calls;
        return calls == 3 ? 0.65 : (d < 1.0 ? 0.9 : 0.4);
      },
      0.5, 0.65, 0.6, 8);
  CHECK(tr.deltas[3] == tr.deltas[2]);
  CHECK(tr.chosen_index == 2);
  CHECK(tr.chosen == tr.deltas[2]);
  CHECK(replay(0.5, tr.rates, 0.65, 0.6) == tr.deltas);
}

TEST_CASE("target acceptance validates inputs") {
  auto p = [](double) { return 0.5; };
  CHECK_THROWS_AS(target_acceptance(p, 0.0, 0.5), ConfigError);
  CHECK_THROWS_AS(target_acceptance(p, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(target_acceptance(p, 1.0, 0.5, 0.0), ConfigError);
  CHECK_THROWS_AS(target_acceptance(p, 1.0, 0.5, 0.6, 0), ConfigError);
}

TEST_CASE("matched quadratic: every probe accepts, first entry is chosen") {
  auto t = gaussian();
  const auto W = t->W_true();
  KernelBuilder build = [&](const SamplerConfig& c) {
    return make_kernel(KernelId::vpdhams, t, make_preconditioner(W, c.delta), c);
  };
  ProbeSpec spec{4, 200, 20, 3, 1};
  const auto tr = target_acceptance(build, SamplerConfig{}, 0.2, 0.65, 0.6, 5, spec);
  for (double r : tr.rates) CHECK(r == 1.0);
  CHECK(tr.chosen_index == 0);
  CHECK(tr.chosen == 0.2);
}

TEST_CASE("grid search ranking rules") {
  std::map<std::pair<double, double>, ProbeResult> table{
      {{0.1, 0.0}, {5.0, 0.7}}, {{0.2, 0.0}, {9.0, 0.95}}, {{0.3, 0.0}, {9.0, 0.6}}, {{0.4, 0.0}, {std::nullopt, 0.6}},
      {{0.3, 0.5}, {12.0, 0.6}}, {{0.3, 1.0}, {12.0, 0.7}}, {{0.2, 0.5}, {12.0, 0.6}}, {{0.2, 1.0}, {12.0, 0.6}}};
  int calls = 0;
  EssProbe probe = [&](const SamplerConfig& c) {
    ++calls;
    return table.at({c.delta, c.phi});
  };
  Grids grids{{0.4, 0.3, 0.2, 0.1}, {1.0, 0.5, 0.0}, 0.8, 0.4};
  auto r = staged_grid_search(probe, {}, grids);
  // 0.2 and 0.3 tie on ESS; the smaller δ wins. Then φ = 0.5 and 1.0 tie; smaller φ wins.
  CHECK(r.chosen.delta == 0.2);
  CHECK(r.chosen.phi == 0.5);
  CHECK(r.chosen.epsilon == 0.8);
  CHECK(r.chosen.beta == 0.4);
  CHECK(calls == 7);
  CHECK(r.trace.ess_table.size() == 7);
  CHECK(r.trace.deltas == std::vector<double>{0.4, 0.3, 0.2, 0.1});

  // With the window, δ = 0.2 (rate 0.95) drops behind δ = 0.3.
  r = staged_grid_search(probe, {}, grids, std::pair{0.5, 0.9});
  CHECK(r.chosen.delta == 0.3);
  CHECK(r.chosen.phi == 0.5);

  // Undefined ESS ranks last even when alone at the top of the grid.
  Grids undefined_first{{0.4, 0.1}, {0.0}};
  table[{0.1, 0.0}] = {0.5, 0.7};
  CHECK(staged_grid_search(probe, {}, undefined_first).chosen.delta == 0.1);
}

TEST_CASE("grid search edge cases") {
  EssProbe probe = [](const SamplerConfig& c) { return ProbeResult{c.delta, 1.0}; };
  const auto one = staged_grid_search(probe, {}, Grids{{0.07}, {0.3}});
  CHECK(one.chosen.delta == 0.07);
  CHECK(one.chosen.phi == 0.3);
  CHECK_THROWS_AS(staged_grid_search(probe, {}, Grids{{}, {0.0}}), ConfigError);
  CHECK_THROWS_AS(staged_grid_search(probe, {}, Grids{{0.1}, {}}), ConfigError);
}

TEST_CASE("grid search on a quadratic target picks the best probe, reproducibly") {
  auto t = gaussian();
  const auto W = t->W_true();
  KernelBuilder build = [&](const SamplerConfig& c) {
    return make_kernel(KernelId::vpdhams, t, make_preconditioner(W, c.delta), c);
  };
  ProbeSpec spec{6, 400, 50, 11, 2};
  Grids grids{{0.02, 0.05, 0.1, 0.3, 1.0}, {0.0, 0.5}};
  const auto a = staged_grid_search(build, {}, grids, spec);
  const auto b = staged_grid_search(build, {}, grids, spec);
  CHECK(to_json(a.trace) == to_json(b.trace));
  CHECK(to_json(a.chosen) == to_json(b.chosen));

  // Exhaustive re-evaluation of stage 2 with the same probe runs.
  double best = -1;
  double arg = 0;
  for (double d : grids.deltas) {
    SamplerConfig c;
    c.epsilon = grids.epsilon;
    c.delta = d;
    const auto r = run_probe(*build(c), spec);
    CHECK(r.acceptance == 1.0);
    if (r.ess && *r.ess > best) {
      best = *r.ess;
      arg = d;
    }
  }
  CHECK(a.chosen.delta == arg);
  for (std::size_t i = 0; i < 5; ++i) CHECK(a.trace.rates[i] == 1.0);
}

TEST_CASE("probe rejects degenerate specs; trace serializes undefined ESS") {
  auto t = gaussian();
  const auto k = make_kernel(KernelId::pavg, t, make_preconditioner(t->W_true(), 0.2), {});
  CHECK_THROWS_AS(run_probe(*k, ProbeSpec{1, 100, 0, 1, 1}), ConfigError);
  TuneTrace tr;
  tr.ess_table.push_back({SamplerConfig{}, ProbeResult{std::nullopt, 0.3}, false});
  const auto j = to_json(tr);
  CHECK(j["ess_table"][0]["ess"] == "undefined");
  CHECK(j["ess_table"][0]["in_window"] == false);
}
