#include <algorithm>
#include <cmath>
#include <fstream>

#include "pdhams/error.hpp"
#include "pdhams/harness.hpp"
#include "pdhams/parallel.hpp"
#include "pdhams/simd.hpp"

namespace pdhams {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<const TargetModel> borrow(const TargetModel& t) {
  return std::shared_ptr<const TargetModel>(std::shared_ptr<void>(), &t);
}

bool needs_w(KernelId id) { return is_preconditioned(id); }

CalibrationSample burn_in_sample(const ExperimentConfig& cfg, const TargetModel& target) {
  const auto& cc = cfg.calibration;
  CalibrationSample sample;
  auto add = [&](const Vec& s) {
    sample.states.push_back(s);
    sample.grads.push_back(target.grad(s));
    sample.energies.push_back(target.f(s));
  };
  if (!cc.chains_csv.empty()) {
    const auto recs = read_chains_csv(cc.chains_csv, target.lattice(), true);
    if (recs.empty()) throw CalibrationError("calibration chains file has no draws");
    const ChainRecord& r = recs.front();
    const std::size_t n = std::min(r.T(), cc.burn_in_draws);
    for (std::size_t t = 0; t < n; ++t) add(target.lattice().point(r.row(t)));
    return sample;
  }
  // The burn-in sampler always runs with W = 0, whatever kernel it is.
  const auto kernel = make_kernel(cc.burn_in_kernel, borrow(target),
                                  first_order_preconditioner(target.dim(), cc.burn_in_sampler.delta),
                                  cc.burn_in_sampler);
  Philox rng(cfg.base_seed, stream_id(StreamPurpose::calibration, 0));
  ChainState st = kernel->initial_state(random_lattice_point(target.lattice(), rng), rng);
  for (std::size_t t = 0; t < cc.burn_in_draws; ++t) {
    st = kernel->step(st, rng).next;
    add(st.s);
  }
  return sample;
}

std::string kernel_label(KernelId id) {
  switch (id) {
    case KernelId::avg: return "avg (pavg with W = 0)";
    case KernelId::vdhams: return "vdhams (vpdhams with W = 0)";
    case KernelId::odhams: return "odhams (opdhams with W = 0)";
    default: return to_string(id);
  }
}

std::optional<double> defined(double x) {
  if (std::isnan(x)) return std::nullopt;
  return x;
}

}  // namespace

CalibrationResult calibrate(const ExperimentConfig& cfg, const TargetModel& target) {
  const auto& cc = cfg.calibration;
  const std::size_t d = target.dim();
  CalibrationResult out;
  if (!needs_w(cfg.kernel)) {
    out.pre = first_order_preconditioner(d, cfg.sampler.delta);
    out.method = CalibrationMethod::none;
    return out;
  }
  Mat W;
  if (!cc.preconditioner_file.empty()) {
    const auto j = read_json(cc.preconditioner_file);
    W = matrix_from_json(j.at("W"));
    if (static_cast<std::size_t>(W.rows()) != d || W.cols() != W.rows())
      throw ConfigError("preconditioner file has the wrong dimension");
    out.method = j.contains("method") ? calibration_method_from_string(j.at("method").get<std::string>())
                                      : CalibrationMethod::none;
    out.sample_size = j.value("sample_size", std::size_t{0});
  } else {
    out.method = cc.method.value_or(target.as_quadratic() ? CalibrationMethod::exact_quadratic
                                                          : CalibrationMethod::gradient_diff);
    switch (out.method) {
      case CalibrationMethod::exact_quadratic: {
        const QuadraticTarget* q = target.as_quadratic();
        if (!q) throw ConfigError("exact_quadratic calibration needs a quadratic target");
        W = q->W_true();
        break;
      }
      case CalibrationMethod::none:
        W = Mat::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        break;
      case CalibrationMethod::gradient_diff:
      case CalibrationMethod::energy_diff: {
        const CalibrationSample sample = burn_in_sample(cfg, target);
        out.sample_size = sample.size();
        W = out.method == CalibrationMethod::gradient_diff ? calibrate_w_gradient_diff(sample)
                                                           : calibrate_w_energy_diff(sample);
        break;
      }
    }
  }
  out.pre = make_preconditioner(W, cfg.sampler.delta, cc.cond_threshold, cc.force_kind);
  return out;
}

nlohmann::json to_json(const CalibrationResult& r) {
  nlohmann::json j = to_json(r.pre);
  j["method"] = to_string(r.method);
  j["sample_size"] = r.sample_size;
  return j;
}

MetricsOutput compute_metrics(const ExperimentConfig& cfg, const TargetModel& target,
                              const std::vector<ChainRecord>& records) {
  MetricsOutput out;
  const LatticeSpec& lattice = target.lattice();
  const std::size_t n = cfg.kept();
  std::vector<std::size_t> checkpoints = cfg.metrics.checkpoints;
  if (checkpoints.empty()) checkpoints.push_back(n);
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());

  // acceptance
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (const auto& r : records) {
    std::size_t acc = 0;
    for (auto a : r.accepted) acc += a;
    const double rate = static_cast<double>(acc) / static_cast<double>(r.T());
    lo = std::min(lo, rate);
    hi = std::max(hi, rate);
    sum += rate;
  }
  out.rows.push_back({"acceptance_rate", "mean", n, sum / static_cast<double>(records.size())});
  out.rows.push_back({"acceptance_rate", "min", n, lo});
  out.rows.push_back({"acceptance_rate", "max", n, hi});

  // ess
  if (records.size() < 2) {
    out.warnings.push_back("ESS and moment metrics need at least two chains; omitted");
  } else {
    for (std::size_t cp : checkpoints) {
      const EssSummary e = ess_summary(records, lattice, cp);
      out.rows.push_back({"ess", "min", cp, defined(e.min)});
      out.rows.push_back({"ess", "median", cp, defined(e.median)});
      out.rows.push_back({"ess", "max", cp, defined(e.max)});
      out.rows.push_back({"ess", "energy", cp, e.energy});
      if (e.undefined_coords > 0) out.rows.push_back({"ess", "undefined_coords", cp, double(e.undefined_coords)});
    }
  }

  // tv
  for (std::size_t r : cfg.metrics.tv_tuple_sizes) {
    if (r > target.dim()) throw ConfigError("tv tuple size exceeds the dimension");
    std::vector<TvRow> rows;
    try {
      rows = tv_report(target, records, r, checkpoints);
    } catch (const EnumerationBudgetError& e) {
      out.tv_infeasible = true;
      out.warnings.push_back("TV for " + std::to_string(r) + "-tuples omitted: " + e.what());
      continue;
    }
    for (std::size_t cp : checkpoints) {
      double mean = 0.0, sd = 0.0;
      std::size_t count = 0;
      for (const auto& row : rows) {
        if (row.n_draws != cp) continue;
        mean += row.mean;
        sd += row.sd;
        ++count;
      }
      const std::string detail = "dim=" + std::to_string(r);
      out.rows.push_back({"tv_mean", detail, cp, mean / static_cast<double>(count)});
      out.rows.push_back({"tv_sd", detail, cp, sd / static_cast<double>(count)});
    }
    out.tv.insert(out.tv.end(), rows.begin(), rows.end());
  }

  // moments
  if (cfg.metrics.moments && records.size() >= 2) {
    std::optional<ExactMoments> exact;
    try {
      exact = exact_moments(target);
    } catch (const EnumerationBudgetError&) {
      out.warnings.push_back("exact moments not enumerable; bias omitted");
    }
    const MomentReport m = moment_report(records, lattice, exact ? &*exact : nullptr, n);
    if (m.has_bias) {
      out.rows.push_back({"bias2", "E[s_i]", n, m.bias2_mean});
      out.rows.push_back({"bias2", "E[s_i^2]", n, m.bias2_second});
      if (target.dim() > 1) out.rows.push_back({"bias2", "E[s_i*s_j]", n, m.bias2_cross});
    }
    out.rows.push_back({"variance", "E[s_i]", n, m.var_mean});
    out.rows.push_back({"variance", "E[s_i^2]", n, m.var_second});
    if (target.dim() > 1) out.rows.push_back({"variance", "E[s_i*s_j]", n, m.var_cross});
  }

  // energy autocorrelation, averaged over chains with a non-constant trace
  if (cfg.metrics.acf_max_lag > 0) {
    const std::size_t L = std::min(cfg.metrics.acf_max_lag, n - 1);
    std::vector<double> avg(L + 1, 0.0);
    std::size_t used = 0;
    for (const auto& r : records) {
      try {
        const auto rho = acf(r.energies, L);
        for (std::size_t k = 0; k <= L; ++k) avg[k] += rho[k];
        ++used;
      } catch (const ZeroVarianceError&) {
      }
    }
    if (used == 0) {
      out.warnings.push_back("energy trace constant in every chain; ACF omitted");
    } else {
      for (std::size_t k = 0; k <= L; ++k)
        out.rows.push_back({"acf_energy", "lag=" + std::to_string(k), n, avg[k] / static_cast<double>(used)});
    }
  }
  return out;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto target = build_target(cfg.target);
  const LatticeSpec& lattice = target->lattice();
  const std::size_t d = target->dim();

  RunResult res;
  res.calibration = calibrate(cfg, *target);
  const auto kernel = make_kernel(cfg.kernel, target, res.calibration.pre, cfg.sampler);

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  res.records.resize(cfg.chains);
  parallel_for(cfg.chains, cfg.threads, [&](std::size_t c) {
    ChainRecord& rec = res.records[c];
    rec.chain = c;
    rec.seed = cfg.base_seed;
    rec.stream = stream_id(StreamPurpose::chain, c);
    rec.kernel_id = to_string(cfg.kernel);
    rec.config = to_json(cfg.sampler);
    rec.d = d;
    rec.draws.reserve(cfg.kept() * d);
    rec.energies.reserve(cfg.kept());
    rec.accepted.reserve(cfg.kept());
    ChainRecord burn;
    burn.d = d;

    Philox rng(cfg.base_seed, rec.stream);
    Philox init(cfg.base_seed, stream_id(StreamPurpose::init, c));
    const Vec s0 = cfg.init == "uniform" ? random_lattice_point(lattice, init)
                                         : Vec::Constant(static_cast<Eigen::Index>(d), lattice.value(0));
    ChainState st = kernel->initial_state(s0, init);
    for (std::size_t t = 0; t < cfg.length; ++t) {
      StepOutcome o = kernel->step(st, rng);
      st = std::move(o.next);
      if (t >= cfg.burn_in) {
        rec.push(st.idx, st.energy, o.accepted);
      } else if (cfg.record_burn_in) {
        burn.push(st.idx, st.energy, o.accepted);
      }
    }
    if (cfg.write_chains) {
      std::ofstream part(dir / ("chains.part" + std::to_string(c)), std::ios::binary);
      part << chain_csv_rows(rec, lattice, cfg.record_burn_in ? &burn : nullptr);
      if (!part) throw Error("cannot write chain part file");
    }
  });

  if (cfg.write_chains) {
    std::ofstream merged(dir / "chains.csv", std::ios::binary);
    merged << chain_csv_header(d);
    for (std::size_t c = 0; c < cfg.chains; ++c) {
      const fs::path part = dir / ("chains.part" + std::to_string(c));
      {
        std::ifstream in(part, std::ios::binary);
        merged << in.rdbuf();
      }
      fs::remove(part);
    }
    if (!merged) throw Error("cannot write chains.csv");
  }

  res.metrics = compute_metrics(cfg, *target, res.records);
  write_metrics_csv(dir / "metrics.csv", res.metrics.rows);
  write_tv_csv(dir / "tv.csv", res.metrics.tv);

  nlohmann::json streams = nlohmann::json::array();
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    streams.push_back({{"chain", c},
                       {"chain_stream", stream_id(StreamPurpose::chain, c)},
                       {"init_stream", stream_id(StreamPurpose::init, c)}});
  }
  res.manifest = {{"version", PDHAMS_VERSION},
                  {"isa", std::string(simd::to_string(simd::active().isa))},
                  {"config", to_json(cfg)},
                  {"target", target->describe()},
                  {"kernel_label", kernel_label(cfg.kernel)},
                  {"preconditioner", to_json(res.calibration)},
                  {"seeds",
                   {{"base_seed", cfg.base_seed},
                    {"calibration_stream", stream_id(StreamPurpose::calibration, 0)},
                    {"chains", streams}}},
                  {"warnings", res.metrics.warnings},
                  {"tv_infeasible", res.metrics.tv_infeasible}};
  write_json(dir / "manifest.json", res.manifest);
  return res;
}

TuneResult tune_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.kernel == KernelId::metropolis) throw ConfigError("tuning covers the gradient kernels only");
  const auto target = build_target(cfg.target);
  const CalibrationResult cal = calibrate(cfg, *target);
  const Mat W = cal.pre.W;
  const auto& cc = cfg.calibration;
  const KernelBuilder build = [&](const SamplerConfig& c) {
    return make_kernel(cfg.kernel, target, make_preconditioner(W, c.delta, cc.cond_threshold, cc.force_kind), c);
  };
  const auto& tc = cfg.tuning;
  const ProbeSpec spec{tc.probe_chains, tc.probe_length, tc.probe_burn_in, cfg.base_seed, cfg.threads};
  TuneResult out;
  if (tc.mode == TuneMode::acceptance) {
    out.trace = target_acceptance(build, cfg.sampler, tc.delta0.value_or(cfg.sampler.delta), tc.alpha_target, tc.a,
                                  tc.M, spec);
    out.sampler = cfg.sampler;
    out.sampler.delta = out.trace.chosen;
    return out;
  }
  std::optional<std::pair<double, double>> window;
  if (tc.gate && !target->as_quadratic()) window = tc.window;
  GridSearchResult g = staged_grid_search(build, cfg.sampler, Grids{tc.deltas, tc.phis, tc.epsilon, tc.beta}, spec,
                                          window);
  out.sampler = g.chosen;
  out.trace = std::move(g.trace);
  return out;
}

}  // namespace pdhams
