// pdhams: calibrate | tune | run | metrics

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pdhams/error.hpp"
#include "pdhams/harness.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

enum Exit { ok = 0, other = 1, config = 2, numeric = 3, infeasible = 4 };

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chains, length, burn_in, threads;
  std::optional<std::string> out, kernel, sampler_file;
  std::optional<double> epsilon, delta, phi, beta;
  std::optional<int> r;
};

void add_run_flags(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "base seed");
  app->add_option("--chains", o.chains, "number of chains");
  app->add_option("--length", o.length, "steps per chain, burn-in included");
  app->add_option("--burn-in", o.burn_in, "burn-in steps");
  app->add_option("--threads", o.threads, "worker threads");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--kernel", o.kernel, "git_gibbs|pavg|vpdhams|opdhams|metropolis|avg|vdhams|odhams");
  app->add_option("--epsilon", o.epsilon, "auto-regression parameter");
  app->add_option("--delta", o.delta, "stepsize");
  app->add_option("--phi", o.phi, "gradient correction");
  app->add_option("--beta", o.beta, "over-relaxation parameter");
  app->add_option("--r", o.r, "Metropolis window radius");
  app->add_option("--sampler-file", o.sampler_file, "sampler JSON, e.g. a tune output");
}

pdhams::ExperimentConfig resolve(const Overrides& o) {
  json j;
  {
    std::ifstream in(o.config_path);
    try {
      j = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
      throw pdhams::ConfigError(o.config_path + ": " + e.what());
    }
  }
  if (o.seed) j["base_seed"] = *o.seed;
  if (o.chains) j["chains"] = *o.chains;
  if (o.length) j["length"] = *o.length;
  if (o.burn_in) j["burn_in"] = *o.burn_in;
  if (o.threads) j["threads"] = *o.threads;
  if (o.out) j["output_dir"] = *o.out;
  if (o.kernel) j["kernel"] = *o.kernel;
  if (o.sampler_file) {
    json s = pdhams::read_json(*o.sampler_file);
    j["sampler"] = s.contains("sampler") ? s.at("sampler") : s;
  }
  if (!j.contains("sampler")) j["sampler"] = json::object();
  if (o.epsilon) j["sampler"]["epsilon"] = *o.epsilon;
  if (o.delta) j["sampler"]["delta"] = *o.delta;
  if (o.phi) j["sampler"]["phi"] = *o.phi;
  if (o.beta) j["sampler"]["beta"] = *o.beta;
  if (o.r) j["sampler"]["r"] = *o.r;
  return pdhams::config_from_json(j);
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << "\n";
}

int cmd_calibrate(const Overrides& o) {
  const auto cfg = resolve(o);
  const auto target = pdhams::build_target(cfg.target);
  const auto res = pdhams::calibrate(cfg, *target);
  fs::create_directories(cfg.output_dir);
  const fs::path path = fs::path(cfg.output_dir) / "preconditioner.json";
  pdhams::write_json(path, pdhams::to_json(res));
  std::printf("calibrated (%s, n=%zu): lambda=%.6g kind=%s cond=%.4g -> %s\n", pdhams::to_string(res.method).c_str(),
              res.sample_size, res.pre.lambda, pdhams::to_string(res.pre.kind).c_str(), res.pre.cond,
              path.c_str());
  return ok;
}

int cmd_tune(const Overrides& o) {
  const auto cfg = resolve(o);
  const auto res = pdhams::tune_experiment(cfg);
  fs::create_directories(cfg.output_dir);
  const fs::path path = fs::path(cfg.output_dir) / "tune.json";
  pdhams::write_json(path, {{"sampler", pdhams::to_json(res.sampler)}, {"trace", pdhams::to_json(res.trace)}});
  std::printf("tuned %s: epsilon=%g delta=%g phi=%g beta=%g -> %s\n", pdhams::to_string(cfg.kernel).c_str(),
              res.sampler.epsilon, res.sampler.delta, res.sampler.phi, res.sampler.beta, path.c_str());
  return ok;
}

int cmd_run(const Overrides& o) {
  const auto cfg = resolve(o);
  const auto res = pdhams::run_experiment(cfg);
  for (const auto& row : res.metrics.rows) {
    if (row.metric != "acceptance_rate" && row.metric != "ess") continue;
    if (row.metric == "ess" && row.n_draws != cfg.kept()) continue;
    std::printf("%-16s %-16s %s\n", row.metric.c_str(), row.detail.c_str(),
                row.value ? pdhams::format_double(*row.value).c_str() : "undefined");
  }
  print_warnings(res.metrics.warnings);
  std::printf("wrote %s\n", cfg.output_dir.c_str());
  return res.metrics.tv_infeasible ? infeasible : ok;
}

int cmd_metrics(const std::string& dir, bool check) {
  std::vector<std::string> warnings;
  const bool same = pdhams::recompute_metrics(dir, check, &warnings);
  print_warnings(warnings);
  if (check) {
    std::printf("%s\n", same ? "metrics match" : "metrics differ");
    return same ? ok : other;
  }
  std::printf("rewrote metrics in %s\n", dir.c_str());
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preconditioned discrete HAMS samplers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PDHAMS_VERSION);

  Overrides cal_o, tune_o, run_o;
  auto* cal = app.add_subcommand("calibrate", "estimate W and write preconditioner.json");
  add_run_flags(cal, cal_o);
  auto* tune = app.add_subcommand("tune", "tune sampler parameters and write tune.json");
  add_run_flags(tune, tune_o);
  auto* run = app.add_subcommand("run", "run chains and write chains, metrics and manifest");
  add_run_flags(run, run_o);
  std::string metrics_dir;
  bool check = false;
  auto* met = app.add_subcommand("metrics", "recompute metrics from a run directory");
  met->add_option("--dir", metrics_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  met->add_flag("--check", check, "compare with the stored metrics instead of rewriting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : config;
  }

  try {
    if (*cal) return cmd_calibrate(cal_o);
    if (*tune) return cmd_tune(tune_o);
    if (*run) return cmd_run(run_o);
    return cmd_metrics(metrics_dir, check);
  } catch (const pdhams::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config;
  } catch (const pdhams::NumericGuardError& e) {
    std::cerr << "numeric guard: " << e.what() << "\n";
    return numeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return other;
  }
}
