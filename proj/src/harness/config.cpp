#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string_view>

#include "pdhams/error.hpp"
#include "pdhams/harness.hpp"

namespace pdhams {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown " + where + " field '" + key + "'");
  }
}

template <class T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

std::size_t get_count(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

CalibrationConfig calibration_from_json(const json& j) {
  check_keys(j,
             {"method", "burn_in_draws", "burn_in_kernel", "burn_in_sampler", "cond_threshold", "force_kind",
              "chains_csv", "preconditioner_file"},
             "calibration");
  CalibrationConfig c;
  if (j.contains("method")) c.method = calibration_method_from_string(get<std::string>(j, "method", ""));
  c.burn_in_draws = get_count(j, "burn_in_draws", c.burn_in_draws);
  if (j.contains("burn_in_kernel")) c.burn_in_kernel = kernel_id_from_string(get<std::string>(j, "burn_in_kernel", ""));
  if (j.contains("burn_in_sampler")) c.burn_in_sampler = sampler_config_from_json(j.at("burn_in_sampler"));
  c.cond_threshold = get(j, "cond_threshold", c.cond_threshold);
  if (j.contains("force_kind")) c.force_kind = factor_kind_from_string(get<std::string>(j, "force_kind", ""));
  c.chains_csv = get<std::string>(j, "chains_csv", "");
  c.preconditioner_file = get<std::string>(j, "preconditioner_file", "");
  return c;
}

MetricsConfig metrics_from_json(const json& j) {
  check_keys(j, {"tv_tuple_sizes", "checkpoints", "moments", "acf_max_lag"}, "metrics");
  MetricsConfig m;
  m.tv_tuple_sizes = get(j, "tv_tuple_sizes", m.tv_tuple_sizes);
  m.checkpoints = get(j, "checkpoints", m.checkpoints);
  m.moments = get(j, "moments", m.moments);
  m.acf_max_lag = get_count(j, "acf_max_lag", m.acf_max_lag);
  return m;
}

TuningConfig tuning_from_json(const json& j) {
  check_keys(j,
             {"mode", "deltas", "phis", "epsilon", "beta", "probe_chains", "probe_length", "probe_burn_in",
              "alpha_target", "a", "M", "delta0", "gate", "window"},
             "tuning");
  TuningConfig t;
  const std::string mode = get<std::string>(j, "mode", "grid");
  if (mode == "grid") {
    t.mode = TuneMode::grid;
  } else if (mode == "acceptance") {
    t.mode = TuneMode::acceptance;
  } else {
    throw ConfigError("tuning mode must be 'grid' or 'acceptance'");
  }
  t.deltas = get(j, "deltas", t.deltas);
  t.phis = get(j, "phis", t.phis);
  t.epsilon = get(j, "epsilon", t.epsilon);
  t.beta = get(j, "beta", t.beta);
  t.probe_chains = get_count(j, "probe_chains", t.probe_chains);
  t.probe_length = get_count(j, "probe_length", t.probe_length);
  t.probe_burn_in = get_count(j, "probe_burn_in", t.probe_burn_in);
  t.alpha_target = get(j, "alpha_target", t.alpha_target);
  t.a = get(j, "a", t.a);
  t.M = get(j, "M", t.M);
  if (j.contains("delta0")) t.delta0 = get(j, "delta0", 1.0);
  t.gate = get(j, "gate", t.gate);
  if (j.contains("window")) {
    const auto w = get<std::vector<double>>(j, "window", {});
    if (w.size() != 2 || !(w[0] <= w[1])) throw ConfigError("tuning window must be [lo, hi]");
    t.window = {w[0], w[1]};
  }
  return t;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!target.is_object() || !target.contains("name")) throw ConfigError("target must name a distribution");
  if (chains < 1) throw ConfigError("chains must be at least 1");
  if (length < 1) throw ConfigError("length must be at least 1");
  if (burn_in >= length) throw ConfigError("burn_in must be smaller than length");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (init != "uniform" && init != "lowest") throw ConfigError("init must be 'uniform' or 'lowest'");
  sampler.validate();
  calibration.burn_in_sampler.validate();
  if (!(calibration.cond_threshold > 1.0)) throw ConfigError("cond_threshold must exceed 1");
  for (std::size_t c : metrics.checkpoints) {
    if (c < 2 || c > kept()) throw ConfigError("checkpoints must lie in [2, length - burn_in]");
  }
  for (std::size_t r : metrics.tv_tuple_sizes) {
    if (r < 1) throw ConfigError("tv tuple sizes must be positive");
  }
  if (tuning.probe_chains < 2 || tuning.probe_length < 2) throw ConfigError("tuning probes need 2 chains of 2 draws");
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j,
             {"target", "kernel", "sampler", "calibration", "chains", "length", "burn_in", "base_seed", "threads",
              "output_dir", "init", "write_chains", "record_burn_in", "metrics", "tuning"},
             "config");
  ExperimentConfig c;
  if (!j.contains("target")) throw ConfigError("config needs a target");
  c.target = j.at("target");
  if (j.contains("kernel")) c.kernel = kernel_id_from_string(get<std::string>(j, "kernel", ""));
  if (j.contains("sampler")) c.sampler = sampler_config_from_json(j.at("sampler"));
  if (j.contains("calibration")) c.calibration = calibration_from_json(j.at("calibration"));
  c.chains = get_count(j, "chains", c.chains);
  c.length = get_count(j, "length", c.length);
  c.burn_in = get_count(j, "burn_in", c.burn_in);
  c.base_seed = get<std::uint64_t>(j, "base_seed", c.base_seed);
  c.threads = get_count(j, "threads", c.threads);
  c.output_dir = get<std::string>(j, "output_dir", c.output_dir);
  c.init = get<std::string>(j, "init", c.init);
  c.write_chains = get(j, "write_chains", c.write_chains);
  c.record_burn_in = get(j, "record_burn_in", c.record_burn_in);
  if (j.contains("metrics")) c.metrics = metrics_from_json(j.at("metrics"));
  if (j.contains("tuning")) c.tuning = tuning_from_json(j.at("tuning"));
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json cal = {{"burn_in_draws", c.calibration.burn_in_draws},
              {"burn_in_kernel", to_string(c.calibration.burn_in_kernel)},
              {"burn_in_sampler", to_json(c.calibration.burn_in_sampler)},
              {"cond_threshold", c.calibration.cond_threshold}};
  if (c.calibration.method) cal["method"] = to_string(*c.calibration.method);
  if (c.calibration.force_kind) cal["force_kind"] = to_string(*c.calibration.force_kind);
  if (!c.calibration.chains_csv.empty()) cal["chains_csv"] = c.calibration.chains_csv;
  if (!c.calibration.preconditioner_file.empty()) cal["preconditioner_file"] = c.calibration.preconditioner_file;

  json tun = {{"mode", c.tuning.mode == TuneMode::grid ? "grid" : "acceptance"},
              {"deltas", c.tuning.deltas},
              {"phis", c.tuning.phis},
              {"epsilon", c.tuning.epsilon},
              {"beta", c.tuning.beta},
              {"probe_chains", c.tuning.probe_chains},
              {"probe_length", c.tuning.probe_length},
              {"probe_burn_in", c.tuning.probe_burn_in},
              {"alpha_target", c.tuning.alpha_target},
              {"a", c.tuning.a},
              {"M", c.tuning.M},
              {"gate", c.tuning.gate},
              {"window", {c.tuning.window.first, c.tuning.window.second}}};
  if (c.tuning.delta0) tun["delta0"] = *c.tuning.delta0;

  return {{"target", c.target},
          {"kernel", to_string(c.kernel)},
          {"sampler", to_json(c.sampler)},
          {"calibration", cal},
          {"chains", c.chains},
          {"length", c.length},
          {"burn_in", c.burn_in},
          {"base_seed", c.base_seed},
          {"threads", c.threads},
          {"output_dir", c.output_dir},
          {"init", c.init},
          {"write_chains", c.write_chains},
          {"record_burn_in", c.record_burn_in},
          {"metrics",
           {{"tv_tuple_sizes", c.metrics.tv_tuple_sizes},
            {"checkpoints", c.metrics.checkpoints},
            {"moments", c.metrics.moments},
            {"acf_max_lag", c.metrics.acf_max_lag}}},
          {"tuning", tun}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::shared_ptr<TargetModel> build_target(const json& spec) {
  const std::string name = get<std::string>(spec, "name", "");
  if (name == "discrete_gaussian") {
    check_keys(spec, {"name", "d", "k", "sigma", "rho"}, "discrete_gaussian target");
    return discrete_gaussian(get_count(spec, "d", 8), get(spec, "k", 10), get(spec, "sigma", 5.0),
                             get(spec, "rho", 0.9));
  }
  if (name == "quadratic_mixture") {
    check_keys(spec, {"name", "d", "k", "M", "means", "variances"}, "quadratic_mixture target");
    const std::size_t d = get_count(spec, "d", 10);
    const int k = get(spec, "k", 10);
    if (!spec.contains("means")) {
      if (spec.contains("variances")) throw ConfigError("variances given without means");
      return QuadraticMixture::standard(d, k, get(spec, "M", 9));
    }
    std::vector<Vec> means;
    for (const auto& row : spec.at("means")) {
      const auto v = row.get<std::vector<double>>();
      means.push_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    return quadratic_mixture(d, k, std::move(means), get<std::vector<double>>(spec, "variances", {}));
  }
  if (name == "clock_potts") {
    check_keys(spec, {"name", "side", "q", "J"}, "clock_potts target");
    return clock_potts(get_count(spec, "side", 16), get(spec, "q", 4), get(spec, "J", 1.0));
  }
  if (name == "quadratic") {
    check_keys(spec, {"name", "values", "W", "b"}, "quadratic target");
    const Mat W = matrix_from_json(spec.at("W"));
    const std::size_t d = static_cast<std::size_t>(W.rows());
    Vec b = Vec::Zero(W.rows());
    if (spec.contains("b")) {
      const auto bv = get<std::vector<double>>(spec, "b", {});
      if (bv.size() != d) throw ConfigError("b has the wrong length");
      b = Eigen::Map<const Vec>(bv.data(), static_cast<Eigen::Index>(d));
    }
    return std::make_shared<QuadraticTarget>(LatticeSpec(d, get<std::vector<double>>(spec, "values", {})), W, b);
  }
  throw ConfigError("unknown target '" + name + "'");
}

}  // namespace pdhams
