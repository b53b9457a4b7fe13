#pragma once

// Experiment harness: JSON configs, calibration orchestration, multi-chain
// runs and the CSV/JSON artifacts they leave behind.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pdhams/diagnostics.hpp"
#include "pdhams/precondition.hpp"
#include "pdhams/samplers.hpp"
#include "pdhams/targets.hpp"
#include "pdhams/tuning.hpp"

namespace pdhams {

// ------------------------------------------------------------------ config

struct CalibrationConfig {
  std::optional<CalibrationMethod> method;  // default: exact for quadratic targets, else gradient_diff
  std::size_t burn_in_draws = 500;
  KernelId burn_in_kernel = KernelId::avg;
  SamplerConfig burn_in_sampler{};
  double cond_threshold = 100.0;
  std::optional<FactorKind> force_kind;
  std::string chains_csv;           // fit W from stored draws instead of a fresh burn-in
  std::string preconditioner_file;  // take W from a calibrate output
};

struct MetricsConfig {
  std::vector<std::size_t> tv_tuple_sizes{1, 2};
  std::vector<std::size_t> checkpoints;  // kept-draw counts; empty means the final count only
  bool moments = true;
  std::size_t acf_max_lag = 0;
};

enum class TuneMode { grid, acceptance };

struct TuningConfig {
  TuneMode mode = TuneMode::grid;
  std::vector<double> deltas;
  std::vector<double> phis{0.0};
  double epsilon = 0.9;
  double beta = 1.0;
  std::size_t probe_chains = 10;
  std::size_t probe_length = 1000;
  std::size_t probe_burn_in = 100;
  double alpha_target = 0.65;
  double a = 0.6;
  int M = 20;
  std::optional<double> delta0;
  bool gate = true;
  std::pair<double, double> window{0.5, 0.9};
};

struct ExperimentConfig {
  nlohmann::json target;
  KernelId kernel = KernelId::vpdhams;
  SamplerConfig sampler{};
  CalibrationConfig calibration{};
  std::size_t chains = 1;
  std::size_t length = 1000;  // steps per chain, burn-in included
  std::size_t burn_in = 0;
  std::uint64_t base_seed = 1;
  std::size_t threads = 1;
  std::string output_dir = "out";
  std::string init = "uniform";  // or "lowest"
  bool write_chains = true;
  bool record_burn_in = false;
  MetricsConfig metrics{};
  TuningConfig tuning{};

  std::size_t kept() const { return length - burn_in; }
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

std::shared_ptr<TargetModel> build_target(const nlohmann::json& spec);

// ------------------------------------------------------------- calibration

struct CalibrationResult {
  Preconditioner pre;
  CalibrationMethod method = CalibrationMethod::none;
  std::size_t sample_size = 0;
};

/// Burn-in sampler → W estimate → λ-shift → factorization at the run's δ.
CalibrationResult calibrate(const ExperimentConfig& cfg, const TargetModel& target);

nlohmann::json to_json(const CalibrationResult& r);

// ------------------------------------------------------------------ running

struct MetricRow {
  std::string metric;
  std::string detail;
  std::size_t n_draws = 0;
  std::optional<double> value;  // empty prints as "undefined"
};

struct MetricsOutput {
  std::vector<MetricRow> rows;
  std::vector<TvRow> tv;
  std::vector<std::string> warnings;
  bool tv_infeasible = false;
};

/// Every metric the run emits, computed from the kept draws alone.
MetricsOutput compute_metrics(const ExperimentConfig& cfg, const TargetModel& target,
                              const std::vector<ChainRecord>& records);

struct RunResult {
  std::vector<ChainRecord> records;
  MetricsOutput metrics;
  CalibrationResult calibration;
  nlohmann::json manifest;
};

RunResult run_experiment(const ExperimentConfig& cfg);

/// The tuned SamplerConfig and its trace.
struct TuneResult {
  SamplerConfig sampler;
  TuneTrace trace;
};

TuneResult tune_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------- io

std::string format_double(double x);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
void write_tv_csv(const std::filesystem::path& path, const std::vector<TvRow>& rows);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// chains.csv rows for one chain. Burn-in rows carry t < 0.
std::string chain_csv_rows(const ChainRecord& rec, const LatticeSpec& lattice, const ChainRecord* burn_in);
std::string chain_csv_header(std::size_t d);

/// Kept draws (t ≥ 0) of every chain in a chains.csv, in chain order.
std::vector<ChainRecord> read_chains_csv(const std::filesystem::path& path, const LatticeSpec& lattice,
                                         bool include_burn_in = false);

/// Recompute metrics.csv and tv.csv for a finished run directory. With
/// check set, compares against the stored files instead of writing.
/// Returns true when the files match (always true without check).
bool recompute_metrics(const std::filesystem::path& dir, bool check, std::vector<std::string>* warnings = nullptr);

}  // namespace pdhams
