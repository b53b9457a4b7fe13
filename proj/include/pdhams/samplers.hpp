#pragma once

// Transition kernels. Every kernel splits a step into draw_noise (all
// randomness, in a fixed order) and a deterministic transition, so two
// kernels can be driven by the same variates.
//
// Noise order per step: momentum/auxiliary normals, then uniforms per
// coordinate ascending (two per coordinate for over-relaxation: u0 then w̃),
// then the acceptance uniform.

#include <memory>
#include <span>
#include <string>

#include "json.hpp"
#include "pdhams/lattice.hpp"
#include "pdhams/precondition.hpp"
#include "pdhams/proposals.hpp"
#include "pdhams/rng.hpp"
#include "pdhams/targets.hpp"

namespace pdhams {

enum class KernelId { git_gibbs, pavg, vpdhams, opdhams, metropolis, avg, vdhams, odhams };

std::string to_string(KernelId id);
KernelId kernel_id_from_string(const std::string& s);

/// avg, vdhams, odhams: the W = 0 instances of pavg, vpdhams, opdhams.
bool is_first_order(KernelId id);
/// Kernels that read a calibrated W.
bool is_preconditioned(KernelId id);
bool uses_momentum(KernelId id);

struct SamplerConfig {
  double epsilon = 0.9;
  double delta = 1.0;
  double phi = 0.0;
  double beta = 1.0;
  int r = 1;

  void validate() const;
};

nlohmann::json to_json(const SamplerConfig& c);
SamplerConfig sampler_config_from_json(const nlohmann::json& j, SamplerConfig base = {});

struct ChainState {
  Vec s;
  IndexPoint idx;
  double energy = 0.0;
  Vec grad;
  Vec v;  // empty for momentum-free kernels

  bool has_momentum() const { return v.size() > 0; }
};

/// Fills idx, energy and grad for lattice point s.
ChainState make_state(const TargetModel& target, const Vec& s, Vec v = {});

struct StepNoise {
  Vec normals;
  std::vector<double> uniforms;
  double accept_u = 0.0;
};

struct StepOutcome {
  ChainState next;
  bool accepted = false;
  double log_accept_ratio = 0.0;
  Vec proposal;
};

/// v0 = (Lᵀ)⁻¹ Z
Vec momentum_init(const Preconditioner& pre, const Vec& Z);
Vec momentum_init(const Preconditioner& pre, Philox& rng);

class Kernel {
 public:
  Kernel(KernelId id, std::shared_ptr<const TargetModel> target, Preconditioner pre, SamplerConfig cfg);
  virtual ~Kernel() = default;

  KernelId id() const { return id_; }
  const TargetModel& target() const { return *target_; }
  const Preconditioner& preconditioner() const { return pre_; }
  const SamplerConfig& config() const { return cfg_; }

  std::size_t normals_per_step() const;
  std::size_t uniforms_per_step() const;

  StepNoise draw_noise(Philox& rng) const;
  virtual StepOutcome transition(const ChainState& state, const StepNoise& noise) const = 0;
  StepOutcome step(const ChainState& state, Philox& rng) const { return transition(state, draw_noise(rng)); }

  /// State at s0; draws the initial momentum when the kernel carries one.
  ChainState initial_state(const Vec& s0, Philox& rng) const;

 protected:
  KernelId id_;
  std::shared_ptr<const TargetModel> target_;
  Preconditioner pre_;
  SamplerConfig cfg_;
};

/// First-order ids get W = 0, λ = δ regardless of `pre`; metropolis ignores it.
std::unique_ptr<Kernel> make_kernel(KernelId id, std::shared_ptr<const TargetModel> target,
                                    const Preconditioner& pre, const SamplerConfig& cfg);

/// pavg / vpdhams / opdhams with the W = 0 preconditioner at stepsize δ.
std::unique_ptr<Kernel> first_order_specialize(KernelId id, std::shared_ptr<const TargetModel> target,
                                               const SamplerConfig& cfg);

// Deterministic move evaluation, exposed for balance checks.

struct PavgMove {
  IndexPoint star_idx;
  Vec s_star;
  double f_star = 0.0;
  Vec grad_star;
  double log_q_fwd = 0.0;
  double log_q_bwd = 0.0;
  double log_ratio = 0.0;
};

/// PAVG with auxiliary z proposing s* (given by index).
PavgMove pavg_move(const TargetModel& target, const Preconditioner& pre, const ChainState& st,
                   const Vec& z, std::span<const std::uint16_t> star_idx);

struct PdhamsMove {
  IndexPoint star_idx;
  Vec s_star;
  double f_star = 0.0;
  Vec grad_star;
  Vec v_star;
  double log_q_fwd = 0.0;
  double log_q_bwd = 0.0;
  double log_ratio = 0.0;
};

/// One PDHAMS proposal from (s_t, v_{t+1/2}) to s*: the momentum map,
/// the forward/backward proposal log-probabilities and the log acceptance ratio.
PdhamsMove pdhams_move(const TargetModel& target, const Preconditioner& pre, const SamplerConfig& cfg,
                       bool over_relaxed, const ChainState& st, const Vec& v_half,
                       std::span<const std::uint16_t> star_idx);

// Single-step entry points.

StepOutcome git_gibbs_step(const ChainState& state, const QuadraticTarget& target, const Preconditioner& pre,
                           Philox& rng);
StepOutcome pavg_step(const ChainState& state, const TargetModel& target, const Preconditioner& pre,
                      Philox& rng);
StepOutcome vpdhams_step(const ChainState& state, const TargetModel& target, const Preconditioner& pre,
                         const SamplerConfig& cfg, Philox& rng);
StepOutcome opdhams_step(const ChainState& state, const TargetModel& target, const Preconditioner& pre,
                         const SamplerConfig& cfg, Philox& rng);
StepOutcome metropolis_step(const ChainState& state, const TargetModel& target, int r, Philox& rng);

}  // namespace pdhams
