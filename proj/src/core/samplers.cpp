#include "pdhams/samplers.hpp"

#include <cmath>
#include <limits>

#include "pdhams/error.hpp"
#include "pdhams/simd.hpp"

namespace pdhams {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vec matvec(const Mat& A, const Vec& x) {
  Vec y(A.rows());
  simd::active().gemv(A.data(), static_cast<std::size_t>(A.rows()), static_cast<std::size_t>(A.cols()),
                      x.data(), y.data());
  return y;
}

// xᵀ A x
double quad(const Mat& A, const Vec& x) {
  const Vec ax = matvec(A, x);
  return simd::active().dot(x.data(), ax.data(), static_cast<std::size_t>(x.size()));
}

bool decide(double log_ratio, double u) {
  if (std::isnan(log_ratio) || log_ratio == std::numeric_limits<double>::infinity())
    throw NumericGuardError("acceptance log-ratio is not finite");
  return log_ratio >= 0.0 || u < std::exp(log_ratio);
}

// -inf + inf guards: an unreachable forward landing is a null event; reject it.
double assemble(double energy_terms, double log_q_bwd, double log_q_fwd) {
  if (log_q_fwd == kNegInf) return kNegInf;
  return energy_terms + log_q_bwd - log_q_fwd;
}

PavgMove pavg_move_impl(const TargetModel& target, const Preconditioner& pre, const ChainState& st,
                        const Vec& z, const ProductCategorical& fwd, std::span<const std::uint16_t> star) {
  PavgMove m;
  m.star_idx.assign(star.begin(), star.end());
  m.s_star = target.lattice().point(star);
  m.f_star = target.f(m.s_star);
  m.grad_star = target.grad(m.s_star);
  const ProductCategorical bwd = build_proposal(m.grad_star, m.s_star, z, pre, target.lattice());
  m.log_q_fwd = fwd.log_prob(star);
  m.log_q_bwd = bwd.log_prob(st.idx);
  const double energy = m.f_star - st.energy - 0.5 * quad(pre.WD, z - m.s_star) + 0.5 * quad(pre.WD, z - st.s);
  m.log_ratio = assemble(energy, m.log_q_bwd, m.log_q_fwd);
  return m;
}

PdhamsMove pdhams_move_impl(const TargetModel& target, const Preconditioner& pre, const SamplerConfig& cfg,
                            bool over_relaxed, const ChainState& st, const Vec& v_half,
                            const ProductCategorical& fwd, std::span<const std::uint16_t> star) {
  PdhamsMove m;
  m.star_idx.assign(star.begin(), star.end());
  m.s_star = target.lattice().point(star);
  m.f_star = target.f(m.s_star);
  m.grad_star = target.grad(m.s_star);

  const Vec step = st.s - m.s_star;
  m.v_star = -v_half + step;
  if (cfg.phi != 0.0) m.v_star += cfg.phi * (m.grad_star - st.grad + matvec(pre.W, step));

  const Vec zb = m.s_star + m.v_star;
  const ProductCategorical bwd = build_proposal(m.grad_star, m.s_star, zb, pre, target.lattice());
  if (!over_relaxed) {
    m.log_q_fwd = fwd.log_prob(star);
    m.log_q_bwd = bwd.log_prob(st.idx);
  } else {
    for (std::size_t i = 0; i < fwd.d; ++i) {
      m.log_q_fwd += over_relax_log_prob(row_cdf(fwd, i), st.idx[i], star[i], cfg.beta);
      m.log_q_bwd += over_relax_log_prob(row_cdf(bwd, i), star[i], st.idx[i], cfg.beta);
    }
  }
  const double energy = m.f_star - st.energy - 0.5 * quad(pre.WD, m.v_star) + 0.5 * quad(pre.WD, v_half);
  m.log_ratio = assemble(energy, m.log_q_bwd, m.log_q_fwd);
  return m;
}

// ------------------------------------------------------------------- kernels

class GitGibbsKernel final : public Kernel {
 public:
  using Kernel::Kernel;

  StepOutcome transition(const ChainState& st, const StepNoise& noise) const override {
    const auto* q = target_->as_quadratic();
    const Vec z = st.s + matvec(pre_.L_inv_T, noise.normals);
    const Vec coef = q->b() + matvec(pre_.WD, z);
    const ProductCategorical dist = proposal_from_coefficients(coef, pre_.lambda, target_->lattice());
    const IndexPoint star = sample_product(dist, noise.uniforms);
    StepOutcome out;
    out.next = make_state(*target_, target_->lattice().point(star));
    out.proposal = out.next.s;
    out.accepted = true;
    out.log_accept_ratio = 0.0;
    return out;
  }
};

class PavgKernel final : public Kernel {
 public:
  using Kernel::Kernel;

  StepOutcome transition(const ChainState& st, const StepNoise& noise) const override {
    const Vec z = st.s + matvec(pre_.L_inv_T, noise.normals);
    const ProductCategorical fwd = build_proposal(st.grad, st.s, z, pre_, target_->lattice());
    const IndexPoint star = sample_product(fwd, noise.uniforms);
    PavgMove m = pavg_move_impl(*target_, pre_, st, z, fwd, star);
    StepOutcome out;
    out.proposal = m.s_star;
    out.log_accept_ratio = m.log_ratio;
    out.accepted = decide(m.log_ratio, noise.accept_u);
    if (out.accepted) {
      out.next = ChainState{std::move(m.s_star), std::move(m.star_idx), m.f_star, std::move(m.grad_star), {}};
    } else {
      out.next = st;
    }
    return out;
  }
};

class PdhamsKernel final : public Kernel {
 public:
  PdhamsKernel(KernelId id, std::shared_ptr<const TargetModel> target, Preconditioner pre, SamplerConfig cfg,
               bool over_relaxed)
      : Kernel(id, std::move(target), std::move(pre), cfg), over_(over_relaxed) {}

  StepOutcome transition(const ChainState& st, const StepNoise& noise) const override {
    if (!st.has_momentum()) throw InvalidStateError("PDHAMS state carries no momentum");
    Vec v_half;
    if (cfg_.epsilon == 1.0) {
      v_half = st.v;
    } else {
      v_half = cfg_.epsilon * st.v +
               std::sqrt(1.0 - cfg_.epsilon * cfg_.epsilon) * matvec(pre_.L_inv_T, noise.normals);
    }
    const Vec z = st.s - v_half;
    const ProductCategorical fwd = build_proposal(st.grad, st.s, z, pre_, target_->lattice());

    IndexPoint star;
    if (!over_) {
      star = sample_product(fwd, noise.uniforms);
    } else {
      star.resize(fwd.d);
      for (std::size_t i = 0; i < fwd.d; ++i)
        star[i] = static_cast<std::uint16_t>(
            over_relax_map(row_cdf(fwd, i), st.idx[i], cfg_.beta, noise.uniforms[2 * i], noise.uniforms[2 * i + 1]));
    }

    PdhamsMove m = pdhams_move_impl(*target_, pre_, cfg_, over_, st, v_half, fwd, star);
    StepOutcome out;
    out.proposal = m.s_star;
    out.log_accept_ratio = m.log_ratio;
    out.accepted = decide(m.log_ratio, noise.accept_u);
    if (out.accepted) {
      out.next = ChainState{std::move(m.s_star), std::move(m.star_idx), m.f_star, std::move(m.grad_star),
                            std::move(m.v_star)};
    } else {
      out.next = st;
      out.next.v = -v_half;
    }
    return out;
  }

 private:
  bool over_;
};

class MetropolisKernel final : public Kernel {
 public:
  using Kernel::Kernel;

  StepOutcome transition(const ChainState& st, const StepNoise& noise) const override {
    const LatticeSpec& lat = target_->lattice();
    const long K = static_cast<long>(lat.K());
    const long r = cfg_.r;
    auto window = [&](long k) {
      const long lo = std::max(0L, k - r);
      const long hi = std::min(K - 1, k + r);
      return std::pair{lo, hi - lo + 1};
    };
    IndexPoint star(st.idx.size());
    double log_q_corr = 0.0;
    for (std::size_t i = 0; i < star.size(); ++i) {
      const auto [lo, n] = window(st.idx[i]);
      long j = lo + static_cast<long>(noise.uniforms[i] * static_cast<double>(n));
      j = std::min(j, lo + n - 1);
      star[i] = static_cast<std::uint16_t>(j);
      log_q_corr += std::log(static_cast<double>(n)) - std::log(static_cast<double>(window(j).second));
    }
    const Vec s_star = lat.point(star);
    const double f_star = target_->f(s_star);
    StepOutcome out;
    out.proposal = s_star;
    out.log_accept_ratio = f_star - st.energy + log_q_corr;
    out.accepted = decide(out.log_accept_ratio, noise.accept_u);
    if (out.accepted) {
      out.next = ChainState{s_star, std::move(star), f_star, target_->grad(s_star), {}};
    } else {
      out.next = st;
    }
    return out;
  }
};

std::shared_ptr<const TargetModel> borrow(const TargetModel& t) {
  return std::shared_ptr<const TargetModel>(&t, [](const TargetModel*) {});
}

}  // namespace

// -------------------------------------------------------------------- naming

std::string to_string(KernelId id) {
  switch (id) {
    case KernelId::git_gibbs: return "git_gibbs";
    case KernelId::pavg: return "pavg";
    case KernelId::vpdhams: return "vpdhams";
    case KernelId::opdhams: return "opdhams";
    case KernelId::metropolis: return "metropolis";
    case KernelId::avg: return "avg";
    case KernelId::vdhams: return "vdhams";
    case KernelId::odhams: return "odhams";
  }
  return "unknown";
}

KernelId kernel_id_from_string(const std::string& s) {
  for (KernelId id : {KernelId::git_gibbs, KernelId::pavg, KernelId::vpdhams, KernelId::opdhams,
                      KernelId::metropolis, KernelId::avg, KernelId::vdhams, KernelId::odhams})
    if (to_string(id) == s) return id;
  throw ConfigError("unknown kernel '" + s + "'");
}

bool is_first_order(KernelId id) {
  return id == KernelId::avg || id == KernelId::vdhams || id == KernelId::odhams;
}

bool is_preconditioned(KernelId id) {
  return id == KernelId::git_gibbs || id == KernelId::pavg || id == KernelId::vpdhams || id == KernelId::opdhams;
}

bool uses_momentum(KernelId id) {
  return id == KernelId::vpdhams || id == KernelId::opdhams || id == KernelId::vdhams || id == KernelId::odhams;
}

void SamplerConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  if (!(phi >= 0.0)) throw ConfigError("phi must be non-negative");
  if (!std::isfinite(beta)) throw ConfigError("beta must be finite");
  if (r < 1) throw ConfigError("metropolis radius must be at least 1");
}

nlohmann::json to_json(const SamplerConfig& c) {
  return {{"epsilon", c.epsilon}, {"delta", c.delta}, {"phi", c.phi}, {"beta", c.beta}, {"r", c.r}};
}

SamplerConfig sampler_config_from_json(const nlohmann::json& j, SamplerConfig c) {
  if (!j.is_object()) throw ConfigError("sampler section must be an object");
  for (const auto& [key, _] : j.items())
    if (key != "epsilon" && key != "delta" && key != "phi" && key != "beta" && key != "r")
      throw ConfigError("unknown sampler field '" + key + "'");
  c.epsilon = j.value("epsilon", c.epsilon);
  c.delta = j.value("delta", c.delta);
  c.phi = j.value("phi", c.phi);
  c.beta = j.value("beta", c.beta);
  c.r = j.value("r", c.r);
  c.validate();
  return c;
}

// --------------------------------------------------------------------- state

ChainState make_state(const TargetModel& target, const Vec& s, Vec v) {
  ChainState st;
  st.s = s;
  st.idx = target.lattice().indices(s);
  st.energy = target.f(s);
  st.grad = target.grad(s);
  st.v = std::move(v);
  return st;
}

Vec momentum_init(const Preconditioner& pre, const Vec& Z) { return matvec(pre.L_inv_T, Z); }

Vec momentum_init(const Preconditioner& pre, Philox& rng) {
  Vec Z(static_cast<Eigen::Index>(pre.dim()));
  for (auto& x : Z) x = rng.normal();
  return momentum_init(pre, Z);
}

// -------------------------------------------------------------------- kernel

Kernel::Kernel(KernelId id, std::shared_ptr<const TargetModel> target, Preconditioner pre, SamplerConfig cfg)
    : id_(id), target_(std::move(target)), pre_(std::move(pre)), cfg_(cfg) {
  cfg_.validate();
  if (pre_.dim() != target_->dim()) throw ConfigError("preconditioner dimension does not match the target");
}

std::size_t Kernel::normals_per_step() const {
  switch (id_) {
    case KernelId::git_gibbs:
    case KernelId::pavg:
    case KernelId::avg: return target_->dim();
    case KernelId::vpdhams:
    case KernelId::opdhams:
    case KernelId::vdhams:
    case KernelId::odhams: return cfg_.epsilon == 1.0 ? 0 : target_->dim();
    case KernelId::metropolis: return 0;
  }
  return 0;
}

std::size_t Kernel::uniforms_per_step() const {
  const bool over = id_ == KernelId::opdhams || id_ == KernelId::odhams;
  return (over ? 2 : 1) * target_->dim();
}

StepNoise Kernel::draw_noise(Philox& rng) const {
  StepNoise n;
  n.normals.resize(static_cast<Eigen::Index>(normals_per_step()));
  for (auto& x : n.normals) x = rng.normal();
  n.uniforms.resize(uniforms_per_step());
  for (auto& u : n.uniforms) u = rng.uniform();
  n.accept_u = rng.uniform();
  return n;
}

ChainState Kernel::initial_state(const Vec& s0, Philox& rng) const {
  ChainState st = make_state(*target_, s0);
  if (uses_momentum(id_)) st.v = momentum_init(pre_, rng);
  return st;
}

std::unique_ptr<Kernel> make_kernel(KernelId id, std::shared_ptr<const TargetModel> target,
                                    const Preconditioner& pre, const SamplerConfig& cfg) {
  cfg.validate();
  const std::size_t d = target->dim();
  switch (id) {
    case KernelId::git_gibbs: {
      const auto* q = target->as_quadratic();
      if (q == nullptr) throw ContractError("the Gibbs kernel needs a quadratic target");
      const double scale = std::max(1.0, q->W_true().cwiseAbs().maxCoeff());
      if (pre.dim() != d || (q->W_true() - pre.W).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw ContractError("the Gibbs kernel needs W equal to the target's quadratic matrix");
      return std::make_unique<GitGibbsKernel>(id, std::move(target), pre, cfg);
    }
    case KernelId::pavg: return std::make_unique<PavgKernel>(id, std::move(target), pre, cfg);
    case KernelId::vpdhams: return std::make_unique<PdhamsKernel>(id, std::move(target), pre, cfg, false);
    case KernelId::opdhams: return std::make_unique<PdhamsKernel>(id, std::move(target), pre, cfg, true);
    case KernelId::avg:
      return std::make_unique<PavgKernel>(id, std::move(target), first_order_preconditioner(d, cfg.delta), cfg);
    case KernelId::vdhams:
      return std::make_unique<PdhamsKernel>(id, std::move(target), first_order_preconditioner(d, cfg.delta), cfg,
                                            false);
    case KernelId::odhams:
      return std::make_unique<PdhamsKernel>(id, std::move(target), first_order_preconditioner(d, cfg.delta), cfg,
                                            true);
    case KernelId::metropolis:
      return std::make_unique<MetropolisKernel>(id, std::move(target), first_order_preconditioner(d, 1.0), cfg);
  }
  throw ConfigError("unknown kernel id");
}

std::unique_ptr<Kernel> first_order_specialize(KernelId id, std::shared_ptr<const TargetModel> target,
                                               const SamplerConfig& cfg) {
  switch (id) {
    case KernelId::pavg: return make_kernel(KernelId::avg, std::move(target), {}, cfg);
    case KernelId::vpdhams: return make_kernel(KernelId::vdhams, std::move(target), {}, cfg);
    case KernelId::opdhams: return make_kernel(KernelId::odhams, std::move(target), {}, cfg);
    default: throw ConfigError("first-order specialization applies to pavg, vpdhams and opdhams");
  }
}

// ------------------------------------------------------------ move evaluation

PavgMove pavg_move(const TargetModel& target, const Preconditioner& pre, const ChainState& st, const Vec& z,
                   std::span<const std::uint16_t> star_idx) {
  const ProductCategorical fwd = build_proposal(st.grad, st.s, z, pre, target.lattice());
  return pavg_move_impl(target, pre, st, z, fwd, star_idx);
}

PdhamsMove pdhams_move(const TargetModel& target, const Preconditioner& pre, const SamplerConfig& cfg,
                       bool over_relaxed, const ChainState& st, const Vec& v_half,
                       std::span<const std::uint16_t> star_idx) {
  const Vec z = st.s - v_half;
  const ProductCategorical fwd = build_proposal(st.grad, st.s, z, pre, target.lattice());
  return pdhams_move_impl(target, pre, cfg, over_relaxed, st, v_half, fwd, star_idx);
}

// ---------------------------------------------------------- step entry points

StepOutcome git_gibbs_step(const ChainState& state, const QuadraticTarget& target, const Preconditioner& pre,
                           Philox& rng) {
  return make_kernel(KernelId::git_gibbs, borrow(target), pre, {})->step(state, rng);
}

StepOutcome pavg_step(const ChainState& state, const TargetModel& target, const Preconditioner& pre,
                      Philox& rng) {
  return make_kernel(KernelId::pavg, borrow(target), pre, {})->step(state, rng);
}

StepOutcome vpdhams_step(const ChainState& state, const TargetModel& target, const Preconditioner& pre,
                         const SamplerConfig& cfg, Philox& rng) {
  return make_kernel(KernelId::vpdhams, borrow(target), pre, cfg)->step(state, rng);
}

StepOutcome opdhams_step(const ChainState& state, const TargetModel& target, const Preconditioner& pre,
                         const SamplerConfig& cfg, Philox& rng) {
  return make_kernel(KernelId::opdhams, borrow(target), pre, cfg)->step(state, rng);
}

StepOutcome metropolis_step(const ChainState& state, const TargetModel& target, int r, Philox& rng) {
  SamplerConfig cfg;
  cfg.r = r;
  return make_kernel(KernelId::metropolis, borrow(target), first_order_preconditioner(target.dim(), 1.0), cfg)
      ->step(state, rng);
}

}  // namespace pdhams
