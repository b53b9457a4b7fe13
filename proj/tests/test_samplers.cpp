#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pdhams/error.hpp"
#include "pdhams/samplers.hpp"

using namespace pdhams;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class T>
std::shared_ptr<const TargetModel> share(std::unique_ptr<T> p) {
  return std::shared_ptr<const TargetModel>(std::move(p));
}

Mat wiggly_w() {
  Mat W(2, 2);
  W << -0.5, 0.3, 0.3, -0.8;
  return W;
}

std::shared_ptr<const QuadraticTarget> small_quadratic(std::size_t d, int k, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> N;
  Mat A(d, d);
  for (auto& x : A.reshaped()) x = N(g);
  Mat W = -(A * A.transpose() / double(d) + 0.2 * Mat::Identity(d, d));
  Vec b(d);
  for (auto& x : b) x = 0.3 * N(g);
  return std::make_shared<QuadraticTarget>(LatticeSpec::integer_range(d, -k, k), W, b);
}

// π(s, v) up to a constant
double log_joint(const TargetModel& t, const Preconditioner& pre, const Vec& s, const Vec& v) {
  return t.f(s) - 0.5 * v.dot(pre.WD * v);
}

std::vector<double> pmf_of_chain(const Kernel& k, std::size_t n, std::size_t burn, std::uint64_t seed) {
  const auto& lat = k.target().lattice();
  const std::size_t K = lat.K(), d = lat.dim();
  std::size_t cells = 1;
  for (std::size_t i = 0; i < d; ++i) cells *= K;
  std::vector<double> counts(cells, 0.0);
  Philox rng(seed, 0);
  auto st = k.initial_state(random_lattice_point(lat, rng), rng);
  for (std::size_t t = 0; t < n + burn; ++t) {
    st = k.step(st, rng).next;
    if (t < burn) continue;
    std::size_t c = 0;
    for (auto i : st.idx) c = c * K + i;
    counts[c] += 1;
  }
  for (auto& x : counts) x /= double(n);
  return counts;
}

double tv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

std::vector<IndexPoint> all_points(std::size_t d, std::size_t K) {
  std::vector<IndexPoint> out;
  IndexPoint idx(d, 0);
  while (true) {
    out.push_back(idx);
    std::size_t pos = d;
    while (pos > 0 && ++idx[pos - 1] == K) idx[--pos] = 0;
    if (pos == 0) break;
  }
  return out;
}

}  // namespace

TEST_CASE("rejection-free on matched quadratic targets") {
  auto q = small_quadratic(3, 4, 1);
  std::shared_ptr<const TargetModel> t = q;
  const auto pre = make_preconditioner(q->W_true(), 0.3);
  for (KernelId id : {KernelId::git_gibbs, KernelId::pavg, KernelId::vpdhams, KernelId::opdhams}) {
    for (auto [eps, phi, beta] : {std::tuple{0.9, 0.0, 1.0}, std::tuple{0.0, 0.7, 0.3}, std::tuple{1.0, 0.2, -0.5},
                                  std::tuple{0.5, 1.0, 0.0}}) {
      CAPTURE(to_string(id));
      CAPTURE(eps);
      SamplerConfig cfg{eps, 0.3, phi, beta, 1};
      const auto k = make_kernel(id, t, pre, cfg);
      Philox rng(3, 0);
      auto st = k->initial_state(random_lattice_point(t->lattice(), rng), rng);
      double worst = 0;
      int acc = 0;
      for (int i = 0; i < 1000; ++i) {
        const auto o = k->step(st, rng);
        worst = std::max(worst, std::abs(o.log_accept_ratio));
        acc += o.accepted;
        st = o.next;
      }
      CHECK(worst <= 1e-8);
      CHECK(acc == 1000);
    }
  }
}

TEST_CASE("first-order kernels are not rejection-free on a quadratic target") {
  auto q = small_quadratic(2, 4, 2);
  std::shared_ptr<const TargetModel> t = q;
  for (KernelId id : {KernelId::pavg, KernelId::vpdhams}) {
    SamplerConfig cfg;
    cfg.delta = 0.5;
    const auto k = first_order_specialize(id, t, cfg);
    CHECK(is_first_order(k->id()));
    CHECK(k->preconditioner().W.isZero(0.0));
    CHECK(k->preconditioner().lambda == 0.5);
    Philox rng(4, 0);
    auto st = k->initial_state(Vec::Zero(2), rng);
    double worst = 0;
    for (int i = 0; i < 200; ++i) {
      const auto o = k->step(st, rng);
      worst = std::max(worst, std::abs(o.log_accept_ratio));
      st = o.next;
    }
    CHECK(worst > 1e-3);
  }
  CHECK_THROWS_AS(first_order_specialize(KernelId::metropolis, t, {}), ConfigError);
}

TEST_CASE("first-order logits are -½δa² + (∇f + δz)a") {
  oracle::Wiggly t;
  const auto pre = first_order_preconditioner(2, 0.8);
  Vec s(2), z(2);
  s << 1.5, -1;
  z << 0.3, -0.7;
  const auto q = build_proposal(t.grad(s), s, z, pre, t.lattice());
  const Vec g = t.grad(s);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      const double a = t.lattice().value(k);
      const double ref = -0.4 * a * a + (g[Eigen::Index(i)] + 0.8 * z[Eigen::Index(i)]) * a;
      CHECK(q.row_logits(i)[k] == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("generalized detailed balance, pointwise") {
  auto t = std::make_shared<oracle::Wiggly>();
  const auto& lat = t->lattice();
  const auto stars = all_points(2, 3);
  struct Case {
    Preconditioner pre;
    SamplerConfig cfg;
    bool over;
    double tol;
  };
  std::vector<Case> cases{
      {make_preconditioner(wiggly_w(), 0.3), {0.9, 0.3, 0.4, 1.0, 1}, false, 1e-10},
      {make_preconditioner(wiggly_w(), 0.3, 100.0, FactorKind::eigen), {0.9, 0.3, 0.0, 1.0, 1}, false, 1e-10},
      {first_order_preconditioner(2, 0.8), {0.9, 0.8, 0.25, 1.0, 1}, false, 1e-10},
      {make_preconditioner(wiggly_w(), 0.3), {0.9, 0.3, 0.4, 0.6, 1}, true, 1e-8},
      {make_preconditioner(wiggly_w(), 0.3), {0.9, 0.3, 0.0, -0.35, 1}, true, 1e-8},
      {first_order_preconditioner(2, 0.8), {0.9, 0.8, 0.25, 0.0, 1}, true, 1e-8},
  };
  Philox rng(21, 0);
  for (const auto& c : cases) {
    CAPTURE(c.over);
    CAPTURE(c.cfg.beta);
    int reachable = 0;
    for (int rep = 0; rep < 100; ++rep) {
      const auto st = make_state(*t, random_lattice_point(lat, rng));
      const Vec vh = 1.5 * momentum_init(c.pre, rng);
      for (const auto& star : stars) {
        const auto m = pdhams_move(*t, c.pre, c.cfg, c.over, st, vh, star);
        if (m.log_q_fwd == -kInf) {
          CHECK(m.log_ratio == -kInf);
          continue;
        }
        ++reachable;

        // Independent evaluation of the move.
        const Vec ss = lat.point(star);
        Vec vs = -vh + st.s - ss;
        if (c.cfg.phi != 0) vs += c.cfg.phi * (t->grad(ss) - t->grad(st.s) + c.pre.W * (st.s - ss));
        CHECK((m.v_star - vs).cwiseAbs().maxCoeff() <= 1e-12);
        const Vec cf = t->grad(st.s) - c.pre.W * st.s + c.pre.WD * (st.s - vh);
        const Vec cb = t->grad(ss) - c.pre.W * ss + c.pre.WD * (ss + vs);
        double lqf = 0, lqb = 0;
        if (!c.over) {
          lqf = oracle::product_log_prob(cf, c.pre.lambda, lat, star);
          lqb = oracle::product_log_prob(cb, c.pre.lambda, lat, st.idx);
        } else {
          for (std::size_t i = 0; i < 2; ++i) {
            const auto pf = oracle::row_pmf(cf[Eigen::Index(i)], c.pre.lambda, lat.values());
            const auto pb = oracle::row_pmf(cb[Eigen::Index(i)], c.pre.lambda, lat.values());
            lqf += std::log(oracle::over_relax_grid(pf, st.idx[i], star[i], c.cfg.beta, 20000));
            lqb += std::log(oracle::over_relax_grid(pb, star[i], st.idx[i], c.cfg.beta, 20000));
          }
        }
        const double lf = std::exp(m.log_q_fwd), lb = std::exp(m.log_q_bwd);
        CHECK(std::abs(lf - std::exp(lqf)) <= (c.over ? 1e-6 : 1e-12));
        CHECK(std::abs(lb - std::exp(lqb)) <= (c.over ? 1e-6 : 1e-12));

        // Reverse move from (s*, -v*) back to s.
        if (m.log_q_bwd == -kInf) {
          CHECK(m.log_ratio == -kInf);
          continue;
        }
        const auto back = make_state(*t, m.s_star);
        const auto r = pdhams_move(*t, c.pre, c.cfg, c.over, back, -m.v_star, st.idx);
        CHECK((r.v_star + vh).cwiseAbs().maxCoeff() <= 1e-12);
        REQUIRE(r.log_q_fwd > -kInf);
        const double lhs = log_joint(*t, c.pre, st.s, vh) + m.log_q_fwd + std::min(0.0, m.log_ratio);
        const double rhs = log_joint(*t, c.pre, m.s_star, -m.v_star) + r.log_q_fwd + std::min(0.0, r.log_ratio);
        if (std::min(m.log_q_fwd, m.log_q_bwd) < std::log(1e-12)) {
          // Landing measures this small have no relative precision left.
          const double base = log_joint(*t, c.pre, st.s, vh);
          CHECK(std::abs(std::exp(lhs - base) - std::exp(rhs - base)) <= 1e-10);
          continue;
        }
        CHECK(std::abs(std::expm1(lhs - rhs)) <= c.tol);
      }
    }
    CHECK(reachable > 0);
  }
}

TEST_CASE("PDHAMS mean and momentum schemes match the variance implementation") {
  auto wig = std::make_shared<oracle::Wiggly>();
  auto gauss = share(discrete_gaussian(4, 5, 5.0, 0.9));
  struct Case {
    std::shared_ptr<const TargetModel> t;
    Preconditioner pre;
    KernelId id;
    SamplerConfig cfg;
  };
  const auto gW = gauss->as_quadratic()->W_true();
  std::vector<Case> cases{
      {wig, make_preconditioner(wiggly_w(), 0.3), KernelId::vpdhams, {0.9, 0.3, 0.4, 1.0, 1}},
      {wig, make_preconditioner(wiggly_w(), 0.3, 100, FactorKind::eigen), KernelId::vpdhams, {0.6, 0.3, 0.0, 1.0, 1}},
      {wig, make_preconditioner(wiggly_w(), 0.3), KernelId::opdhams, {0.9, 0.3, 0.4, 0.45, 1}},
      {wig, first_order_preconditioner(2, 0.8), KernelId::vdhams, {0.9, 0.8, 0.2, 1.0, 1}},
      {wig, first_order_preconditioner(2, 0.8), KernelId::odhams, {1.0, 0.8, 0.2, -0.3, 1}},
      {gauss, make_preconditioner(gW, 0.058), KernelId::vpdhams, {0.9, 0.058, 0.1, 1.0, 1}},
      {gauss, make_preconditioner(gW, 0.058), KernelId::opdhams, {0.9, 0.058, 0.0, 0.8, 1}},
  };
  for (const auto& c : cases) {
    CAPTURE(to_string(c.id));
    const auto k = make_kernel(c.id, c.t, c.pre, c.cfg);
    const Preconditioner& pre = k->preconditioner();
    const bool over = c.id == KernelId::opdhams || c.id == KernelId::odhams;
    Philox rng(31, 0);
    auto st = k->initial_state(random_lattice_point(c.t->lattice(), rng), rng);
    Vec sm = st.s, u = pre.L.transpose() * st.v;
    Vec sv = st.s, v = st.v;
    int rejections = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto noise = k->draw_noise(rng);
      const auto o = k->transition(st, noise);
      const auto om = oracle::pdhams_mean(*c.t, pre, c.cfg, over, sm, u, noise);
      const auto ov = oracle::pdhams_momentum(*c.t, pre, c.cfg, over, sv, v, noise);
      REQUIRE(o.accepted == om.accepted);
      REQUIRE(o.accepted == ov.accepted);
      CHECK(o.next.s == om.s);
      CHECK(o.next.s == ov.s);
      if (std::isfinite(o.log_accept_ratio)) {
        CHECK(std::abs(o.log_accept_ratio - om.log_ratio) <= 1e-12 * (1 + std::abs(om.log_ratio)));
        CHECK(std::abs(o.log_accept_ratio - ov.log_ratio) <= 1e-12 * (1 + std::abs(ov.log_ratio)));
      }
      const Vec lu = pre.L.transpose() * o.next.v;
      CHECK((lu - om.mom).cwiseAbs().maxCoeff() <= 1e-12 * (1 + om.mom.cwiseAbs().maxCoeff()));
      CHECK((o.next.v - ov.mom).cwiseAbs().maxCoeff() <= 1e-12 * (1 + ov.mom.cwiseAbs().maxCoeff()));
      rejections += !o.accepted;
      st = o.next;
      sm = om.s;
      u = om.mom;
      sv = ov.s;
      v = ov.mom;
    }
    if (c.t == wig) CHECK(rejections > 0);
  }
}

TEST_CASE("PAVG mean scheme matches the variance implementation") {
  auto wig = std::make_shared<oracle::Wiggly>();
  for (const auto& pre : {make_preconditioner(wiggly_w(), 0.3), first_order_preconditioner(2, 0.8)}) {
    const auto k = make_kernel(KernelId::pavg, wig, pre, {});
    Philox rng(41, 0);
    auto st = k->initial_state(random_lattice_point(wig->lattice(), rng), rng);
    for (int i = 0; i < 1000; ++i) {
      const auto noise = k->draw_noise(rng);
      const auto o = k->transition(st, noise);
      const auto om = oracle::pavg_mean(*wig, pre, st.s, noise);
      REQUIRE(o.accepted == om.accepted);
      CHECK(o.next.s == om.s);
      CHECK(std::abs(o.log_accept_ratio - om.log_ratio) <= 1e-12 * (1 + std::abs(om.log_ratio)));
      st = o.next;
    }
  }
}

TEST_CASE("V-PDHAMS with epsilon = phi = 0 reduces to PAVG") {
  auto wig = std::make_shared<oracle::Wiggly>();
  auto gauss = share(discrete_gaussian(4, 5, 5.0, 0.9));
  for (auto t : {std::shared_ptr<const TargetModel>(wig), gauss}) {
    const Mat W = t == gauss ? gauss->as_quadratic()->W_true() : wiggly_w();
    const auto pre = make_preconditioner(W, 0.2);
    SamplerConfig cfg{0.0, 0.2, 0.0, 1.0, 1};
    const auto kv = make_kernel(KernelId::vpdhams, t, pre, cfg);
    const auto kp = make_kernel(KernelId::pavg, t, pre, cfg);
    Philox rng(5, 0);
    auto sv = kv->initial_state(random_lattice_point(t->lattice(), rng), rng);
    auto sp = make_state(*t, sv.s);
    for (int i = 0; i < 1000; ++i) {
      const auto n = kv->draw_noise(rng);
      StepNoise np = n;
      np.normals = -n.normals;  // z = s - v_half = s + (Lᵀ)⁻¹(-Z)
      const auto ov = kv->transition(sv, n);
      const auto op = kp->transition(sp, np);
      REQUIRE(ov.next.idx == op.next.idx);
      CHECK(ov.accepted == op.accepted);
      CHECK(std::abs(ov.log_accept_ratio - op.log_accept_ratio) <= 1e-10);
      sv = ov.next;
      sp = op.next;
    }
  }
}

TEST_CASE("PAVG equals GIT Gibbs on a quadratic target") {
  auto q = small_quadratic(3, 4, 7);
  std::shared_ptr<const TargetModel> t = q;
  const auto pre = make_preconditioner(q->W_true(), 0.5);
  const auto kp = make_kernel(KernelId::pavg, t, pre, {});
  const auto kg = make_kernel(KernelId::git_gibbs, t, pre, {});
  Philox rng(6, 0);
  auto sp = kp->initial_state(random_lattice_point(t->lattice(), rng), rng);
  auto sg = sp;
  for (int i = 0; i < 1000; ++i) {
    const auto n = kp->draw_noise(rng);
    const auto op = kp->transition(sp, n);
    const auto og = kg->transition(sg, n);
    REQUIRE(op.next.idx == og.next.idx);
    CHECK(op.accepted);
    CHECK(og.accepted);
    CHECK(std::abs(op.log_accept_ratio) <= 1e-10);
    sp = op.next;
    sg = og.next;
  }
  const auto other = make_preconditioner(q->W_true() * 0.5, 0.5);
  CHECK_THROWS_AS(make_kernel(KernelId::git_gibbs, t, other, {}), ContractError);
  auto wig = std::make_shared<oracle::Wiggly>();
  CHECK_THROWS_AS(make_kernel(KernelId::git_gibbs, wig, make_preconditioner(wiggly_w(), 0.3), {}), ContractError);
}

TEST_CASE("O-PDHAMS at beta = 1 has the V-PDHAMS one-step law") {
  auto t = std::make_shared<oracle::Wiggly>();
  const auto pre = make_preconditioner(wiggly_w(), 0.3);
  const auto stars = all_points(2, 3);
  Philox rng(8, 0);
  for (double phi : {0.0, 0.5}) {
    SamplerConfig cfg{0.9, 0.3, phi, 1.0, 1};
    for (int rep = 0; rep < 100; ++rep) {
      const auto st = make_state(*t, random_lattice_point(t->lattice(), rng));
      const Vec vh = momentum_init(pre, rng);
      double stay_v = 1, stay_o = 1;
      for (const auto& star : stars) {
        const auto mv = pdhams_move(*t, pre, cfg, false, st, vh, star);
        const auto mo = pdhams_move(*t, pre, cfg, true, st, vh, star);
        const double pv = std::exp(mv.log_q_fwd + std::min(0.0, mv.log_ratio));
        const double po = std::exp(mo.log_q_fwd + std::min(0.0, mo.log_ratio));
        CHECK(std::abs(pv - po) <= 1e-10);
        CHECK((mv.v_star - mo.v_star).cwiseAbs().maxCoeff() == 0.0);
        stay_v -= pv;
        stay_o -= po;
      }
      CHECK(std::abs(stay_v - stay_o) <= 1e-10);
    }
  }
}

TEST_CASE("auto-regression edge cases and the rejection convention") {
  auto t = std::make_shared<oracle::Wiggly>();
  const auto pre = make_preconditioner(wiggly_w(), 0.3);
  SamplerConfig one{1.0, 0.3, 0.2, 1.0, 1};
  const auto k1 = make_kernel(KernelId::vpdhams, t, pre, one);
  CHECK(k1->normals_per_step() == 0);
  SamplerConfig half{0.6, 0.3, 0.2, 1.0, 1};
  const auto kh = make_kernel(KernelId::vpdhams, t, pre, half);
  CHECK(kh->normals_per_step() == 2);
  CHECK(make_kernel(KernelId::opdhams, t, pre, half)->uniforms_per_step() == 4);

  Philox rng(9, 0);
  int rejections = 0;
  for (const auto* k : {k1.get(), kh.get()}) {
    auto st = k->initial_state(random_lattice_point(t->lattice(), rng), rng);
    for (int i = 0; i < 2000; ++i) {
      const auto n = k->draw_noise(rng);
      const auto o = k->transition(st, n);
      const double e = k->config().epsilon;
      const Vec vh = e == 1.0 ? st.v : Vec(e * st.v + std::sqrt(1 - e * e) * (pre.L_inv_T * n.normals));
      if (!o.accepted) {
        ++rejections;
        CHECK(o.next.s == st.s);
        if (e == 1.0) CHECK(o.next.v == -st.v);
        else CHECK((o.next.v + vh).cwiseAbs().maxCoeff() <= 1e-14);
      } else {
        CHECK(o.next.s == o.proposal);
      }
      st = o.next;
    }
  }
  CHECK(rejections > 0);
}

TEST_CASE("momentum initialization law") {
  auto g = discrete_gaussian(3, 5, 2.0, 0.5);
  const auto pre = make_preconditioner(g->W_true(), 0.2);
  Philox rng(10, 0);
  const int n = 1000000;
  Mat S = Mat::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    Vec Z(3);
    for (auto& x : Z) x = rng.normal();
    const Vec v = momentum_init(pre, Z);
    if (i < 100) CHECK((pre.L.transpose() * v - Z).cwiseAbs().maxCoeff() <= 1e-12);
    S += v * v.transpose();
  }
  S /= n;
  const Mat C = pre.WD.inverse();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt((C(i, i) * C(j, j) + C(i, j) * C(i, j)) / n);
      CHECK(std::abs(S(i, j) - C(i, j)) <= 3 * se);
    }
  const auto id = first_order_preconditioner(2, 1.0);
  Vec Z(2);
  Z << 0.3, -1.2;
  CHECK(momentum_init(id, Z) == Z);
}

TEST_CASE("metropolis proposals") {
  class Flat : public TargetModel {
   public:
    Flat() : TargetModel(LatticeSpec::integer_range(2, 0, 10)) {}
    std::string name() const override { return "flat"; }
    double f(const Vec&) const override { return 0.0; }
    Vec grad(const Vec&) const override { return Vec::Zero(2); }
    nlohmann::json describe() const override { return {}; }
  };
  auto t = std::make_shared<Flat>();
  Philox rng(11, 0);
  SamplerConfig c2;
  c2.r = 2;
  const auto k = make_kernel(KernelId::metropolis, t, first_order_preconditioner(2, 1.0), c2);
  CHECK(k->normals_per_step() == 0);
  for (int i = 0; i < 500; ++i) {
    Vec s(2);
    s << 5, 5;
    const auto o = k->step(make_state(*t, s), rng);
    CHECK(o.log_accept_ratio == 0.0);
    CHECK(o.accepted);
    CHECK((o.proposal - s).cwiseAbs().maxCoeff() <= 2);
  }
  // At the edge the window is clipped and the correction is non-zero.
  Vec edge(2);
  edge << 0, 5;
  bool saw = false;
  for (int i = 0; i < 200; ++i) {
    const auto o = k->step(make_state(*t, edge), rng);
    if (o.proposal[0] == 2) {
      CHECK(o.log_accept_ratio == doctest::Approx(std::log(3.0 / 5.0)));
      saw = true;
    }
  }
  CHECK(saw);
  SamplerConfig cK;
  cK.r = 10;
  const auto kk = make_kernel(KernelId::metropolis, t, first_order_preconditioner(2, 1.0), cK);
  for (int i = 0; i < 200; ++i) CHECK(kk->step(make_state(*t, edge), rng).log_accept_ratio == 0.0);
}

TEST_CASE("stationarity on small lattices") {
  auto wig = std::make_shared<oracle::Wiggly>();
  const std::size_t all[] = {0, 1};
  const auto exact = enumerate_joint(*wig, all).p;
  const auto pre = make_preconditioner(wiggly_w(), 0.3);
  SamplerConfig cfg{0.9, 0.3, 0.3, 0.7, 1};
  SamplerConfig fo{0.9, 1.0, 0.2, 0.7, 1};
  for (KernelId id : {KernelId::pavg, KernelId::vpdhams, KernelId::opdhams, KernelId::avg, KernelId::vdhams,
                      KernelId::odhams, KernelId::metropolis}) {
    CAPTURE(to_string(id));
    const auto k = make_kernel(id, wig, pre, is_first_order(id) ? fo : cfg);
    CHECK(tv(pmf_of_chain(*k, 1000000, 1000, 12), exact) <= 0.01);
  }

  auto one = std::make_shared<QuadraticTarget>(LatticeSpec::integer_range(1, -1, 1), Mat::Constant(1, 1, -1.0),
                                              Vec::Zero(1));
  const std::size_t c0[] = {0};
  const auto gk = make_kernel(KernelId::git_gibbs, one, make_preconditioner(one->W_true(), 1.0), {});
  CHECK(tv(pmf_of_chain(*gk, 1000000, 100, 13), enumerate_joint(*one, c0).p) <= 0.01);

  auto g21 = share(discrete_gaussian(1, 10, 5.0, 0.0));
  SamplerConfig r3;
  r3.r = 3;
  const auto mk = make_kernel(KernelId::metropolis, g21, first_order_preconditioner(1, 1.0), r3);
  CHECK(tv(pmf_of_chain(*mk, 1000000, 1000, 14), enumerate_joint(*g21, c0).p) <= 0.01);
}

TEST_CASE("PAVG kernel satisfies detailed balance by Monte Carlo") {
  auto wig = std::make_shared<oracle::Wiggly>();
  const auto pre = make_preconditioner(wiggly_w(), 0.3);
  const auto k = make_kernel(KernelId::pavg, wig, pre, {});
  const auto pts = all_points(2, 3);
  const std::size_t all[] = {0, 1};
  const auto pi = enumerate_joint(*wig, all).p;
  const int n = 100000;
  Mat P = Mat::Zero(9, 9);
  Philox rng(15, 0);
  for (std::size_t a = 0; a < 9; ++a) {
    const auto st = make_state(*wig, wig->lattice().point(pts[a]));
    for (int i = 0; i < n; ++i) {
      const auto o = k->step(st, rng);
      P(Eigen::Index(a), Eigen::Index(o.next.idx[0] * 3 + o.next.idx[1])) += 1.0 / n;
    }
  }
  for (Eigen::Index a = 0; a < 9; ++a)
    for (Eigen::Index b = a + 1; b < 9; ++b) {
      const double l = pi[std::size_t(a)] * P(a, b), r = pi[std::size_t(b)] * P(b, a);
      const double var = pi[std::size_t(a)] * pi[std::size_t(a)] * P(a, b) * (1 - P(a, b)) / n +
                         pi[std::size_t(b)] * pi[std::size_t(b)] * P(b, a) * (1 - P(b, a)) / n;
      CHECK(std::abs(l - r) <= 3 * std::sqrt(var) + 1e-12);
    }
}

TEST_CASE("kernel naming and config validation") {
  for (auto id : {KernelId::git_gibbs, KernelId::pavg, KernelId::vpdhams, KernelId::opdhams, KernelId::metropolis,
                  KernelId::avg, KernelId::vdhams, KernelId::odhams})
    CHECK(kernel_id_from_string(to_string(id)) == id);
  CHECK_THROWS_AS(kernel_id_from_string("hmc"), ConfigError);
  SamplerConfig bad;
  bad.epsilon = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(sampler_config_from_json({{"eps", 0.5}}), ConfigError);
  const auto c = sampler_config_from_json({{"delta", 0.2}, {"phi", 0.5}});
  CHECK(c.delta == 0.2);
  CHECK(c.epsilon == 0.9);
}

TEST_CASE("single-step entry points run") {
  auto q = small_quadratic(2, 3, 3);
  const auto pre = make_preconditioner(q->W_true(), 0.4);
  Philox rng(16, 0);
  const auto st = make_state(*q, Vec::Zero(2));
  CHECK(git_gibbs_step(st, *q, pre, rng).accepted);
  CHECK(pavg_step(st, *q, pre, rng).accepted);
  SamplerConfig cfg;
  const auto sm = make_state(*q, Vec::Zero(2), momentum_init(pre, rng));
  CHECK(vpdhams_step(sm, *q, pre, cfg, rng).accepted);
  CHECK(opdhams_step(sm, *q, pre, cfg, rng).accepted);
  CHECK(q->lattice().contains(metropolis_step(st, *q, 1, rng).next.s));
  CHECK_THROWS_AS(make_kernel(KernelId::vpdhams, q, pre, cfg)->transition(st, {}), InvalidStateError);
}
