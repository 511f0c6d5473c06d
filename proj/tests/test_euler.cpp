#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rotlab/errors.hpp"
#include "rotlab/euler_solver.hpp"
#include "test_support.hpp"

using namespace rotlab;
using support::max_abs_diff;

namespace {

ScalarField random_field(TorusGrid g, int kmax, double amplitude, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<std::array<double, 4>> modes;
  for (int kx = -kmax; kx <= kmax; ++kx)
    for (int ky = 0; ky <= kmax; ++ky) modes.push_back({double(kx), double(ky), d(rng), d(rng)});
  ScalarField f = ScalarField::sample(g, [&](double x, double y) {
    double v = 0.0;
    for (const auto& m : modes) v += m[2] * std::cos(m[0] * x + m[1] * y) + m[3] * std::sin(m[0] * x + m[1] * y);
    return v;
  });
  f *= amplitude / linf_norm(f);
  return f;
}

FlowState smooth_state(const FlowParams& prm, double scale = 1.0) {
  const TorusGrid g(prm.n());
  return make_state(prm, support::mixed_height(g, 0.1 * scale), support::mixed_velocity(g, scale));
}

double max_state_diff(const FlowState& a, const FlowState& b) {
  double m = std::max(max_abs_diff(a.p, b.p), max_abs_diff(a.u, b.u));
  if (a.S && b.S) m = std::max(m, max_abs_diff(*a.S, *b.S));
  return m;
}

FlowState run_fixed(const FlowState& s, double t_end, double dt) {
  DtPolicy pol;
  pol.dt = dt;
  pol.breakdown_multiplier = 1e9;
  return integrate(s, t_end, pol).state;
}

FlowState steepening(const FlowParams& prm) {
  const TorusGrid g(prm.n());
  VectorField u(ScalarField::sample(g, [](double x, double) { return 0.5 * std::sin(x); }), ScalarField(g));
  return make_state(prm, ScalarField(g), u);
}

}  // namespace

TEST_CASE("rest state is a fixed point") {
  const FlowParams prm(0.2, 0.5, Family::rsw, 2.0, 32);
  const TorusGrid g(32);
  const FlowState s = make_state(prm, ScalarField(g), VectorField(g));
  const FlowState d = rhs(s);
  CHECK(linf_norm(d.p) == 0.0);
  CHECK(linf_norm(d.u.c1) == 0.0);
  CHECK(linf_norm(d.u.c2) == 0.0);
  const FlowState after = step(s, 0.01);
  CHECK(max_state_diff(after, s) == 0.0);
}

TEST_CASE("uniform velocity only rotates") {
  const FlowParams prm(0.25, 0.8, Family::isentropic, 1.4, 16);
  const TorusGrid g(16);
  VectorField u(ScalarField::sample(g, [](double, double) { return 0.3; }),
                ScalarField::sample(g, [](double, double) { return -0.2; }));
  const FlowState s = make_state(prm, ScalarField(g), u);
  const FlowState d = rhs(s);
  CHECK(linf_norm(d.p) < 1e-15);
  CHECK(max_abs_diff(d.u.c1, ScalarField::sample(g, [](double, double) { return -0.2 / 0.25; })) < 1e-14);
  CHECK(max_abs_diff(d.u.c2, ScalarField::sample(g, [](double, double) { return -0.3 / 0.25; })) < 1e-14);
}

TEST_CASE("rotation operator is skew") {
  std::mt19937_64 rng(7);
  for (Family fam : {Family::rsw, Family::isentropic, Family::ideal}) {
    const FlowParams prm(0.1, 0.7, fam, fam == Family::rsw ? 2.0 : 1.4, 32);
    const TorusGrid g(32);
    for (int trial = 0; trial < 5; ++trial) {
      std::optional<ScalarField> S;
      if (fam == Family::ideal) S = random_field(g, 3, 0.3, rng);
      const FlowState s = make_state(prm, random_field(g, 3, 0.2, rng),
                                     VectorField(random_field(g, 3, 1.0, rng), random_field(g, 3, 1.0, rng)), S);
      const double ip = inner_product(rotation_operator(s), s);
      CHECK(std::abs(ip) <= 1e-13);
    }
  }
}

TEST_CASE("family consistency per rhs evaluation") {
  std::mt19937_64 rng(11);
  const TorusGrid g(32);
  for (int trial = 0; trial < 3; ++trial) {
    const ScalarField h = random_field(g, 4, 0.3, rng);
    const VectorField u(random_field(g, 4, 0.5, rng), random_field(g, 4, 0.5, rng));
    const FlowState rsw = make_state(FlowParams(0.1, 0.6, Family::rsw, 2.0, 32), h, u);
    const FlowState ise2 = make_state(FlowParams(0.1, 0.6, Family::isentropic, 2.0, 32), h, u);
    CHECK(max_state_diff(rhs(rsw), rhs(ise2)) <= 1e-12);

    const FlowState ise = make_state(FlowParams(0.1, 0.6, Family::isentropic, 1.4, 32), h, u);
    const FlowState ideal = make_state(FlowParams(0.1, 0.6, Family::ideal, 1.4, 32), h, u, ScalarField(g));
    const FlowState di = rhs(ideal);
    CHECK(max_state_diff(rhs(ise), di) <= 1e-14);
    CHECK(linf_norm(*di.S) == 0.0);
  }
}

TEST_CASE("rotation-only dynamics conserve speed over a period") {
  const FlowParams prm(0.2, 1.0, Family::rsw, 2.0, 16);
  const FlowState s = smooth_state(prm);
  DtPolicy pol;
  // RK4 phase error on the rotation scales as dt^5; 2000 steps keep it near roundoff.
  pol.dt = prm.period() / 2000;
  pol.rhs.transport = false;
  const FlowState e = integrate(s, prm.period(), pol).state;
  for (std::size_t i = 0; i < s.p.size(); ++i) {
    CHECK(std::abs(std::hypot(e.u.c1[i], e.u.c2[i]) - std::hypot(s.u.c1[i], s.u.c2[i])) <= 1e-12);
  }
  // A full period returns the velocity.
  CHECK(max_abs_diff(e.u, s.u) <= 1e-9);
}

TEST_CASE("RK4 self-convergence is fourth order") {
  struct Case {
    Family fam;
    double gamma;
  };
  for (Case c : {Case{Family::rsw, 2.0}, Case{Family::isentropic, 1.4}, Case{Family::ideal, 1.4}}) {
    CAPTURE(to_string(c.fam));
    const FlowParams prm(0.5, 1.0, c.fam, c.gamma, 32);
    const TorusGrid g(32);
    std::optional<ScalarField> S;
    if (c.fam == Family::ideal) S = ScalarField::sample(g, [](double x, double y) { return 0.1 * std::sin(x + y); });
    const FlowState s = make_state(prm, support::mixed_height(g), support::mixed_velocity(g), S);
    const double dt = 0.05, t_end = 0.5;
    const FlowState ref = run_fixed(s, t_end, dt / 16);
    const double e1 = max_state_diff(run_fixed(s, t_end, dt), ref);
    const double e2 = max_state_diff(run_fixed(s, t_end, dt / 2), ref);
    const double e4 = max_state_diff(run_fixed(s, t_end, dt / 4), ref);
    const double order1 = std::log2(e1 / e2), order2 = std::log2(e2 / e4);
    CAPTURE(order1);
    CAPTURE(order2);
    CHECK(std::abs(order1 - 4.0) <= 0.3);
    CHECK(std::abs(order2 - 4.0) <= 0.3);
  }
}

TEST_CASE("mass drift stays below 1e-8 per unit time") {
  for (Family fam : {Family::rsw, Family::isentropic}) {
    const FlowParams prm(0.1, 0.5, fam, fam == Family::rsw ? 2.0 : 1.4, 32);
    const FlowState s = smooth_state(prm);
    DtPolicy pol;
    pol.sample_interval = 0.25;
    const Integration run = integrate(s, 1.0, pol);
    REQUIRE_FALSE(run.state.broken_down);
    const double m0 = run.series.front().mass;
    // Relative to the total mass, integral of 1/sigma + rho.
    const double total = 4 * M_PI * M_PI / prm.sigma() + m0;
    for (const SeriesRow& r : run.series) CHECK(std::abs(r.mass - m0) / total <= 1e-8 * std::max(r.t, 1e-3));
    // For shallow water the density is the height.
    if (fam == Family::rsw) CHECK(std::abs(m0 - integral(state_height(s))) <= 1e-12);
  }
}

TEST_CASE("entropy integral is conserved") {
  const FlowParams prm(0.2, 0.5, Family::ideal, 1.4, 32);
  const TorusGrid g(32);
  const FlowState s = make_state(prm, support::mixed_height(g), support::mixed_velocity(g),
                                 ScalarField::sample(g, [](double x, double y) { return 0.2 * std::cos(x - y); }));
  DtPolicy pol;
  pol.sample_interval = 0.5;
  const Integration run = integrate(s, 1.0, pol);
  // Relative to total mass times max|S0|.
  const double scale = (4 * M_PI * M_PI / prm.sigma() + run.series.front().mass) * linf_norm(*s.S);
  for (const SeriesRow& r : run.series) {
    CHECK(std::abs(r.entropy - run.series.front().entropy) / scale <= 1e-8 * std::max(r.t, 1e-3));
  }
}

TEST_CASE("symmetric form agrees with the height form") {
  for (Family fam : {Family::rsw, Family::isentropic}) {
    const FlowParams prm(0.2, 0.8, fam, fam == Family::rsw ? 2.0 : 1.4, 64);
    const TorusGrid g(64);
    const ScalarField h0 = support::mixed_height(g);
    const VectorField u0 = support::mixed_velocity(g);
    FlowState s = make_state(prm, h0, u0);
    HeightState hs{h0, u0};
    const double dt = 0.9 * admissible_dt(s) / 2;
    const int steps = int(std::ceil(1.0 / dt));
    const double h = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
      s = step(s, h);
      hs = height_step(hs, prm, h);
    }
    CHECK(max_abs_diff(state_height(s), hs.h) <= 1e-6);
    CHECK(max_abs_diff(s.u, hs.u) <= 1e-6);
  }
}

TEST_CASE("time steps above the CFL bound are refused") {
  const FlowParams prm(0.1, 1.0, Family::rsw, 2.0, 32);
  const FlowState s = smooth_state(prm);
  const double limit = admissible_dt(s);
  CHECK_NOTHROW(step(s, limit));
  try {
    step(s, 1.5 * limit);
    FAIL("expected CflError");
  } catch (const CflError& e) {
    CHECK(e.admissible_dt() == doctest::Approx(limit));
  }
  CHECK_THROWS_AS(step(s, 0.0), CflError);
  DtPolicy pol;
  pol.dt = 2 * limit;
  CHECK_THROWS_AS(integrate(s, 1.0, pol), CflError);
}

TEST_CASE("non-finite input marks breakdown") {
  const FlowParams prm(0.1, 1.0, Family::rsw, 2.0, 16);
  FlowState s = smooth_state(prm);
  CHECK_THROWS_AS(rhs([&] {
    FlowState b = s;
    b.u.c1[3] = std::nan("");
    return b;
  }()), NonFiniteError);
  s.p[5] = std::numeric_limits<double>::infinity();
  const FlowState out = step(s, 1e-3);
  CHECK(out.broken_down);
}

TEST_CASE("integrate lands exactly on t_end and samples the series") {
  const FlowParams prm(0.1, 1.0, Family::rsw, 2.0, 16);
  const FlowState s = smooth_state(prm);
  DtPolicy pol;
  pol.dt = 0.05;
  pol.sample_interval = 0.1;
  const Integration run = integrate(s, 0.35, pol);
  CHECK(run.state.t == doctest::Approx(0.35).epsilon(1e-14));
  CHECK(run.series.front().t == 0.0);
  CHECK(run.series.back().t == doctest::Approx(0.35));
  CHECK(run.series.size() == 5);
  CHECK(run.breakdown_reason.empty());
  pol.max_steps = 2;
  CHECK(integrate(s, 0.35, pol).breakdown_reason == "max_steps");
}

TEST_CASE("steepening data breaks down without rotation") {
  const FlowParams prm(0.1, 1.0, Family::rsw, 2.0, 64);
  DtPolicy pol;
  pol.breakdown_multiplier = 5.0;
  pol.rhs.rotation = false;
  const auto t_star = breakdown_time(steepening(prm), 20.0, pol);
  REQUIRE(t_star.has_value());
  // Pinned regression value.
  CHECK(*t_star == doctest::Approx(2.677033847118).epsilon(1e-9));

  pol.rhs.rotation = true;
  CHECK_FALSE(breakdown_time(steepening(prm), 2 * *t_star, pol).has_value());
}

TEST_CASE("comparison against an approximation") {
  const FlowParams prm(0.2, 0.8, Family::rsw, 2.0, 32);
  const TorusGrid g(32);
  const ScalarField h0 = support::mixed_height(g);
  const VectorField u0 = support::mixed_velocity(g, 0.5);
  const SecondApproximation approx(prm, u0, h0);
  const FlowState s = make_state(prm, h0, u0);
  const ErrorRecord e0 = compare_to_approx(s, approx.at(0.0), 3.0);
  CHECK(e0.total() <= 1e-12);
  CHECK(e0.h <= 1e-12);

  const FlowState late = integrate(s, 0.3).state;
  ApproxSolution self{late.t, prm, late.u, state_height(late), late.p, late.u, std::nullopt};
  CHECK(compare_to_approx(late, self, 3.0).total() == 0.0);

  const FlowState other = make_state(prm.with_n(16), ScalarField(TorusGrid(16)), VectorField(TorusGrid(16)));
  CHECK_THROWS_AS(compare_to_approx(other, approx.at(0.0), 3.0), GridMismatchError);
  const FlowState wrong = make_state(FlowParams(0.3, 0.8, Family::rsw, 2.0, 32), h0, u0);
  CHECK_THROWS_AS(compare_to_approx(wrong, approx.at(0.0), 3.0), DomainError);
}
