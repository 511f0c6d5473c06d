#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "rotlab/approx2.hpp"
#include "rotlab/errors.hpp"
#include "test_support.hpp"

using namespace rotlab;
using support::max_abs_diff;

namespace {

ScalarField random_band_limited(TorusGrid g, int kmax, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<std::array<double, 5>> modes;
  for (int kx = -kmax; kx <= kmax; ++kx)
    for (int ky = 0; ky <= kmax; ++ky) modes.push_back({double(kx), double(ky), d(rng), d(rng), 0.0});
  ScalarField f = ScalarField::sample(g, [&](double x, double y) {
    double v = 0.0;
    for (const auto& m : modes) v += m[2] * std::cos(m[0] * x + m[1] * y) + m[3] * std::sin(m[0] * x + m[1] * y);
    return v;
  });
  f *= amplitude / linf_norm(f);
  return f;
}

// Time derivative of u2 by central differences, then the momentum defect
//   u2_t + u1.grad u2 + P - J u2 / tau,
// with P the pressure term of the family.
VectorField momentum_defect(const SecondApproximation& approx, double t, double eps) {
  const FlowParams& prm = approx.params();
  const auto a = approx.at(t);
  const auto am = approx.at(t - eps);
  const auto ap = approx.at(t + eps);
  const TorusGrid g = a.u1.grid();
  const VelocityGradient G = velocity_gradient(a.u2);
  VectorField pressure(g);
  if (a.S2) {
    const VectorField gp = gradient(a.p2);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double c = std::exp(prm.sigma() * (*a.S2)[i]) * coupling(a.p2[i], prm.sigma(), prm.gamma());
      pressure.c1[i] = c * gp.c1[i];
      pressure.c2[i] = c * gp.c2[i];
    }
  } else {
    pressure = gradient(a.h2);
    pressure.c1 *= 1.0 / prm.sigma();
    pressure.c2 *= 1.0 / prm.sigma();
  }
  VectorField d(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double dt1 = (ap.u2.c1[i] - am.u2.c1[i]) / (2 * eps);
    const double dt2 = (ap.u2.c2[i] - am.u2.c2[i]) / (2 * eps);
    const double u = a.u1.c1[i], v = a.u1.c2[i];
    d.c1[i] = dt1 + u * G.dx1[i] + v * G.dy1[i] + pressure.c1[i] - a.u2.c2[i] / prm.tau();
    d.c2[i] = dt2 + u * G.dx2[i] + v * G.dy2[i] + pressure.c2[i] + a.u2.c1[i] / prm.tau();
  }
  return d;
}

}  // namespace

TEST_CASE("normalized height transforms") {
  CHECK(normalize_value(0.0, 1.0, 2.0) == 0.0);
  CHECK(normalize_value(3.0, 1.0, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(denormalize_value(2.0, 1.0, 2.0) == doctest::Approx(3.0).epsilon(1e-15));
  TorusGrid g(32);
  for (double gamma : {2.0, 1.4, 5.0 / 3.0, 2.5}) {
    for (double sigma : {0.3, 1.0, 1.7}) {
      FlowParams prm(0.1, sigma, gamma == 2.0 ? Family::rsw : Family::isentropic, gamma, 32);
      ScalarField h = random_band_limited(g, 4, 0.5 / sigma, 17);
      const ScalarField back = denormalize(normalize_height(h, prm), prm);
      CHECK(max_abs_diff(back, h) <= 1e-14 * std::max(1.0, linf_norm(h)));
    }
  }
}

TEST_CASE("normalization symmetrizes the system for every gamma") {
  // Mass: h_t + ... + (gamma-1)(1/sigma + h) div u. Momentum: (1/sigma) grad h.
  // In p the div-u coefficient is (gamma-1)(1/sigma + h) / h'(p) and the grad-p
  // coefficient is h'(p) / sigma; both must equal coupling(p).
  for (double gamma : {1.2, 1.4, 2.0, 3.0}) {
    for (double sigma : {0.5, 1.0}) {
      for (double p : {-0.4, 0.0, 0.7}) {
        const double e = 1e-6;
        const double dh = (denormalize_value(p + e, sigma, gamma) - denormalize_value(p - e, sigma, gamma)) / (2 * e);
        const double h = denormalize_value(p, sigma, gamma);
        const double f = coupling(p, sigma, gamma);
        CHECK(dh / sigma == doctest::Approx(f).epsilon(1e-8));
        CHECK((gamma - 1.0) * (1.0 / sigma + h) / dh == doctest::Approx(f).epsilon(1e-8));
      }
    }
  }
  CHECK(coupling(0.4, 0.8, 2.0) == doctest::Approx(1.0 / 0.8 + 0.2));
}

TEST_CASE("vacuum data are rejected") {
  TorusGrid g(16);
  FlowParams prm(0.1, 1.0);
  ScalarField h(g, 0.0);
  h[5] = -1.5;
  try {
    normalize_height(h, prm);
    FAIL("expected vacuum error");
  } catch (const VacuumError& e) {
    CHECK(e.minimum() == doctest::Approx(-0.5));
  }
  CHECK_THROWS_AS(denormalize_value(-3.0, 1.0, 2.0), VacuumError);
}

TEST_CASE("density and height transforms") {
  TorusGrid g(16);
  const ScalarField rho = random_band_limited(g, 3, 0.4, 3);
  FlowParams rsw(0.1, 1.0);
  CHECK(max_abs_diff(height_from_density(rho, rsw), rho) <= 1e-15);
  FlowParams ise(0.1, 0.8, Family::isentropic, 1.4, 16);
  const ScalarField h = height_from_density(rho, ise);
  CHECK(max_abs_diff(density_from_height(h, ise), rho) <= 1e-14);
  CHECK(std::pow(1 + 0.8 * rho[3], 0.4) == doctest::Approx(1 + 0.8 * h[3]).epsilon(1e-14));
}

TEST_CASE("exact h2 trivial cases") {
  TorusGrid g(32);
  FlowParams prm(0.5, 1.0, Family::rsw, 2.0, 32);
  const ScalarField h0 = support::mixed_height(g);
  SUBCASE("zero velocity keeps h0") {
    PressurelessFlow flow(VectorField(g), prm.tau());
    CHECK(max_abs_diff(transport_h2_exact(flow, h0, prm, 0.9), h0) <= 1e-15);
  }
  SUBCASE("uniform translation of a constant and of a profile") {
    VectorField u0(ScalarField(g, 0.3), ScalarField(g, -0.2));
    PressurelessFlow flow(u0, prm.tau());
    CHECK(max_abs_diff(transport_h2_exact(flow, ScalarField(g, 0.25), prm, 1.3), ScalarField(g, 0.25)) <= 1e-14);
    const double t = 1.3;
    const Vec2 shift = trajectory_position({0, 0}, {0.3, -0.2}, t, prm.tau());
    const ScalarField expect = ScalarField::sample(g, [&](double x, double y) {
      return 0.1 * std::cos(x - shift.x) * std::sin(2 * (y - shift.y));
    });
    CHECK(max_abs_diff(transport_h2_exact(flow, h0, prm, t), expect) <= 1e-13);
  }
}

TEST_CASE("exact h2 is periodic and conserves the weight ratio") {
  TorusGrid g(64);
  for (double gamma : {2.0, 1.4}) {
    FlowParams prm(0.5, 1.0, gamma == 2.0 ? Family::rsw : Family::isentropic, gamma, 64);
    const ScalarField h0 = support::mixed_height(g);
    SecondApproximation approx(prm, support::mixed_velocity(g), h0);
    CHECK(max_abs_diff(approx.h2(approx.flow().invert(prm.period())), h0) <= 1e-6);
    const double t = 0.8;
    CHECK(max_abs_diff(approx.h2(approx.flow().invert(t)),
                       approx.h2(approx.flow().invert(t + prm.period()))) <= 1e-6);

    // (1/sigma + h) / phi^(gamma-1) along trajectories, with phi taken from the
    // spectral curl of u1 rather than from the transported gradient.
    const TrigInterpolant phi0_interp({relative_vorticity(approx.flow().initial_velocity(), prm.tau())});
    const TrigInterpolant h0_interp({h0});
    double worst = 0.0;
    for (double s : {0.3, 1.1, 2.4}) {
      const auto labels = approx.flow().invert(s);
      const ScalarField h2 = approx.h2(labels);
      const ScalarField phi = relative_vorticity(approx.flow().eulerian_velocity(labels), prm.tau());
      for (std::size_t i = 0; i < g.size(); i += 7) {
        const double x = labels.x0[i].x, y = labels.x0[i].y;
        const double r0 = (1.0 + h0_interp.evaluate(x, y)) / std::pow(phi0_interp.evaluate(x, y), gamma - 1);
        const double rt = (1.0 + h2[i]) / std::pow(phi[i], gamma - 1);
        worst = std::max(worst, std::abs(rt - r0));
      }
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("numeric h2 agrees with the exact construction") {
  TorusGrid g(64);
  for (double gamma : {2.0, 1.4}) {
    FlowParams prm(0.5, 1.0, gamma == 2.0 ? Family::rsw : Family::isentropic, gamma, 64);
    const ScalarField h0 = support::mixed_height(g);
    SecondApproximation approx(prm, support::mixed_velocity(g), h0);
    const double t_end = prm.period();
    const auto num = transport_h2_numeric(approx.flow(), h0, prm, t_end, prm.tau() / 200);
    REQUIRE_FALSE(num.broken_down);
    const ScalarField exact = approx.h2(approx.flow().invert(t_end));
    CHECK(max_abs_diff(num.h2, exact) <= 1e-5);
    CHECK(max_abs_diff(num.h2, h0) <= 1e-4);
    const auto half = transport_h2_numeric(approx.flow(), h0, prm, 0.5 * t_end, prm.tau() / 200);
    CHECK(max_abs_diff(half.h2, approx.h2(approx.flow().invert(0.5 * t_end))) <= 1e-5);
    if (gamma == 2.0) {
      double drift = 0.0;
      for (double v : num.integrals) drift = std::max(drift, std::abs(v - num.integrals.front()));
      CHECK(drift <= 1e-8);
    }
  }
}

TEST_CASE("numeric transport edge cases") {
  TorusGrid g(32);
  FlowParams prm(0.5, 1.0, Family::rsw, 2.0, 32);
  const ScalarField h0 = support::mixed_height(g);
  PressurelessFlow still(VectorField(g), prm.tau());
  const auto r = transport_h2_numeric(still, h0, prm, 1.0, 0.05);
  CHECK(max_abs_diff(r.h2, h0) <= 1e-15);
  PressurelessFlow moving(support::mixed_velocity(g), prm.tau());
  try {
    transport_h2_numeric(moving, h0, prm, 1.0, 1.0);
    FAIL("expected CFL refusal");
  } catch (const CflError& e) {
    CHECK(e.admissible_dt() == doctest::Approx(0.5 * g.dx() / std::hypot(0.3, 0.2)).epsilon(1e-6));
  }
}

TEST_CASE("u2 construction") {
  TorusGrid g(32);
  FlowParams prm(0.5, 0.8, Family::rsw, 2.0, 32);
  const VectorField u1 = support::mixed_velocity(g);
  CHECK(max_abs_diff(build_u2(u1, ScalarField(g, 0.3), prm, 0.7), u1) <= 1e-15);
  const ScalarField h2 = support::mixed_height(g);
  CHECK(max_abs_diff(build_u2(u1, h2, prm, prm.period()), u1) <= 1e-15);
  CHECK(max_abs_diff(build_u2(u1, h2, prm, 0.7), u1) > 1e-3);
}

TEST_CASE("u2 correction equals the frozen-pressure Duhamel integral") {
  TorusGrid g(32);
  FlowParams prm(0.4, 0.9, Family::rsw, 2.0, 32);
  const VectorField u1 = support::mixed_velocity(g);
  const ScalarField h2 = support::mixed_height(g);
  const VectorField grad = gradient(h2);
  for (double t : {0.3, 1.0, 2.2}) {
    // w' = J w / tau - grad h2 / sigma, w(0) = 0, integrated by composite Simpson.
    const int n = 2000;
    Mat2 integral_m{};
    for (int k = 0; k <= n; ++k) {
      const double s = t * k / n;
      const double wgt = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      integral_m = integral_m + (wgt * t / (3.0 * n)) * rotation((t - s) / prm.tau());
    }
    const VectorField duhamel = apply((-1.0 / prm.sigma()) * integral_m, grad);
    const VectorField correction = build_u2(u1, h2, prm, t) - u1;
    CHECK(max_abs_diff(correction, duhamel) <= 1e-12);
  }
}

TEST_CASE("u2 - u1 scales like (tau/sigma)(1 + tau/sigma)") {
  TorusGrid g(64);
  const VectorField u0 = support::mixed_velocity(g);
  const ScalarField h0 = support::mixed_height(g);
  double c_min = INFINITY, c_max = 0.0;
  for (double tau : {0.1, 0.2}) {
    for (double sigma : {0.5, 1.0}) {
      FlowParams prm(tau, sigma, Family::rsw, 2.0, 64);
      SecondApproximation approx(prm, u0, h0);
      double sup = 0.0;
      for (int k = 1; k < 8; ++k) {
        const auto a = approx.at(prm.period() * k / 8.0);
        sup = std::max(sup, sobolev_norm(a.u2 - a.u1, 4.0));
      }
      const double r = tau / sigma;
      const double c = sup / (r * (1 + r));
      c_min = std::min(c_min, c);
      c_max = std::max(c_max, c);
    }
  }
  CHECK(std::isfinite(c_max));
  CHECK(c_min > 0.0);
  CHECK(c_max / c_min <= 4.0);
}

TEST_CASE("residual vanishes for uniform flow and at full periods") {
  TorusGrid g(32);
  FlowParams prm(0.5, 1.0, Family::rsw, 2.0, 32);
  VectorField c(ScalarField(g, 0.4), ScalarField(g, 0.1));
  CHECK(linf_norm(residual_R(c, support::mixed_height(g), prm, 0.9)) <= 1e-14);
  const VectorField u1 = support::mixed_velocity(g);
  CHECK(linf_norm(residual_R(u1, support::mixed_height(g), prm, prm.period())) <= 1e-15);
  CHECK(linf_norm(residual_R(u1, support::mixed_height(g), prm, 0.9)) > 1e-3);
}

TEST_CASE("residual is the momentum defect of u2") {
  TorusGrid g(64);
  struct Case {
    Family family;
    double gamma;
    bool entropy;
  };
  for (const Case& k : {Case{Family::rsw, 2.0, false}, Case{Family::isentropic, 1.4, false},
                        Case{Family::ideal, 1.4, true}}) {
    FlowParams prm(0.5, 0.8, k.family, k.gamma, 64);
    std::optional<ScalarField> S0;
    if (k.entropy) S0 = ScalarField::sample(g, [](double x, double y) { return 0.2 * std::sin(x + y); });
    SecondApproximation approx(prm, support::mixed_velocity(g), support::mixed_height(g), S0);
    for (double t : {0.6, 1.9}) {
      const auto a = approx.at(t);
      const VectorField R = residual_R(a.u1, a.h2, prm, t, a.S2 ? &*a.S2 : nullptr);
      const VectorField D = momentum_defect(approx, t, 1e-4);
      const double scale = std::max(1.0, linf_norm(R));
      CHECK(linf_norm(R) > 1e-3);
      CHECK(max_abs_diff(D, R) <= 1e-6 * scale);
    }
  }
}

TEST_CASE("ideal family with zero entropy matches the isentropic approximation") {
  TorusGrid g(64);
  FlowParams ise(0.5, 0.8, Family::isentropic, 1.4, 64);
  FlowParams ide(0.5, 0.8, Family::ideal, 1.4, 64);
  SecondApproximation a(ise, support::mixed_velocity(g), support::mixed_height(g));
  SecondApproximation b(ide, support::mixed_velocity(g), support::mixed_height(g));
  const auto sa = a.at(1.2);
  const auto sb = b.at(1.2);
  CHECK(max_abs_diff(sa.h2, sb.h2) == 0.0);
  REQUIRE(sb.S2.has_value());
  CHECK(linf_norm(*sb.S2) == 0.0);
  // The ideal correction is assembled from grad p2 rather than grad h2; the two
  // agree up to the spectral chain-rule error.
  CHECK(max_abs_diff(sa.u2, sb.u2) <= 1e-8);
}

TEST_CASE("entropy transport") {
  TorusGrid g(64);
  FlowParams prm(0.5, 1.0, Family::ideal, 1.4, 64);
  PressurelessFlow flow(support::mixed_velocity(g), prm.tau());
  CHECK(max_abs_diff(transport_S2(flow, ScalarField(g, 0.7), 1.0), ScalarField(g, 0.7)) <= 1e-15);
  const ScalarField S0 = ScalarField::sample(g, [](double x, double y) { return std::sin(x) * std::cos(y); });
  for (double t : {0.4, 1.5, 2.9}) {
    const ScalarField s = transport_S2(flow, S0, t);
    CHECK(max_value(s) <= max_value(S0) + 1e-12);
    CHECK(min_value(s) >= min_value(S0) - 1e-12);
  }
  CHECK(max_abs_diff(transport_S2(flow, S0, prm.period()), S0) <= 1e-8);
}

TEST_CASE("vacuum guard") {
  TorusGrid g(32);
  SUBCASE("flat height under uniform flow") {
    FlowParams prm(0.1, 1.0, Family::rsw, 2.0, 32);
    SecondApproximation approx(prm, VectorField(ScalarField(g, 0.2), ScalarField(g, 0.1)), ScalarField(g));
    std::vector<ScalarField> series;
    for (int k = 0; k <= 8; ++k) series.push_back(approx.at(prm.period() * k / 8).h2);
    const auto r = vacuum_guard(series, prm);
    for (double m : r.minima) CHECK(m == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_FALSE(r.flagged);
  }
  SUBCASE("small-amplitude data with alpha0 = 0.5") {
    FlowParams prm(0.1, 1.0, Family::rsw, 2.0, 32);
    const ScalarField h0 = ScalarField::sample(g, [](double x, double) { return 0.5 * std::cos(x); });
    SecondApproximation approx(prm, support::mixed_velocity(g, 0.5), h0);
    std::vector<ScalarField> series;
    for (int k = 0; k <= 16; ++k) series.push_back(approx.at(prm.period() * k / 16).h2);
    const auto r = vacuum_guard(series, prm);
    CHECK(r.alpha0 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.minimum >= 0.25);
    CHECK_FALSE(r.flagged);
    CHECK(r.linf_ratio > 0.0);
    CHECK(std::isfinite(r.sobolev_ratio));
  }
  SUBCASE("vacuum initial data") {
    FlowParams prm(0.1, 1.0, Family::rsw, 2.0, 32);
    ScalarField h0(g, -1.2);
    CHECK_THROWS_AS(vacuum_guard({h0}, prm), VacuumError);
    CHECK_THROWS_AS(SecondApproximation(prm, VectorField(g), h0), VacuumError);
  }
}

TEST_CASE("exponential entropy estimate has a finite constant") {
  TorusGrid g(64);
  double k_fit = 0.0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const ScalarField S = random_band_limited(g, 4, 0.5, seed);
    for (double sigma : {0.25, 0.5, 1.0}) {
      const double r = exp_entropy_ratio(S, sigma, 4.0);
      CHECK(std::isfinite(r));
      k_fit = std::max(k_fit, r);
    }
  }
  CHECK(k_fit >= 1.0 - 1e-12);
  CHECK(k_fit <= 5.0);
  CHECK(exp_entropy_ratio(ScalarField(g), 1.0, 4.0) == 0.0);
}

TEST_CASE("approximation snapshot round trip") {
  TorusGrid g(32);
  FlowParams prm(0.5, 0.8, Family::ideal, 1.4, 32);
  const ScalarField S0 = ScalarField::sample(g, [](double x, double) { return 0.1 * std::cos(x); });
  SecondApproximation approx(prm, support::mixed_velocity(g), support::mixed_height(g), S0);
  const auto sol = approx.at(0.9);
  const auto stem = std::filesystem::temp_directory_path() / "rotlab_approx_snapshot";
  write_approx_snapshot(stem, sol);
  const auto back = read_approx_snapshot(stem);
  CHECK(back.t == sol.t);
  CHECK(back.params.family() == Family::ideal);
  CHECK(back.params.gamma() == 1.4);
  CHECK(max_abs_diff(back.h2, sol.h2) == 0.0);
  CHECK(max_abs_diff(back.u2, sol.u2) == 0.0);
  REQUIRE(back.S2.has_value());
  CHECK(max_abs_diff(*back.S2, *sol.S2) == 0.0);
  std::filesystem::remove(stem.string() + ".bin");
  std::filesystem::remove(stem.string() + ".json");
}
