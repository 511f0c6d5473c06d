#include "rotlab/euler_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rotlab/errors.hpp"

namespace rotlab {

namespace {

void require_finite(const ScalarField& f, const char* name) {
  const std::size_t i = f.first_non_finite();
  if (i != f.size()) {
    std::ostringstream os;
    os << "non-finite " << name << " at index " << i;
    throw NonFiniteError(os.str(), i);
  }
}

// a + h * b on every component.
FlowState combine(const FlowState& a, double h, const FlowState& b) {
  FlowState r = a;
  r.p.axpy(h, b.p);
  r.u.c1.axpy(h, b.u.c1);
  r.u.c2.axpy(h, b.u.c2);
  if (r.S) r.S->axpy(h, *b.S);
  return r;
}

bool state_finite(const FlowState& s) {
  return s.p.finite() && s.u.c1.finite() && s.u.c2.finite() && (!s.S || s.S->finite());
}

}  // namespace

FlowState make_state(const FlowParams& params, const ScalarField& h, const VectorField& u,
                     std::optional<ScalarField> S, double t) {
  if (!(h.grid() == u.grid())) throw GridMismatchError("grid mismatch: h vs u");
  std::optional<ScalarField> entropy;
  if (params.family() == Family::ideal) {
    entropy = S ? std::move(*S) : ScalarField(h.grid());
    if (!(entropy->grid() == h.grid())) throw GridMismatchError("grid mismatch: S vs h");
  }
  return FlowState{params, normalize_height(h, params), u, std::move(entropy), t, false, 0.0};
}

ScalarField state_height(const FlowState& s) { return denormalize(s.p, s.params); }

FlowState rhs(const FlowState& s, RhsOptions options) {
  require_finite(s.p, "p");
  require_finite(s.u.c1, "u1");
  require_finite(s.u.c2, "u2");
  if (s.S) require_finite(*s.S, "S");
  const TorusGrid g = s.grid();
  const FlowParams& prm = s.params;
  FlowState d{prm, ScalarField(g), VectorField(g), std::nullopt, s.t, false, 0.0};
  if (s.S) d.S = ScalarField(g);
  if (options.transport) {
    const VectorField gp = gradient(s.p);
    const VelocityGradient G = velocity_gradient(s.u);
    const double sigma = prm.sigma(), gamma = prm.gamma();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double u = s.u.c1[i], v = s.u.c2[i];
      const double f = coupling(s.p[i], sigma, gamma);
      const double coef = s.S ? std::exp(sigma * (*s.S)[i]) * f : f;
      d.p[i] = -(u * gp.c1[i] + v * gp.c2[i] + f * (G.dx1[i] + G.dy2[i]));
      d.u.c1[i] = -(u * G.dx1[i] + v * G.dy1[i] + coef * gp.c1[i]);
      d.u.c2[i] = -(u * G.dx2[i] + v * G.dy2[i] + coef * gp.c2[i]);
    }
    d.p = dealias(d.p);
    d.u.c1 = dealias(d.u.c1);
    d.u.c2 = dealias(d.u.c2);
    if (s.S) {
      const VectorField gs = gradient(*s.S);
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*d.S)[i] = -(s.u.c1[i] * gs.c1[i] + s.u.c2[i] * gs.c2[i]);
      }
      *d.S = dealias(*d.S);
    }
  }
  if (options.rotation) {
    const double inv_tau = 1.0 / prm.tau();
    d.u.c1.axpy(inv_tau, s.u.c2);
    d.u.c2.axpy(-inv_tau, s.u.c1);
  }
  return d;
}

FlowState rotation_operator(const FlowState& s) { return rhs(s, RhsOptions{true, false}); }

double inner_product(const FlowState& a, const FlowState& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.p.size(); ++i) {
    acc += a.p[i] * b.p[i] + a.u.c1[i] * b.u.c1[i] + a.u.c2[i] * b.u.c2[i];
    if (a.S && b.S) acc += (*a.S)[i] * (*b.S)[i];
  }
  const double dx = a.grid().dx();
  return acc * dx * dx;
}

HeightState height_rhs(const HeightState& s, const FlowParams& prm, RhsOptions options) {
  const TorusGrid g = s.h.grid();
  HeightState d{ScalarField(g), VectorField(g)};
  if (options.transport) {
    const VectorField gh = gradient(s.h);
    const VelocityGradient G = velocity_gradient(s.u);
    const double c = mass_factor(prm), inv_sigma = 1.0 / prm.sigma();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double u = s.u.c1[i], v = s.u.c2[i];
      d.h[i] = -(u * gh.c1[i] + v * gh.c2[i] + c * (inv_sigma + s.h[i]) * (G.dx1[i] + G.dy2[i]));
      d.u.c1[i] = -(u * G.dx1[i] + v * G.dy1[i] + inv_sigma * gh.c1[i]);
      d.u.c2[i] = -(u * G.dx2[i] + v * G.dy2[i] + inv_sigma * gh.c2[i]);
    }
    d.h = dealias(d.h);
    d.u.c1 = dealias(d.u.c1);
    d.u.c2 = dealias(d.u.c2);
  }
  if (options.rotation) {
    d.u.c1.axpy(1.0 / prm.tau(), s.u.c2);
    d.u.c2.axpy(-1.0 / prm.tau(), s.u.c1);
  }
  return d;
}

HeightState height_step(const HeightState& s, const FlowParams& prm, double dt, RhsOptions options) {
  auto comb = [](const HeightState& a, double h, const HeightState& b) {
    HeightState r = a;
    r.h.axpy(h, b.h);
    r.u.c1.axpy(h, b.u.c1);
    r.u.c2.axpy(h, b.u.c2);
    return r;
  };
  const HeightState k1 = height_rhs(s, prm, options);
  const HeightState k2 = height_rhs(comb(s, 0.5 * dt, k1), prm, options);
  const HeightState k3 = height_rhs(comb(s, 0.5 * dt, k2), prm, options);
  const HeightState k4 = height_rhs(comb(s, dt, k3), prm, options);
  HeightState r = comb(s, dt / 6.0, k1);
  r = comb(r, dt / 3.0, k2);
  r = comb(r, dt / 3.0, k3);
  return comb(r, dt / 6.0, k4);
}

double admissible_dt(const FlowState& s) {
  const FlowParams& prm = s.params;
  double umax = 0.0, cmax = 0.0;
  for (std::size_t i = 0; i < s.p.size(); ++i) {
    umax = std::max(umax, std::hypot(s.u.c1[i], s.u.c2[i]));
    double c = std::abs(coupling(s.p[i], prm.sigma(), prm.gamma()));
    if (s.S) c *= std::max(1.0, std::exp(prm.sigma() * (*s.S)[i]));
    cmax = std::max(cmax, c);
  }
  return prm.cfl() * s.grid().dx() / (umax + cmax);
}

FlowState step(const FlowState& s, double dt, RhsOptions options) {
  if (!state_finite(s)) {
    FlowState out = s;
    out.broken_down = true;
    out.breakdown_time = s.t;
    return out;
  }
  const double limit = admissible_dt(s);
  if (!(dt > 0.0) || dt > limit) {
    std::ostringstream os;
    os << "dt=" << dt << " refused; admissible dt is " << limit;
    throw CflError(os.str(), limit);
  }
  FlowState out = s;
  try {
    const FlowState k1 = rhs(s, options);
    const FlowState k2 = rhs(combine(s, 0.5 * dt, k1), options);
    const FlowState k3 = rhs(combine(s, 0.5 * dt, k2), options);
    const FlowState k4 = rhs(combine(s, dt, k3), options);
    out = combine(s, dt / 6.0, k1);
    out = combine(out, dt / 3.0, k2);
    out = combine(out, dt / 3.0, k3);
    out = combine(out, dt / 6.0, k4);
  } catch (const NonFiniteError&) {
    out.p[0] = std::nan("");
  }
  out.t = s.t + dt;
  if (!state_finite(out)) {
    out.broken_down = true;
    out.breakdown_time = out.t;
  }
  return out;
}

SeriesRow measure(const FlowState& s) {
  const FlowParams& prm = s.params;
  const double a = normalization_scale(prm.gamma());
  const double sigma = prm.sigma();
  const double rho_power = 2.0 / (prm.gamma() - 1.0);
  double min_depth = std::numeric_limits<double>::infinity();
  double mass = 0.0, entropy = 0.0;
  for (std::size_t i = 0; i < s.p.size(); ++i) {
    const double r = 1.0 + a * sigma * s.p[i];
    // 1 + sigma h = r^2 and 1 + sigma rho = r^(2/(gamma-1)).
    min_depth = std::min(min_depth, r > 0.0 ? r * r : -r * r);
    const double density = std::pow(r, rho_power) / sigma;  // 1/sigma + rho
    mass += density - 1.0 / sigma;
    // Density-weighted, since S is only advected while 1/sigma + rho obeys continuity.
    if (s.S) entropy += density * (*s.S)[i];
  }
  const double cell = s.grid().dx() * s.grid().dx();
  return SeriesRow{s.t, grad_linf(s.u), linf_norm(s.p), min_depth, mass * cell, entropy * cell};
}

Integration integrate(const FlowState& state, double t_end, const DtPolicy& policy) {
  Integration out{state, {}, 0, 0.0, ""};
  FlowState& cur = out.state;
  out.series.push_back(measure(cur));
  out.initial_gradient = out.series.back().grad_linf;
  const double eps = 1e-12 * std::max(1.0, std::abs(t_end));
  double next_sample = cur.t + policy.sample_interval;
  while (cur.t < t_end - eps && !cur.broken_down) {
    if (out.steps >= policy.max_steps) {
      out.breakdown_reason = "max_steps";
      break;
    }
    double dt = policy.dt > 0.0 ? policy.dt : policy.safety * admissible_dt(cur);
    dt = std::min(dt, t_end - cur.t);
    cur = step(cur, dt, policy.rhs);
    ++out.steps;
    if (cur.broken_down) {
      out.breakdown_reason = "non_finite";
      break;
    }
    const SeriesRow row = measure(cur);
    if (out.initial_gradient > 0.0 && row.grad_linf > policy.breakdown_multiplier * out.initial_gradient) {
      cur.broken_down = true;
      cur.breakdown_time = cur.t;
      out.breakdown_reason = "gradient";
      out.series.push_back(row);
      break;
    }
    if (policy.sample_interval <= 0.0 || cur.t >= next_sample - eps || cur.t >= t_end - eps) {
      out.series.push_back(row);
      while (policy.sample_interval > 0.0 && next_sample <= cur.t + eps) next_sample += policy.sample_interval;
    }
  }
  return out;
}

std::optional<double> breakdown_time(const FlowState& state, double t_max, const DtPolicy& policy) {
  const Integration run = integrate(state, t_max, policy);
  if (run.state.broken_down) return run.state.breakdown_time;
  return std::nullopt;
}

ErrorRecord compare_to_approx(const FlowState& state, const ApproxSolution& approx, double s) {
  if (!(state.grid() == approx.h2.grid())) throw GridMismatchError("grid mismatch: state vs approximation");
  if (!(state.params.tau() == approx.params.tau() && state.params.sigma() == approx.params.sigma() &&
        state.params.gamma() == approx.params.gamma() && state.params.family() == approx.params.family())) {
    throw DomainError("state and approximation use different parameters");
  }
  ErrorRecord e;
  e.p = sobolev_norm(state.p - approx.p2, s);
  e.u = sobolev_norm(state.u - approx.u2, s);
  if (state.S && approx.S2) e.S = sobolev_norm(*state.S - *approx.S2, s);
  e.h = sobolev_norm(state_height(state) - approx.h2, s);
  return e;
}

}  // namespace rotlab
