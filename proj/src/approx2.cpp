#include "rotlab/approx2.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rotlab/errors.hpp"

namespace rotlab {

double mass_factor(const FlowParams& params) noexcept { return params.gamma() - 1.0; }

double normalization_scale(double gamma) noexcept { return 0.5 * std::sqrt(gamma - 1.0); }

double normalize_value(double h, double sigma, double gamma) {
  const double q = 1.0 + sigma * h;
  if (!(q > 0.0)) {
    std::ostringstream os;
    os << "vacuum: 1 + sigma*h = " << q << " <= 0";
    throw VacuumError(os.str(), q);
  }
  // (sqrt(q) - 1) / (a sigma) without the cancellation for small sigma h.
  return h / (normalization_scale(gamma) * (std::sqrt(q) + 1.0));
}

double denormalize_value(double p, double sigma, double gamma) {
  const double a = normalization_scale(gamma);
  const double r = 1.0 + a * sigma * p;
  if (!(r > 0.0)) {
    std::ostringstream os;
    os << "vacuum: 1 + a*sigma*p = " << r << " <= 0";
    throw VacuumError(os.str(), r);
  }
  return p * a * (2.0 + a * sigma * p);
}

double coupling(double p, double sigma, double gamma) noexcept {
  const double a = normalization_scale(gamma);
  return 2.0 * a * (1.0 / sigma + a * p);
}

namespace {

template <typename F>
ScalarField map_values(const ScalarField& f, F&& fn) {
  ScalarField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = fn(f[i]);
  return out;
}

void require_non_vacuum(const ScalarField& h, double sigma) {
  const double m = vacuum_margin(h, sigma);
  if (!(m > 0.0)) {
    std::ostringstream os;
    os << "vacuum: min(1 + sigma*h) = " << m << " <= 0";
    throw VacuumError(os.str(), m);
  }
}

}  // namespace

ScalarField normalize_height(const ScalarField& h, const FlowParams& params) {
  require_non_vacuum(h, params.sigma());
  return map_values(h, [&](double v) { return normalize_value(v, params.sigma(), params.gamma()); });
}

ScalarField denormalize(const ScalarField& p, const FlowParams& params) {
  return map_values(p, [&](double v) { return denormalize_value(v, params.sigma(), params.gamma()); });
}

ScalarField height_from_density(const ScalarField& rho, const FlowParams& params) {
  const double s = params.sigma(), g = params.gamma();
  require_non_vacuum(rho, s);
  return map_values(rho, [&](double r) { return (std::pow(1.0 + s * r, g - 1.0) - 1.0) / s; });
}

ScalarField density_from_height(const ScalarField& h, const FlowParams& params) {
  const double s = params.sigma(), g = params.gamma();
  require_non_vacuum(h, s);
  return map_values(h, [&](double v) { return (std::pow(1.0 + s * v, 1.0 / (g - 1.0)) - 1.0) / s; });
}

double vacuum_margin(const ScalarField& h, double sigma) noexcept {
  double m = std::numeric_limits<double>::infinity();
  for (double v : h.values()) m = std::min(m, 1.0 + sigma * v);
  return m;
}

VectorField apply(const Mat2& a, const VectorField& v) {
  VectorField out(v.grid());
  for (std::size_t i = 0; i < v.c1.size(); ++i) {
    out.c1[i] = a.a11 * v.c1[i] + a.a12 * v.c2[i];
    out.c2[i] = a.a21 * v.c1[i] + a.a22 * v.c2[i];
  }
  return out;
}

namespace {

// J (I - e^{tJ/tau}).
Mat2 rotation_gap(double t, double tau) { return kJ * (Mat2::identity() - rotation(t / tau)); }

ScalarField exact_h2(const FlowMapSample& labels, const TrigInterpolant& h0, const FlowParams& params,
                     TorusGrid grid) {
  const double tau = params.tau();
  const double w_shift = 1.0 / params.sigma();
  const double c = mass_factor(params);
  ScalarField h2(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Mat2& g0 = labels.grad0[i];
    const double phi0 = g0.a21 - g0.a12 + 1.0 / tau;
    const Mat2 m = gradient_matrix(g0, labels.t, tau);
    const double phi = m.a21 - m.a12 + 1.0 / tau;
    const double ratio = phi / phi0;
    if (!(std::abs(phi0) > 1e-12) || !(ratio > 0.0)) {
      std::ostringstream os;
      os << "vorticity degeneracy: relative vorticity " << phi0 << " -> " << phi << " at node "
         << i << ", t=" << labels.t;
      throw VorticityDegeneracyError(os.str());
    }
    const double w0 = w_shift + h0.evaluate(labels.x0[i].x, labels.x0[i].y);
    h2[i] = w0 * std::pow(ratio, c) - w_shift;
  }
  return h2;
}

ScalarField transported_scalar(const FlowMapSample& labels, const TrigInterpolant& s0, TorusGrid grid) {
  ScalarField out(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = s0.evaluate(labels.x0[i].x, labels.x0[i].y);
  return out;
}

void require_same_grid(const TorusGrid& a, const TorusGrid& b, const char* what) {
  if (!(a == b)) throw GridMismatchError(std::string("grid mismatch: ") + what);
}

}  // namespace

ScalarField transport_h2_exact(const PressurelessFlow& flow, const ScalarField& h0,
                               const FlowParams& params, double t) {
  require_same_grid(flow.grid(), h0.grid(), "h0 vs u0");
  const TrigInterpolant interp({h0});
  return exact_h2(flow.invert(t), interp, params, flow.grid());
}

NumericTransport transport_h2_numeric(const PressurelessFlow& flow, const ScalarField& h0,
                                      const FlowParams& params, double t_end, double dt) {
  require_same_grid(flow.grid(), h0.grid(), "h0 vs u0");
  const TorusGrid grid = flow.grid();
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  double speed = 0.0;
  const VectorField& u0 = flow.initial_velocity();
  for (std::size_t i = 0; i < grid.size(); ++i) speed = std::max(speed, std::hypot(u0.c1[i], u0.c2[i]));
  // |u1| is carried unchanged along trajectories, so max|u0| bounds it for all t.
  if (speed > 0.0) {
    const double admissible = params.cfl() * grid.dx() / speed;
    if (dt > admissible) {
      std::ostringstream os;
      os << "dt=" << dt << " violates the CFL bound " << admissible;
      throw CflError(os.str(), admissible);
    }
  }
  const int steps = std::max(1, static_cast<int>(std::ceil(t_end / dt - 1e-9)));
  const double h = t_end / steps;
  const double inv_sigma = 1.0 / params.sigma();
  const double c = mass_factor(params);

  struct Velocity {
    VectorField u;
    ScalarField div;
  };
  auto velocity_at = [&](double t) {
    VectorField u = flow.eulerian_velocity(t);
    ScalarField d = divergence(u);
    return Velocity{std::move(u), std::move(d)};
  };
  auto rhs = [&](const ScalarField& hh, const Velocity& v) {
    const ScalarField hx = spectral_derivative(hh, Axis::x);
    const ScalarField hy = spectral_derivative(hh, Axis::y);
    ScalarField out(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out[i] = -(v.u.c1[i] * hx[i] + v.u.c2[i] * hy[i] + c * (inv_sigma + hh[i]) * v.div[i]);
    }
    return dealias(out);
  };

  NumericTransport res{h0, false, 0.0, 0, {}, {}};
  res.times.push_back(0.0);
  res.integrals.push_back(integral(h0));
  Velocity now = velocity_at(0.0);
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const Velocity mid = velocity_at(t + 0.5 * h);
    Velocity end = velocity_at(t + h);
    const ScalarField& y = res.h2;
    const ScalarField k1 = rhs(y, now);
    ScalarField tmp = y;
    tmp.axpy(0.5 * h, k1);
    const ScalarField k2 = rhs(tmp, mid);
    tmp = y;
    tmp.axpy(0.5 * h, k2);
    const ScalarField k3 = rhs(tmp, mid);
    tmp = y;
    tmp.axpy(h, k3);
    const ScalarField k4 = rhs(tmp, end);
    ScalarField next = y;
    next.axpy(h / 6.0, k1);
    next.axpy(h / 3.0, k2);
    next.axpy(h / 3.0, k3);
    next.axpy(h / 6.0, k4);
    res.steps = k + 1;
    if (!next.finite()) {
      res.broken_down = true;
      res.breakdown_time = t + h;
      break;
    }
    res.h2 = std::move(next);
    res.times.push_back(t + h);
    res.integrals.push_back(integral(res.h2));
    now = std::move(end);
  }
  return res;
}

ScalarField transport_S2(const PressurelessFlow& flow, const ScalarField& S0, double t) {
  require_same_grid(flow.grid(), S0.grid(), "S0 vs u0");
  const TrigInterpolant interp({S0});
  return transported_scalar(flow.invert(t), interp, flow.grid());
}

VectorField build_u2(const VectorField& u1, const ScalarField& h2, const FlowParams& params,
                     double t, const ScalarField* S2) {
  require_same_grid(u1.grid(), h2.grid(), "u1 vs h2");
  const Mat2 gap = rotation_gap(t, params.tau());
  VectorField correction(u1.grid());
  if (S2 != nullptr) {
    require_same_grid(u1.grid(), S2->grid(), "u1 vs S2");
    const ScalarField p2 = normalize_height(h2, params);
    const VectorField gp = gradient(p2);
    ScalarField coef(u1.grid());
    for (std::size_t i = 0; i < coef.size(); ++i) {
      coef[i] = std::exp(params.sigma() * (*S2)[i]) * coupling(p2[i], params.sigma(), params.gamma());
    }
    correction = apply((-params.tau()) * gap,
                       VectorField(dealiased_product(coef, gp.c1), dealiased_product(coef, gp.c2)));
  } else {
    correction = apply((-params.tau() / params.sigma()) * gap, gradient(h2));
  }
  return u1 + correction;
}

VectorField residual_R(const VectorField& u1, const ScalarField& h2, const FlowParams& params,
                       double t, const ScalarField* S2) {
  require_same_grid(u1.grid(), h2.grid(), "u1 vs h2");
  const TorusGrid grid = u1.grid();
  const VelocityGradient G = velocity_gradient(u1);
  const VectorField g = gradient(h2);
  const double c = mass_factor(params);
  const double inv_sigma = 1.0 / params.sigma();
  ScalarField bx(grid), by(grid), q(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    bx[i] = G.dx1[i] * g.c1[i] + G.dx2[i] * g.c2[i];
    by[i] = G.dy1[i] * g.c1[i] + G.dy2[i] * g.c2[i];
    q[i] = c * (inv_sigma + h2[i]) * (G.dx1[i] + G.dy2[i]);
  }
  const VectorField gq = gradient(dealias(q));
  VectorField b(dealias(bx) + gq.c1, dealias(by) + gq.c2);
  if (S2 != nullptr) {
    require_same_grid(grid, S2->grid(), "u1 vs S2");
    ScalarField e(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) e[i] = std::exp(params.sigma() * (*S2)[i]);
    b = VectorField(dealiased_product(e, b.c1), dealiased_product(e, b.c2));
  }
  return apply((params.tau() / params.sigma()) * rotation_gap(t, params.tau()), b);
}

SecondApproximation::SecondApproximation(const FlowParams& params, const VectorField& u0,
                                         const ScalarField& h0, std::optional<ScalarField> S0,
                                         InversionOptions options)
    : params_(params), flow_(u0, params.tau(), options), h0_(h0), S0_(std::move(S0)),
      h0_interp_({h0}) {
  require_same_grid(u0.grid(), h0.grid(), "h0 vs u0");
  require_non_vacuum(h0, params.sigma());
  if (params.family() == Family::ideal) {
    if (!S0_) S0_ = ScalarField(u0.grid());
    require_same_grid(u0.grid(), S0_->grid(), "S0 vs u0");
    S0_interp_.emplace(std::vector<ScalarField>{*S0_});
  } else {
    S0_.reset();
  }
}

ScalarField SecondApproximation::h2(const FlowMapSample& labels) const {
  return exact_h2(labels, h0_interp_, params_, flow_.grid());
}

ScalarField SecondApproximation::S2(const FlowMapSample& labels) const {
  if (!S0_interp_) return ScalarField(flow_.grid());
  return transported_scalar(labels, *S0_interp_, flow_.grid());
}

ApproxSolution SecondApproximation::at(double t) const {
  const FlowMapSample labels = flow_.invert(t);
  VectorField u1 = flow_.eulerian_velocity(labels);
  // At t = 0 the flow map is the identity; skip the roundoff of the closed form.
  ScalarField h = t == 0.0 ? h0_ : h2(labels);
  ScalarField p = normalize_height(h, params_);
  std::optional<ScalarField> s;
  if (S0_interp_) s = S2(labels);
  VectorField u2 = build_u2(u1, h, params_, t, s ? &*s : nullptr);
  return ApproxSolution{t, params_, std::move(u1), std::move(h), std::move(p), std::move(u2), std::move(s)};
}

VacuumReport vacuum_guard(const std::vector<ScalarField>& h2_series, const FlowParams& params,
                          double sobolev_index) {
  VacuumReport r;
  r.sobolev_index = sobolev_index;
  if (h2_series.empty()) return r;
  r.alpha0 = vacuum_margin(h2_series.front(), params.sigma());
  if (!(r.alpha0 > 0.0)) {
    std::ostringstream os;
    os << "vacuum initial data: min(1 + sigma*h0) = " << r.alpha0;
    throw VacuumError(os.str(), r.alpha0);
  }
  r.minimum = r.alpha0;
  const double scale = 1.0 + params.tau() / params.sigma();
  for (const ScalarField& h : h2_series) {
    const double m = vacuum_margin(h, params.sigma());
    r.minima.push_back(m);
    r.minimum = std::min(r.minimum, m);
    if (!(m > 0.0)) {
      r.flagged = true;
      continue;
    }
    const ScalarField p = normalize_height(h, params);
    r.linf_ratio = std::max(r.linf_ratio, linf_norm(p) / scale);
    r.sobolev_ratio = std::max(r.sobolev_ratio, sobolev_norm(p, sobolev_index) / scale);
  }
  return r;
}

double exp_entropy_ratio(const ScalarField& S, double sigma, double m) {
  const double base = sobolev_norm(S, m);
  if (base == 0.0) return 0.0;
  const ScalarField e = map_values(S, [&](double v) { return std::expm1(sigma * v); });
  return sobolev_norm(e, m) / (sigma * base);
}

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

void write_approx_snapshot(const std::filesystem::path& stem, const ApproxSolution& sol) {
  std::vector<ScalarField> comps{sol.h2, sol.p2, sol.u1.c1, sol.u1.c2, sol.u2.c1, sol.u2.c2};
  std::vector<std::string> names{"h2", "p2", "u1_x", "u1_y", "u2_x", "u2_y"};
  if (sol.S2) {
    comps.push_back(*sol.S2);
    names.push_back("S2");
  }
  const auto bin = with_suffix(stem, ".bin");
  const auto side = with_suffix(stem, ".json");
  const auto bin_tmp = with_suffix(stem, ".bin.tmp");
  const auto side_tmp = with_suffix(stem, ".json.tmp");
  write_snapshot(bin_tmp, comps);
  nlohmann::json j = {{"t", sol.t},
                      {"tau", sol.params.tau()},
                      {"sigma", sol.params.sigma()},
                      {"gamma", sol.params.gamma()},
                      {"family", std::string(to_string(sol.params.family()))},
                      {"n", sol.params.n()},
                      {"components", names}};
  {
    std::ofstream os(side_tmp);
    os << j.dump(2) << '\n';
    if (!os) throw Error("io", "cannot write " + side_tmp.string());
  }
  std::filesystem::rename(bin_tmp, bin);
  std::filesystem::rename(side_tmp, side);
}

ApproxSolution read_approx_snapshot(const std::filesystem::path& stem) {
  std::ifstream is(with_suffix(stem, ".json"));
  if (!is) throw Error("io", "cannot read " + with_suffix(stem, ".json").string());
  const nlohmann::json j = nlohmann::json::parse(is);
  const FlowParams params(j.at("tau").get<double>(), j.at("sigma").get<double>(),
                          family_from_string(j.at("family").get<std::string>()),
                          j.at("gamma").get<double>(), j.at("n").get<int>());
  auto comps = read_snapshot(with_suffix(stem, ".bin"));
  if (comps.size() < 6) throw Error("io", "approximation snapshot needs at least 6 components");
  std::optional<ScalarField> s;
  if (comps.size() > 6) s = comps[6];
  return ApproxSolution{j.at("t").get<double>(), params,
                        VectorField(comps[2], comps[3]), comps[0], comps[1],
                        VectorField(comps[4], comps[5]), std::move(s)};
}

}  // namespace rotlab
