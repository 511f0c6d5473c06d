#include "rotlab/pressureless.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "rotlab/errors.hpp"

namespace rotlab {

Mat2 Mat2::inverse() const {
  const double d = det();
  if (d == 0.0) throw DomainError("singular 2x2 matrix");
  return {a22 / d, -a12 / d, -a21 / d, a11 / d};
}

double Mat2::frobenius() const noexcept {
  return std::sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22);
}

Mat2 operator*(const Mat2& a, const Mat2& b) noexcept {
  return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
          a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

Mat2 operator+(const Mat2& a, const Mat2& b) noexcept {
  return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
}

Mat2 operator-(const Mat2& a, const Mat2& b) noexcept {
  return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
}

Mat2 operator*(double s, const Mat2& a) noexcept {
  return {s * a.a11, s * a.a12, s * a.a21, s * a.a22};
}

Vec2 operator*(const Mat2& a, const Vec2& v) noexcept {
  return {a.a11 * v.x + a.a12 * v.y, a.a21 * v.x + a.a22 * v.y};
}

Mat2 rotation(double theta) noexcept {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c, s, -s, c};
}

double threshold_margin(double omega0, double eta0sq, double tau) noexcept {
  return 1.0 - 2.0 * tau * omega0 - tau * tau * eta0sq;
}

double critical_tau(double omega0, double eta0sq) noexcept {
  // Roots of eta^2 t^2 + 2 omega t - 1 are 1/(omega +- s), s^2 = omega^2 + eta^2.
  const double disc = omega0 * omega0 + eta0sq;
  if (disc < 0.0) return kInfiniteTau;
  const double denom = omega0 + std::sqrt(disc);
  return denom > 0.0 ? 1.0 / denom : kInfiniteTau;
}

ThresholdReport threshold_analyze(const VectorField& u0, double tau) {
  const TorusGrid& g = u0.grid();
  const VelocityGradient G = velocity_gradient(u0);
  ThresholdReport r{tau, ScalarField(g), ScalarField(g), ScalarField(g), 1.0, kInfiniteTau, true, {}};
  r.margin = kInfiniteTau;
  r.tau_c = kInfiniteTau;
  for (int ix = 0; ix < g.n(); ++ix) {
    for (int iy = 0; iy < g.n(); ++iy) {
      const std::size_t i = static_cast<std::size_t>(ix) * g.n() + iy;
      const double tr = G.dx1[i] + G.dy2[i];
      const double det = G.dx1[i] * G.dy2[i] - G.dy1[i] * G.dx2[i];
      const double omega = G.dy1[i] - G.dx2[i];
      const double eta2 = tr * tr - 4.0 * det;
      r.omega0[i] = omega;
      r.eta0sq[i] = eta2;
      r.tau_c_map[i] = critical_tau(omega, eta2);
      r.tau_c = std::min(r.tau_c, r.tau_c_map[i]);
      const double m = threshold_margin(omega, eta2, tau);
      if (m < r.margin) {
        r.margin = m;
        r.extremal_point = {g.coord(ix), g.coord(iy)};
      }
    }
  }
  r.subcritical = r.margin > 0.0;
  return r;
}

Vec2 trajectory_position(Vec2 x0, Vec2 u0_at_x0, double t, double tau) noexcept {
  const Mat2 disp = tau * (kJ * (Mat2::identity() - rotation(t / tau)));
  const Vec2 d = disp * u0_at_x0;
  return {x0.x + d.x, x0.y + d.y};
}

Vec2 lagrangian_velocity(Vec2 u0_at_x0, double t, double tau) noexcept {
  return rotation(t / tau) * u0_at_x0;
}

Mat2 flow_jacobian(const Mat2& m0, double t, double tau) noexcept {
  return Mat2::identity() + tau * (kJ * (Mat2::identity() - rotation(t / tau)) * m0);
}

Mat2 gradient_matrix(const Mat2& m0, double t, double tau) {
  const Mat2 f = flow_jacobian(m0, t, tau);
  if (std::abs(f.det()) < 1e-12) {
    std::ostringstream os;
    os << "threshold breakdown: singular flow map at t=" << t << " for M0=[[" << m0.a11 << ", "
       << m0.a12 << "], [" << m0.a21 << ", " << m0.a22 << "]], tau=" << tau;
    const double m[4] = {m0.a11, m0.a12, m0.a21, m0.a22};
    throw ThresholdBreakdownError(os.str(), t, m);
  }
  return rotation(t / tau) * m0 * f.inverse();
}

std::optional<double> first_singular_time(const Mat2& m0, double tau, double t_max) {
  auto det_at = [&](double t) { return flow_jacobian(m0, t, tau).det(); };
  constexpr int kSamples = 4096;
  const double h = t_max / kSamples;
  double t_prev = 0.0;
  double best_t = 0.0;
  double best = det_at(0.0);
  std::optional<double> hit;
  for (int i = 1; i <= kSamples; ++i) {
    const double t = i * h;
    const double d = det_at(t);
    if (d <= 0.0) {
      hit = t;
      break;
    }
    if (d < best) {
      best = d;
      best_t = t;
    }
    t_prev = t;
  }
  if (!hit) {
    // det F is a shifted sinusoid in t: a single dip per period. Refine the
    // sampled minimum in case the dip below zero is narrower than the step.
    double a = std::max(0.0, best_t - h);
    double b = std::min(t_max, best_t + h);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200 && b - a > 1e-15 * t_max; ++it) {
      const double c = b - phi * (b - a);
      const double d = a + phi * (b - a);
      if (det_at(c) < det_at(d)) {
        b = d;
      } else {
        a = c;
      }
    }
    const double t_min = 0.5 * (a + b);
    if (det_at(t_min) > 0.0) return std::nullopt;
    hit = t_min;
    t_prev = std::max(0.0, best_t - h);
    // walk the left bracket to a point with positive determinant
    while (det_at(t_prev) <= 0.0 && t_prev > 0.0) t_prev = std::max(0.0, t_prev - h);
  }
  double lo = t_prev;
  double hi = *hit;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (det_at(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::abs(det_at(lo)) < std::abs(det_at(hi)) ? lo : hi;
}

ScalarField relative_vorticity(const VectorField& u1, double tau) {
  ScalarField phi = curl(u1);
  phi *= static_cast<double>(kRelativeVorticityCurlSign);
  for (double& v : phi.values()) v += 1.0 / tau;
  return phi;
}

namespace {

std::vector<ScalarField> velocity_components(const VectorField& u) { return {u.c1, u.c2}; }

}  // namespace

PressurelessFlow::PressurelessFlow(const VectorField& u0, double tau, InversionOptions options)
    : grid_(u0.grid()), tau_(tau), options_(options), u0_(u0),
      interp_(velocity_components(u0)), threshold_(threshold_analyze(u0, tau)) {
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  if (!threshold_.subcritical) {
    std::ostringstream os;
    os << "tau=" << tau << " is not sub-critical for the initial velocity (margin "
       << threshold_.margin << ", tau_c " << threshold_.tau_c << ")";
    throw DomainError(os.str());
  }
}

void PressurelessFlow::evaluate_initial(Vec2 x, Vec2& u, Mat2& grad) const {
  std::array<TrigInterpolant::Sample, 2> s;
  interp_.evaluate(x.x, x.y, std::span<TrigInterpolant::Sample>(s));
  u = {s[0].value, s[1].value};
  grad = {s[0].dx, s[0].dy, s[1].dx, s[1].dy};
}

FlowMapSample PressurelessFlow::invert(double t) const {
  const int n = grid_.n();
  FlowMapSample out;
  out.t = t;
  out.x0.resize(grid_.size());
  out.u0.resize(grid_.size());
  out.grad0.resize(grid_.size());
  const Mat2 disp = tau_ * (kJ * (Mat2::identity() - rotation(t / tau_)));
  const double tol = options_.tolerance;
  for (int ix = 0; ix < n; ++ix) {
    for (int iy = 0; iy < n; ++iy) {
      const std::size_t i = static_cast<std::size_t>(ix) * n + iy;
      const Vec2 target{grid_.coord(ix), grid_.coord(iy)};
      const Vec2 d0 = disp * Vec2{u0_.c1[i], u0_.c2[i]};
      Vec2 x0{target.x - d0.x, target.y - d0.y};
      Vec2 u;
      Mat2 grad;
      evaluate_initial(x0, u, grad);
      auto residual_of = [&](Vec2 p, Vec2 up) {
        const Vec2 d = disp * up;
        return Vec2{p.x + d.x - target.x, p.y + d.y - target.y};
      };
      Vec2 r = residual_of(x0, u);
      double res = std::max(std::abs(r.x), std::abs(r.y));
      // Newton with the analytic Jacobian; damped fixed point once Newton
      // stops making progress.
      bool newton = true;
      int it = 0;
      while (res > tol && it < options_.max_iterations) {
        ++it;
        Vec2 step = r;
        if (newton) {
          const Mat2 jac = Mat2::identity() + disp * grad;
          if (std::abs(jac.det()) > 1e-14) {
            step = jac.inverse() * r;
          } else {
            newton = false;
          }
        }
        const double lambda = newton ? 1.0 : options_.damping;
        const Vec2 trial{x0.x - lambda * step.x, x0.y - lambda * step.y};
        Vec2 ut;
        Mat2 gt;
        evaluate_initial(trial, ut, gt);
        const Vec2 rt = residual_of(trial, ut);
        const double rest = std::max(std::abs(rt.x), std::abs(rt.y));
        if (newton && rest >= res) {
          newton = false;
          continue;
        }
        x0 = trial;
        u = ut;
        grad = gt;
        r = rt;
        res = rest;
      }
      if (res > tol) {
        std::ostringstream os;
        os << "flow-map inversion failed at node (" << ix << ", " << iy << "), t=" << t
           << ", residual " << res;
        throw InversionError(os.str(), res);
      }
      out.x0[i] = x0;
      out.u0[i] = u;
      out.grad0[i] = grad;
      out.worst_residual = std::max(out.worst_residual, res);
    }
  }
  return out;
}

VectorField PressurelessFlow::eulerian_velocity(const FlowMapSample& labels) const {
  VectorField u(grid_);
  const Mat2 rot = rotation(labels.t / tau_);
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    const Vec2 v = rot * labels.u0[i];
    u.c1[i] = v.x;
    u.c2[i] = v.y;
  }
  return u;
}

VectorField PressurelessFlow::eulerian_velocity(double t) const {
  return eulerian_velocity(invert(t));
}

std::vector<Mat2> PressurelessFlow::transported_gradient(const FlowMapSample& labels) const {
  std::vector<Mat2> out(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    out[i] = gradient_matrix(labels.grad0[i], labels.t, tau_);
  }
  return out;
}

VectorField eulerian_velocity(const VectorField& u0, double t, double tau) {
  return PressurelessFlow(u0, tau).eulerian_velocity(t);
}

}  // namespace rotlab
