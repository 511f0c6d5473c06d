#pragma once

// Closed-form solution of the pressureless rotating system
//   u_t + u.grad(u) = (1/tau) J u,   J = [[0, 1], [-1, 0]],
// along its circular particle trajectories, and the critical-threshold test
// that decides whether those trajectories ever cross.

#include <limits>
#include <optional>
#include <vector>

#include "rotlab/torus.hpp"

namespace rotlab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Row-major 2x2 matrix.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  double det() const noexcept { return a11 * a22 - a12 * a21; }
  double trace() const noexcept { return a11 + a22; }
  Mat2 inverse() const;
  Mat2 transpose() const noexcept { return {a11, a21, a12, a22}; }
  double frobenius() const noexcept;
};

Mat2 operator*(const Mat2& a, const Mat2& b) noexcept;
Mat2 operator+(const Mat2& a, const Mat2& b) noexcept;
Mat2 operator-(const Mat2& a, const Mat2& b) noexcept;
Mat2 operator*(double s, const Mat2& a) noexcept;
Vec2 operator*(const Mat2& a, const Vec2& v) noexcept;

inline constexpr Mat2 kJ{0.0, 1.0, -1.0, 0.0};

/// e^{theta J} = [[cos, sin], [-sin, cos]].
Mat2 rotation(double theta) noexcept;

inline constexpr double kInfiniteTau = std::numeric_limits<double>::infinity();

/// Margin of the trajectory-crossing criterion at one point:
/// 1 - 2 tau omega0 - tau^2 eta0^2. Positive everywhere <=> the flow map stays
/// invertible for all time.
double threshold_margin(double omega0, double eta0sq, double tau) noexcept;
/// Smallest positive root of tau^2 eta0^2 + 2 tau omega0 - 1 = 0, or
/// kInfiniteTau when there is none.
double critical_tau(double omega0, double eta0sq) noexcept;

struct ThresholdReport {
  double tau = 0.0;
  ScalarField omega0;    // d_y u1 - d_x u2
  ScalarField eta0sq;    // (tr grad u0)^2 - 4 det grad u0, may be negative
  ScalarField tau_c_map; // pointwise critical tau (kInfiniteTau where none)
  double margin = 1.0;   // min over the grid of threshold_margin
  double tau_c = kInfiniteTau;
  bool subcritical = true;
  Vec2 extremal_point;   // grid node attaining the margin minimum
};

ThresholdReport threshold_analyze(const VectorField& u0, double tau);

/// x0 + tau J (I - e^{tJ/tau}) u0, not wrapped onto the torus.
Vec2 trajectory_position(Vec2 x0, Vec2 u0_at_x0, double t, double tau) noexcept;
/// e^{tJ/tau} u0.
Vec2 lagrangian_velocity(Vec2 u0_at_x0, double t, double tau) noexcept;
/// Jacobian of the flow map x0 -> x(t): I + tau J (I - e^{tJ/tau}) M0.
Mat2 flow_jacobian(const Mat2& m0, double t, double tau) noexcept;

/// Velocity gradient (d_j u_i) at time t along the trajectory starting with
/// gradient m0: e^{tJ/tau} M0 F^{-1}, F the flow-map Jacobian. Solves
/// M' + M^2 = (1/tau) J M. Throws ThresholdBreakdownError when |det F| < 1e-12.
Mat2 gradient_matrix(const Mat2& m0, double t, double tau);

/// First time in (0, t_max] where det F reaches zero, located by sampling
/// and bisection to machine precision; nullopt if F stays non-singular.
std::optional<double> first_singular_time(const Mat2& m0, double tau, double t_max);

/// Curl sign used for the relative vorticity phi = s (d_x u2 - d_y u1) + 1/tau.
/// Fixed by the requirement that phi solve phi_t + div(u phi) = 0.
inline constexpr int kRelativeVorticityCurlSign = +1;

ScalarField relative_vorticity(const VectorField& u1, double tau);

/// Options for inverting the flow map.
struct InversionOptions {
  double tolerance = 1e-12;
  int max_iterations = 200;
  double damping = 0.5;
};

/// Lagrangian labels of every grid node at one time: the departure point x0
/// (unwrapped), u0(x0) and grad u0(x0).
struct FlowMapSample {
  double t = 0.0;
  std::vector<Vec2> x0;
  std::vector<Vec2> u0;
  std::vector<Mat2> grad0;
  double worst_residual = 0.0;
};

/// The pressureless solution generated by u0. Stateless after construction;
/// safe to query from several threads.
class PressurelessFlow {
 public:
  /// Throws DomainError when tau is not sub-critical for u0.
  PressurelessFlow(const VectorField& u0, double tau, InversionOptions options = {});

  const TorusGrid& grid() const noexcept { return grid_; }
  double tau() const noexcept { return tau_; }
  const VectorField& initial_velocity() const noexcept { return u0_; }
  const ThresholdReport& threshold() const noexcept { return threshold_; }

  /// Departure points of all grid nodes at time t.
  FlowMapSample invert(double t) const;
  /// u1(t, .) on the grid.
  VectorField eulerian_velocity(double t) const;
  VectorField eulerian_velocity(const FlowMapSample& labels) const;
  /// grad u1(t, .) on the grid, transported with gradient_matrix.
  std::vector<Mat2> transported_gradient(const FlowMapSample& labels) const;

  /// u0 and grad u0 at an arbitrary point.
  void evaluate_initial(Vec2 x, Vec2& u, Mat2& grad) const;

 private:
  TorusGrid grid_;
  double tau_;
  InversionOptions options_;
  VectorField u0_;
  TrigInterpolant interp_;
  ThresholdReport threshold_;
};

/// Convenience wrapper over PressurelessFlow.
VectorField eulerian_velocity(const VectorField& u0, double t, double tau);

}  // namespace rotlab
