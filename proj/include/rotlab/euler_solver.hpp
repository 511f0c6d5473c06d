#pragma once

// Pseudo-spectral RK4 solver for the rotating systems in symmetric variables:
//   p_t + u.grad p + f(p) div u                 = 0
//   u_t + u.grad u + e^{sigma S} f(p) grad p    = (1/tau) J u
//   S_t + u.grad S                              = 0       (ideal family)
// with f(p) the coupling of approx2.hpp and S = 0 outside the ideal family.
// Every tendency is dealiased with the two-thirds rule.

#include <optional>
#include <string>
#include <vector>

#include "rotlab/approx2.hpp"
#include "rotlab/params.hpp"
#include "rotlab/torus.hpp"

namespace rotlab {

struct FlowState {
  FlowParams params;
  ScalarField p;
  VectorField u;
  std::optional<ScalarField> S;  // ideal family only
  double t = 0.0;
  bool broken_down = false;
  double breakdown_time = 0.0;

  const TorusGrid& grid() const noexcept { return p.grid(); }
};

/// Builds a state from height, velocity and (ideal) entropy. Throws VacuumError
/// for 1 + sigma h <= 0. S is dropped outside the ideal family and defaults to
/// zero inside it.
FlowState make_state(const FlowParams& params, const ScalarField& h, const VectorField& u,
                     std::optional<ScalarField> S = std::nullopt, double t = 0.0);

/// Height of a state (inverse normalization).
ScalarField state_height(const FlowState& s);

/// Switches used by reduced-dynamics checks.
struct RhsOptions {
  bool rotation = true;   // the (1/tau) J u term
  bool transport = true;  // advection and pressure terms
};

/// Time derivative of the state (same layout; t and flags unused). A
/// non-finite input raises NonFiniteError.
FlowState rhs(const FlowState& state, RhsOptions options = {});

/// The skew part K[U] = (0, Ju/tau, 0).
FlowState rotation_operator(const FlowState& state);
/// Grid quadrature of p p' + u.u' + S S'.
double inner_product(const FlowState& a, const FlowState& b);

/// Height-variable form (h, u) of the same system, kept as a cross-check.
struct HeightState {
  ScalarField h;
  VectorField u;
};
HeightState height_rhs(const HeightState& s, const FlowParams& params, RhsOptions options = {});
HeightState height_step(const HeightState& s, const FlowParams& params, double dt,
                        RhsOptions options = {});

/// Largest admissible dt: cfl dx / (max|u| + max f(p) max(1, e^{sigma S})).
double admissible_dt(const FlowState& state);

/// One classical RK4 step. Throws CflError when dt exceeds admissible_dt. A
/// non-finite input is returned unchanged with broken_down set. A
/// non-finite result is returned with broken_down set.
FlowState step(const FlowState& state, double dt, RhsOptions options = {});

struct DtPolicy {
  double dt = 0.0;                       // fixed step; 0 picks safety * admissible_dt each step
  double safety = 0.25;                  // keeps RK4 drift of mass and entropy near 1e-10 per unit time
  double breakdown_multiplier = 1e3;     // breakdown when grad_linf(u) > multiplier * initial
  double sample_interval = 0.0;          // series spacing; 0 records every step
  long max_steps = 10'000'000;
  RhsOptions rhs;
};

struct SeriesRow {
  double t;
  double grad_linf;   // max Frobenius norm of grad u
  double p_linf;
  double min_depth;   // min(1 + sigma h)
  double mass;        // integral of the density anomaly
  double entropy;     // integral of (1/sigma + rho) S, 0 without entropy
};

struct Integration {
  FlowState state;
  std::vector<SeriesRow> series;
  long steps = 0;
  double initial_gradient = 0.0;
  std::string breakdown_reason;  // "", "non_finite" or "gradient"
};

SeriesRow measure(const FlowState& state);

/// Integrates to t_end (exactly, shortening the last step) or until breakdown.
Integration integrate(const FlowState& state, double t_end, const DtPolicy& policy = {});

/// First breakdown time before t_max, if any.
std::optional<double> breakdown_time(const FlowState& state, double t_max,
                                     const DtPolicy& policy = {});

struct ErrorRecord {
  double p = 0.0;
  double u = 0.0;
  double S = 0.0;
  double h = 0.0;
  double total() const noexcept { return p + u + S; }
};

/// Sobolev-s distances between a solver state and an approximation at the same
/// time. Throws GridMismatchError for different grids and DomainError for
/// different parameters.
ErrorRecord compare_to_approx(const FlowState& state, const ApproxSolution& approx, double s);

}  // namespace rotlab
