#pragma once

// The periodic second approximation (h2, u2[, S2]) built on the pressureless
// velocity u1, plus the normalized-variable transforms shared with the full
// solver.
//
// Conventions for every family, with a = sqrt(gamma - 1) / 2:
//   mass:      h_t + u.grad h + (gamma - 1)(1/sigma + h) div u = 0
//   momentum:  u_t + u.grad u + (1/sigma) grad h = (1/tau) J u
//   normalized height p:  1 + a sigma p = sqrt(1 + sigma h)
// In p the system is symmetric with coupling f(p) = 2a (1/sigma + a p). For
// gamma = 2 this is the shallow-water normalization 1 + sigma p / 2.

#include <filesystem>
#include <optional>
#include <vector>

#include "rotlab/params.hpp"
#include "rotlab/pressureless.hpp"
#include "rotlab/torus.hpp"

namespace rotlab {

/// (gamma - 1); 1 for shallow water.
double mass_factor(const FlowParams& params) noexcept;
/// a = sqrt(gamma - 1) / 2 of the normalization above.
double normalization_scale(double gamma) noexcept;

/// Scalar transforms. Throw VacuumError when 1 + sigma h <= 0 (resp.
/// 1 + a sigma p <= 0).
double normalize_value(double h, double sigma, double gamma);
double denormalize_value(double p, double sigma, double gamma);
/// f(p) = 2a (1/sigma + a p); the coefficient of div u and grad p.
double coupling(double p, double sigma, double gamma) noexcept;

ScalarField normalize_height(const ScalarField& h, const FlowParams& params);
ScalarField denormalize(const ScalarField& p, const FlowParams& params);

/// Gas density rho and the transported height h: 1 + sigma h = (1 + sigma rho)^(gamma-1).
ScalarField height_from_density(const ScalarField& rho, const FlowParams& params);
ScalarField density_from_height(const ScalarField& h, const FlowParams& params);

/// min(1 + sigma h).
double vacuum_margin(const ScalarField& h, double sigma) noexcept;

struct ApproxSolution {
  double t;
  FlowParams params;
  VectorField u1;
  ScalarField h2;
  ScalarField p2;
  VectorField u2;
  std::optional<ScalarField> S2;  // ideal family only
};

/// Exact h2 at time t from the conserved ratio (1/sigma + h) / phi^(gamma-1)
/// along trajectories, phi the relative vorticity.
/// Throws VorticityDegeneracyError when phi vanishes or changes sign.
ScalarField transport_h2_exact(const PressurelessFlow& flow, const ScalarField& h0,
                               const FlowParams& params, double t);

struct NumericTransport {
  ScalarField h2;
  bool broken_down = false;
  double breakdown_time = 0.0;
  int steps = 0;
  std::vector<double> times;      // sample time of each step
  std::vector<double> integrals;  // integral of h2 at those times
};

/// Pseudo-spectral RK4 integration of the mass equation with u1 regenerated
/// from the closed form at every stage. Throws CflError when
/// dt > cfl dx / max|u0|. A non-finite state stops the run and sets
/// broken_down.
NumericTransport transport_h2_numeric(const PressurelessFlow& flow, const ScalarField& h0,
                                      const FlowParams& params, double t_end, double dt);

/// S2(t, x(t)) = S0(x0).
ScalarField transport_S2(const PressurelessFlow& flow, const ScalarField& S0, double t);

/// u2 = u1 - (tau/sigma) J (I - e^{tJ/tau}) grad h2. With S2 given (ideal
/// family) the correction is -tau J (I - e^{tJ/tau}) e^{sigma S2} f(p2) grad p2.
VectorField build_u2(const VectorField& u1, const ScalarField& h2, const FlowParams& params,
                     double t, const ScalarField* S2 = nullptr);

/// Defect of u2 in u2_t + u1.grad u2 + (1/sigma) grad h2 - (1/tau) J u2 = R:
///   R = (tau/sigma) J (I - e^{tJ/tau}) [ (grad u1)^T grad h2
///                                       + grad((gamma-1)(1/sigma + h2) div u1) ],
/// multiplied pointwise by e^{sigma S2} for the ideal family.
VectorField residual_R(const VectorField& u1, const ScalarField& h2, const FlowParams& params,
                       double t, const ScalarField* S2 = nullptr);

/// Second approximation for one data set. Holds the pressureless flow and the
/// interpolants of h0 and S0; every query is const and thread-safe.
class SecondApproximation {
 public:
  /// Throws VacuumError when min(1 + sigma h0) <= 0 and DomainError when tau
  /// is not sub-critical. For the ideal family a missing S0 means S0 = 0.
  SecondApproximation(const FlowParams& params, const VectorField& u0, const ScalarField& h0,
                      std::optional<ScalarField> S0 = std::nullopt, InversionOptions options = {});

  const FlowParams& params() const noexcept { return params_; }
  const PressurelessFlow& flow() const noexcept { return flow_; }
  const ScalarField& h0() const noexcept { return h0_; }

  /// All fields at time t through the exact (trajectory) path.
  ApproxSolution at(double t) const;
  ScalarField h2(const FlowMapSample& labels) const;
  ScalarField S2(const FlowMapSample& labels) const;

 private:
  FlowParams params_;
  PressurelessFlow flow_;
  ScalarField h0_;
  std::optional<ScalarField> S0_;
  TrigInterpolant h0_interp_;
  std::optional<TrigInterpolant> S0_interp_;
};

struct VacuumReport {
  double alpha0 = 0.0;                // min(1 + sigma h2) of the first entry
  double minimum = 0.0;               // min over the whole series
  std::vector<double> minima;         // per entry
  double linf_ratio = 0.0;            // max |p2|_inf / (1 + tau/sigma)
  double sobolev_ratio = 0.0;         // max ||p2||_s / (1 + tau/sigma)
  double sobolev_index = 0.0;
  bool flagged = false;               // some minimum <= 0
};

/// Tracks min(1 + sigma h2) and the normalized-height bounds across a series of
/// h2 snapshots. Throws VacuumError when the first entry is already vacuous.
VacuumReport vacuum_guard(const std::vector<ScalarField>& h2_series, const FlowParams& params,
                          double sobolev_index = 3.0);

/// ||e^{sigma S} - 1||_m / (sigma ||S||_m); 0 for S = 0.
double exp_entropy_ratio(const ScalarField& S, double sigma, double m);

/// Writes <stem>.bin (components h2, p2, u1, u2[, S2]) and a <stem>.json
/// sidecar {t, tau, sigma, gamma, family, n, components}.
void write_approx_snapshot(const std::filesystem::path& stem, const ApproxSolution& sol);
ApproxSolution read_approx_snapshot(const std::filesystem::path& stem);

/// Applies a constant 2x2 matrix to every sample of v.
VectorField apply(const Mat2& a, const VectorField& v);

}  // namespace rotlab
