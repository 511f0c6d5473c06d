#pragma once

// Scripted studies: periodicity closure, delta sweeps of the approximation
// error and residual, life-span growth under rotation, and the tropical-ocean
// scenario. Every verdict is recomputed from the recorded series by evaluate().

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotlab/euler_solver.hpp"
#include "rotlab/params.hpp"
#include "rotlab/torus.hpp"

namespace rotlab {

// ---------------------------------------------------------------- data

/// Named analytic presets (amplitude multiplies the velocity and height):
///   zero                 u = 0, h = 0
///   shear                u = (sin(y)/2, 0), h = 0
///   rigid                u = 0.5 (-sin y, sin x), h = 0
///   storm                u = 0.5 (cos x sin y, -sin x cos y), h = 0 (vorticity -1 at the origin)
///   steepening           u = (sin(x)/2, 0), h = 0
///   random-bandlimited   Fourier modes |kx|,|ky| <= 4 with N(0,1) coefficients
///                        from mt19937_64(seed); u scaled to max 0.5, h to max
///                        0.1, then u halved until the threshold margin at tau
///                        is >= 0.5
struct DataSpec {
  std::string preset = "storm";  // preset name or path to a snapshot (h, u1, u2[, S])
  double amplitude = 1.0;
  std::uint64_t seed = 0;
  friend bool operator==(const DataSpec&, const DataSpec&) = default;
};

struct InitialData {
  ScalarField h0;
  VectorField u0;
  std::optional<ScalarField> S0;
};

const std::vector<std::string>& preset_names();
bool is_preset(const std::string& name);
/// tau is used only by random-bandlimited. Throws ConfigError for unknown
/// presets or unreadable files, GridMismatchError for a snapshot of another size.
InitialData make_data(const DataSpec& spec, const TorusGrid& grid, double tau);

// ---------------------------------------------------------------- reports

struct Series {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws DomainError when absent.
  std::size_t column(const std::string& name) const;
  std::vector<double> values(const std::string& name) const;
};

struct Verdict {
  std::string name;
  bool pass = false;
  std::string detail;
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct RunReport {
  std::string kind;                       // periodicity, sweep, lifespan, nio
  nlohmann::json summary;                 // inputs, criteria, fitted values
  std::map<std::string, Series> series;
  std::vector<Verdict> verdicts;

  bool passed() const;
};

/// Recomputes the verdicts of a report from summary["criteria"] and the series.
std::vector<Verdict> evaluate(const RunReport& report);

/// Sentinel stored in series for "no breakdown before t_max".
inline constexpr double kNoBreakdown = -1.0;

// ---------------------------------------------------------------- fits

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);
/// Least-squares slope and intercept of y against x.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y);
/// Smallest C >= 0 with eps(t) <= e^{Ct} delta / (1 - e^{Ct} delta) at every
/// sample with t > 0. eps is the error relative to the initial data norm.
double envelope_rate(const std::vector<double>& t, const std::vector<double>& eps, double delta);
/// e^{Ct} delta / (1 - e^{Ct} delta), or infinity once e^{Ct} delta >= 1.
double envelope(double C, double t, double delta);

// ---------------------------------------------------------------- studies

/// Worker count for concurrent members: ROTLAB_THREADS when set and positive,
/// else the hardware concurrency (at least 1).
int worker_count();

struct PeriodicityOptions {
  bool numeric = true;          // include the pseudo-spectral h2 path
  double numeric_dt_fraction = 1.0 / 400;  // dt = fraction * tau
  double exact_tolerance = 1e-6;
  double numeric_tolerance = 1e-4;
};

/// Deviation of u1, h2, u2 (and S2) after one period from their initial values.
RunReport periodicity_suite(const FlowParams& params, const InitialData& data,
                            const PeriodicityOptions& options = {});

struct SweepSpec {
  enum class Mode { fixed_tau, fixed_sigma };

  Family family = Family::rsw;
  double gamma = 2.0;
  DataSpec data;
  std::vector<double> deltas{0.2, 0.1, 0.05, 0.025};
  Mode mode = Mode::fixed_tau;
  double tau = 0.1;    // fixed_tau: sigma = sqrt(tau / delta)
  double sigma = 1.0;  // fixed_sigma: tau = delta sigma^2
  double t_end = 0.0;  // comparison time cap; 0 means one period
  int n = 64;
  double cfl = 0.5;
  double sobolev_index = 3.0;
  bool residual_only = false;
  double slope_min = 0.8;
  double slope_max = 1.2;
  // life-span study
  double t_max = 100.0;
  double breakdown_multiplier = 5.0;

  FlowParams member_params(double delta) const;
  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

/// Throws ConfigError naming the offending key (unknown key, wrong type or
/// invalid value).
SweepSpec sweep_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepSpec& spec);

/// Exact vs approximate error at one period (or t_end) for every delta, and
/// the log-log slope against delta. Members run concurrently.
RunReport delta_sweep(const SweepSpec& spec);

/// Breakdown times with rotation for every delta plus a non-rotating control.
RunReport lifespan_study(const SweepSpec& spec);

/// Parameters of the tropical-ocean scenario.
struct NioInputs {
  double coriolis = 1e-4;   // f [1/s]
  double length = 1e5;      // L [m]
  double depth = 1e2;       // H [m]
  double speed = 1.0;       // U [m/s]
  double gravity = 0.01;    // g [m/s^2], reduced gravity
  int n = 64;
  double amplitude = 1.0;   // storm preset multiplier
};

RunReport nio_scenario(const NioInputs& inputs = {});

}  // namespace rotlab
