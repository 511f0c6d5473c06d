#include "rotlab/params.hpp"

#include <cmath>

#include "rotlab/errors.hpp"
#include "rotlab/torus.hpp"

namespace rotlab {

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::rsw: return "rsw";
    case Family::isentropic: return "isentropic";
    case Family::ideal: return "ideal";
  }
  return "rsw";
}

Family family_from_string(std::string_view name) {
  if (name == "rsw") return Family::rsw;
  if (name == "isentropic") return Family::isentropic;
  if (name == "ideal") return Family::ideal;
  throw ConfigError("family", "unknown family '" + std::string(name) +
                                  "' (expected rsw, isentropic or ideal)");
}

FlowParams::FlowParams(double tau, double sigma, Family family, double gamma, int n, double cfl)
    : tau_(tau), sigma_(sigma), delta_(tau / (sigma * sigma)), gamma_(gamma), family_(family),
      n_(n), cfl_(cfl) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ConfigError("tau", "tau must be a finite positive number");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ConfigError("sigma", "sigma must be a finite positive number");
  }
  if (family == Family::rsw && gamma != 2.0) {
    throw ConfigError("gamma", "the rsw family requires gamma = 2");
  }
  if (!(gamma > 1.0)) throw ConfigError("gamma", "gamma must exceed 1");
  if (n < 16 || n % 2 != 0) throw ConfigError("n", "n must be even and >= 16");
  if (!(cfl > 0.0)) throw ConfigError("cfl", "cfl must be positive");
}

FlowParams FlowParams::from_tau_delta(double tau, double delta, Family family, double gamma,
                                      int n, double cfl) {
  if (!(delta > 0.0)) throw ConfigError("delta", "delta must be positive");
  return FlowParams(tau, std::sqrt(tau / delta), family, gamma, n, cfl);
}

FlowParams FlowParams::from_sigma_delta(double sigma, double delta, Family family,
                                        double gamma, int n, double cfl) {
  if (!(delta > 0.0)) throw ConfigError("delta", "delta must be positive");
  return FlowParams(delta * sigma * sigma, sigma, family, gamma, n, cfl);
}

double FlowParams::period() const noexcept { return kTwoPi * tau_; }

FlowParams FlowParams::with_n(int n) const {
  return FlowParams(tau_, sigma_, family_, gamma_, n, cfl_);
}

}  // namespace rotlab
