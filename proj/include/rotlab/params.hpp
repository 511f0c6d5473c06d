#pragma once

#include <string>
#include <string_view>

namespace rotlab {

enum class Family { rsw, isentropic, ideal };

std::string_view to_string(Family f) noexcept;
/// Throws ConfigError for unknown names.
Family family_from_string(std::string_view name);

/// Nondimensional parameters of one run. delta = tau / sigma^2 is derived and
/// cached; rsw always has gamma = 2.
class FlowParams {
 public:
  FlowParams(double tau, double sigma, Family family = Family::rsw, double gamma = 2.0,
             int n = 64, double cfl = 0.5);

  static FlowParams from_tau_delta(double tau, double delta, Family family = Family::rsw,
                                   double gamma = 2.0, int n = 64, double cfl = 0.5);
  static FlowParams from_sigma_delta(double sigma, double delta, Family family = Family::rsw,
                                     double gamma = 2.0, int n = 64, double cfl = 0.5);

  double tau() const noexcept { return tau_; }
  double sigma() const noexcept { return sigma_; }
  double delta() const noexcept { return delta_; }
  double gamma() const noexcept { return gamma_; }
  Family family() const noexcept { return family_; }
  int n() const noexcept { return n_; }
  double cfl() const noexcept { return cfl_; }

  /// One rotation period, 2*pi*tau.
  double period() const noexcept;
  /// sigma <= 1: the regime the long-time estimates are stated for.
  bool pressure_dominated() const noexcept { return sigma_ <= 1.0; }

  FlowParams with_n(int n) const;

  friend bool operator==(const FlowParams&, const FlowParams&) = default;

 private:
  double tau_;
  double sigma_;
  double delta_;
  double gamma_;
  Family family_;
  int n_;
  double cfl_;
};

}  // namespace rotlab
