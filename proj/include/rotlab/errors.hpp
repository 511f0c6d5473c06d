#pragma once

#include <stdexcept>
#include <string>

namespace rotlab {

/// Base class for every error raised by the library. `kind()` is a short
/// machine-readable tag used by the command-line front end.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::size_t index)
      : Error("non_finite", what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class GridMismatchError : public Error {
 public:
  explicit GridMismatchError(const std::string& what) : Error("grid_mismatch", what) {}
};

/// Singular flow-map Jacobian: the pressureless solution has lost C^1.
class ThresholdBreakdownError : public Error {
 public:
  ThresholdBreakdownError(const std::string& what, double t, const double (&m0)[4])
      : Error("threshold_breakdown", what), t_(t) {
    for (int i = 0; i < 4; ++i) m0_[i] = m0[i];
  }
  double time() const noexcept { return t_; }
  /// Initial gradient matrix, row-major.
  const double* initial_gradient() const noexcept { return m0_; }

 private:
  double t_;
  double m0_[4];
};

class InversionError : public Error {
 public:
  InversionError(const std::string& what, double worst_residual)
      : Error("flow_map_inversion", what), worst_residual_(worst_residual) {}
  double worst_residual() const noexcept { return worst_residual_; }

 private:
  double worst_residual_;
};

class VorticityDegeneracyError : public Error {
 public:
  explicit VorticityDegeneracyError(const std::string& what)
      : Error("vorticity_degeneracy", what) {}
};

class VacuumError : public Error {
 public:
  VacuumError(const std::string& what, double minimum)
      : Error("vacuum", what), minimum_(minimum) {}
  /// Smallest value of 1 + sigma*h found.
  double minimum() const noexcept { return minimum_; }

 private:
  double minimum_;
};

class CflError : public Error {
 public:
  CflError(const std::string& what, double admissible_dt)
      : Error("cfl", what), admissible_dt_(admissible_dt) {}
  double admissible_dt() const noexcept { return admissible_dt_; }

 private:
  double admissible_dt_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config", what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace rotlab
