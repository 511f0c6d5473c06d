#pragma once

// Uniform fields on the 2*pi-periodic torus and their spectral calculus.

#include <complex>
#include <cstdint>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rotlab {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

enum class Axis { x, y };

/// Square n x n grid on [0, 2*pi)^2. Sample (ix, iy) sits at (ix*dx, iy*dx)
/// and is stored at index ix*n + iy.
class TorusGrid {
 public:
  explicit TorusGrid(int n);

  int n() const noexcept { return n_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(n_) * n_; }
  double dx() const noexcept { return kTwoPi / n_; }
  double coord(int i) const noexcept { return i * dx(); }

  /// Signed wavenumber of FFT index i along the full axis, in (-n/2, n/2].
  int wavenumber(int i) const noexcept { return i <= n_ / 2 ? i : i - n_; }

  /// Number of stored complex coefficients in the half spectrum.
  std::size_t spectral_size() const noexcept {
    return static_cast<std::size_t>(n_) * (n_ / 2 + 1);
  }

  friend bool operator==(const TorusGrid&, const TorusGrid&) = default;

 private:
  int n_;
};

class ScalarField {
 public:
  explicit ScalarField(TorusGrid grid, double fill = 0.0);
  ScalarField(TorusGrid grid, std::vector<double> values);

  /// Samples fn(x, y) at every grid node.
  static ScalarField sample(TorusGrid grid, const std::function<double(double, double)>& fn);

  const TorusGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(int ix, int iy) { return values_[static_cast<std::size_t>(ix) * grid_.n() + iy]; }
  double at(int ix, int iy) const {
    return values_[static_cast<std::size_t>(ix) * grid_.n() + iy];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Index of the first NaN/Inf sample, or size() when all are finite.
  std::size_t first_non_finite() const noexcept;
  bool finite() const noexcept { return first_non_finite() == size(); }

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double a);
  /// this += a * o
  ScalarField& axpy(double a, const ScalarField& o);

 private:
  TorusGrid grid_;
  std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double a, ScalarField f);
/// Pointwise product (no dealiasing).
ScalarField hadamard(const ScalarField& a, const ScalarField& b);

struct VectorField {
  VectorField(ScalarField first, ScalarField second);
  explicit VectorField(TorusGrid grid) : c1(grid), c2(grid) {}

  const TorusGrid& grid() const noexcept { return c1.grid(); }

  ScalarField c1;
  ScalarField c2;
};

VectorField operator+(const VectorField& a, const VectorField& b);
VectorField operator-(const VectorField& a, const VectorField& b);

/// Half-spectrum coefficients normalized so that coefficient (0,0) is the mean.
/// Entry (ix, ky) with ix in [0, n) and ky in [0, n/2] lives at ix*(n/2+1)+ky.
class Spectrum {
 public:
  explicit Spectrum(TorusGrid grid);

  const TorusGrid& grid() const noexcept { return grid_; }
  std::complex<double>& at(int ix, int ky) {
    return c_[static_cast<std::size_t>(ix) * (grid_.n() / 2 + 1) + ky];
  }
  std::complex<double> at(int ix, int ky) const {
    return c_[static_cast<std::size_t>(ix) * (grid_.n() / 2 + 1) + ky];
  }
  std::span<std::complex<double>> coefficients() noexcept { return c_; }
  std::span<const std::complex<double>> coefficients() const noexcept { return c_; }

 private:
  TorusGrid grid_;
  std::vector<std::complex<double>> c_;
};

Spectrum forward(const ScalarField& f);
ScalarField inverse(const Spectrum& s);

/// Multiplies by i*k along `axis`; the Nyquist coefficient is zeroed.
void differentiate(Spectrum& s, Axis axis);
/// Zeroes every coefficient with max(|kx|, |ky|) > n/3.
void truncate_two_thirds(Spectrum& s);

/// d f / d axis. Throws NonFiniteError naming the first bad index.
ScalarField spectral_derivative(const ScalarField& f, Axis axis);
ScalarField dealias(const ScalarField& f);
/// Product a*b followed by two-thirds truncation.
ScalarField dealiased_product(const ScalarField& a, const ScalarField& b);

VectorField gradient(const ScalarField& f);
ScalarField divergence(const VectorField& v);
/// d_x v2 - d_y v1
ScalarField curl(const VectorField& v);

/// (d_j v_i) at every node, as four fields (d_x v1, d_y v1, d_x v2, d_y v2).
struct VelocityGradient {
  ScalarField dx1, dy1, dx2, dy2;
};
VelocityGradient velocity_gradient(const VectorField& v);

/// ( (2 pi)^2 sum_k (1+|k|^2)^s |f_k|^2 )^(1/2) with f_0 the mean.
double sobolev_norm(const ScalarField& f, double s);
/// Component-wise Sobolev norms combined in the l2 sense.
double sobolev_norm(const VectorField& v, double s);

double linf_norm(const ScalarField& f);
double linf_norm(const VectorField& v);
/// max over the grid of the Frobenius norm of the spectral gradient of v.
double grad_linf(const VectorField& v);

double mean(const ScalarField& f);
/// Grid quadrature of f over [0, 2pi)^2.
double integral(const ScalarField& f);
double min_value(const ScalarField& f);
double max_value(const ScalarField& f);

/// Evaluates band-limited trigonometric interpolants of one or more fields at
/// arbitrary points. Exact for fields resolved on the grid; coefficients below
/// 1e-15 of the largest one are dropped so sparse spectra evaluate quickly.
class TrigInterpolant {
 public:
  struct Sample {
    double value = 0.0;
    double dx = 0.0;
    double dy = 0.0;
  };

  explicit TrigInterpolant(const std::vector<ScalarField>& components);

  std::size_t components() const noexcept { return ncomp_; }
  std::size_t active_modes() const noexcept { return modes_.size(); }

  void evaluate(double x, double y, std::span<double> out) const;
  void evaluate(double x, double y, std::span<Sample> out) const;
  double evaluate(double x, double y) const;

 private:
  struct Mode {
    int kx;
    int ky;
    double weight;
  };
  void phases(double x, double y, std::vector<std::complex<double>>& ex,
              std::vector<std::complex<double>>& ey) const;

  std::size_t ncomp_;
  std::vector<Mode> modes_;
  std::vector<std::complex<double>> coeff_;  // [mode * ncomp + comp]
  int kx_min_ = 0;
  int kx_max_ = 0;
  int ky_max_ = 0;
};

/// Wraps a coordinate difference into (-pi, pi].
double wrap_difference(double d) noexcept;
/// Wraps a coordinate into [0, 2pi).
double wrap_coordinate(double x) noexcept;

// Binary snapshots: "RTLB", u32 version, u32 n, u32 component count, then
// little-endian float64 samples, row-major, one component after another.
inline constexpr std::uint32_t kSnapshotVersion = 1;
void write_snapshot(const std::filesystem::path& path, const std::vector<ScalarField>& components);
std::vector<ScalarField> read_snapshot(const std::filesystem::path& path);

}  // namespace rotlab
