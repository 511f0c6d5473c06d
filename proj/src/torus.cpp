#include "rotlab/torus.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include "rotlab/errors.hpp"

namespace rotlab {

namespace {

struct FftPlans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
  ~FftPlans() {
    if (r2c) fftw_destroy_plan(r2c);
    if (c2r) fftw_destroy_plan(c2r);
  }
};

// The FFTW planner is not thread-safe; execution with the new-array
// interface is.
const FftPlans& plans_for(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<FftPlans>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<FftPlans>();
    const std::size_t real_size = static_cast<std::size_t>(n) * n;
    const std::size_t complex_size = static_cast<std::size_t>(n) * (n / 2 + 1);
    double* r = fftw_alloc_real(real_size);
    fftw_complex* c = fftw_alloc_complex(complex_size);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    slot->r2c = fftw_plan_dft_r2c_2d(n, n, r, c, flags);
    slot->c2r = fftw_plan_dft_c2r_2d(n, n, c, r, flags);
    fftw_free(r);
    fftw_free(c);
  }
  return *slot;
}

double mode_weight(int ky, int n) { return (ky == 0 || 2 * ky == n) ? 1.0 : 2.0; }

void require_same_grid(const TorusGrid& a, const TorusGrid& b) {
  if (!(a == b)) {
    throw GridMismatchError("fields live on different grids (n=" + std::to_string(a.n()) +
                            " vs n=" + std::to_string(b.n()) + ")");
  }
}

void require_finite(const ScalarField& f, const char* what) {
  const std::size_t bad = f.first_non_finite();
  if (bad != f.size()) {
    std::ostringstream os;
    os << what << ": non-finite sample at index " << bad << " (ix=" << bad / f.grid().n()
       << ", iy=" << bad % f.grid().n() << ")";
    throw NonFiniteError(os.str(), bad);
  }
}

}  // namespace

TorusGrid::TorusGrid(int n) : n_(n) {
  if (n < 16 || n % 2 != 0) {
    throw DomainError("grid size must be even and >= 16, got " + std::to_string(n));
  }
}

ScalarField::ScalarField(TorusGrid grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

ScalarField::ScalarField(TorusGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw GridMismatchError("expected " + std::to_string(grid_.size()) + " samples, got " +
                            std::to_string(values_.size()));
  }
}

ScalarField ScalarField::sample(TorusGrid grid,
                                const std::function<double(double, double)>& fn) {
  ScalarField f(grid);
  for (int ix = 0; ix < grid.n(); ++ix) {
    for (int iy = 0; iy < grid.n(); ++iy) f.at(ix, iy) = fn(grid.coord(ix), grid.coord(iy));
  }
  return f;
}

std::size_t ScalarField::first_non_finite() const noexcept {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) return i;
  }
  return values_.size();
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

ScalarField& ScalarField::operator*=(double a) {
  for (double& v : values_) v *= a;
  return *this;
}

ScalarField& ScalarField::axpy(double a, const ScalarField& o) {
  require_same_grid(grid_, o.grid_);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * o.values_[i];
  return *this;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double a, ScalarField f) { return f *= a; }

ScalarField hadamard(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid(), b.grid());
  ScalarField out(a.grid());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

VectorField::VectorField(ScalarField first, ScalarField second)
    : c1(std::move(first)), c2(std::move(second)) {
  require_same_grid(c1.grid(), c2.grid());
}

VectorField operator+(const VectorField& a, const VectorField& b) {
  return VectorField(a.c1 + b.c1, a.c2 + b.c2);
}

VectorField operator-(const VectorField& a, const VectorField& b) {
  return VectorField(a.c1 - b.c1, a.c2 - b.c2);
}

Spectrum::Spectrum(TorusGrid grid) : grid_(grid), c_(grid.spectral_size()) {}

Spectrum forward(const ScalarField& f) {
  const TorusGrid& g = f.grid();
  const FftPlans& p = plans_for(g.n());
  std::vector<double> in(f.values().begin(), f.values().end());
  Spectrum s(g);
  fftw_execute_dft_r2c(p.r2c, in.data(),
                       reinterpret_cast<fftw_complex*>(s.coefficients().data()));
  const double scale = 1.0 / static_cast<double>(g.size());
  for (auto& c : s.coefficients()) c *= scale;
  return s;
}

ScalarField inverse(const Spectrum& s) {
  const TorusGrid& g = s.grid();
  const FftPlans& p = plans_for(g.n());
  // c2r overwrites its input.
  std::vector<std::complex<double>> work(s.coefficients().begin(), s.coefficients().end());
  ScalarField f(g);
  fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(work.data()), f.values().data());
  return f;
}

void differentiate(Spectrum& s, Axis axis) {
  const int n = s.grid().n();
  const int half = n / 2;
  for (int ix = 0; ix < n; ++ix) {
    const int kx = s.grid().wavenumber(ix);
    for (int ky = 0; ky <= half; ++ky) {
      const int k = axis == Axis::x ? kx : ky;
      if (k == half) {
        s.at(ix, ky) = 0.0;
      } else {
        s.at(ix, ky) *= std::complex<double>(0.0, static_cast<double>(k));
      }
    }
  }
}

void truncate_two_thirds(Spectrum& s) {
  const int n = s.grid().n();
  // max(|kx|,|ky|) > n/3  <=>  3*max > n
  for (int ix = 0; ix < n; ++ix) {
    const int kx = std::abs(s.grid().wavenumber(ix));
    for (int ky = 0; ky <= n / 2; ++ky) {
      if (3 * std::max(kx, ky) > n) s.at(ix, ky) = 0.0;
    }
  }
}

ScalarField spectral_derivative(const ScalarField& f, Axis axis) {
  require_finite(f, "spectral_derivative");
  Spectrum s = forward(f);
  differentiate(s, axis);
  return inverse(s);
}

ScalarField dealias(const ScalarField& f) {
  Spectrum s = forward(f);
  truncate_two_thirds(s);
  return inverse(s);
}

ScalarField dealiased_product(const ScalarField& a, const ScalarField& b) {
  return dealias(hadamard(a, b));
}

VectorField gradient(const ScalarField& f) {
  require_finite(f, "gradient");
  const Spectrum s = forward(f);
  Spectrum sx = s;
  Spectrum sy = s;
  differentiate(sx, Axis::x);
  differentiate(sy, Axis::y);
  return VectorField(inverse(sx), inverse(sy));
}

ScalarField divergence(const VectorField& v) {
  return spectral_derivative(v.c1, Axis::x) + spectral_derivative(v.c2, Axis::y);
}

ScalarField curl(const VectorField& v) {
  return spectral_derivative(v.c2, Axis::x) - spectral_derivative(v.c1, Axis::y);
}

VelocityGradient velocity_gradient(const VectorField& v) {
  VectorField g1 = gradient(v.c1);
  VectorField g2 = gradient(v.c2);
  return {std::move(g1.c1), std::move(g1.c2), std::move(g2.c1), std::move(g2.c2)};
}

double sobolev_norm(const ScalarField& f, double s) {
  if (!(s >= 0.0)) throw DomainError("Sobolev index must be >= 0, got " + std::to_string(s));
  require_finite(f, "sobolev_norm");
  const Spectrum sp = forward(f);
  const TorusGrid& g = f.grid();
  const int n = g.n();
  double sum = 0.0;
  for (int ix = 0; ix < n; ++ix) {
    const double kx = g.wavenumber(ix);
    for (int ky = 0; ky <= n / 2; ++ky) {
      const double k2 = kx * kx + static_cast<double>(ky) * ky;
      const double w = s == 0.0 ? 1.0 : std::pow(1.0 + k2, s);
      sum += mode_weight(ky, n) * w * std::norm(sp.at(ix, ky));
    }
  }
  return kTwoPi * std::sqrt(sum);
}

double sobolev_norm(const VectorField& v, double s) {
  return std::hypot(sobolev_norm(v.c1, s), sobolev_norm(v.c2, s));
}

double linf_norm(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

double linf_norm(const VectorField& v) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.c1.size(); ++i) m = std::max(m, std::hypot(v.c1[i], v.c2[i]));
  return m;
}

double grad_linf(const VectorField& v) {
  const VelocityGradient g = velocity_gradient(v);
  double m = 0.0;
  for (std::size_t i = 0; i < v.c1.size(); ++i) {
    const double fro = g.dx1[i] * g.dx1[i] + g.dy1[i] * g.dy1[i] + g.dx2[i] * g.dx2[i] +
                       g.dy2[i] * g.dy2[i];
    m = std::max(m, fro);
  }
  return std::sqrt(m);
}

double mean(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.size());
}

double integral(const ScalarField& f) { return mean(f) * kTwoPi * kTwoPi; }

double min_value(const ScalarField& f) {
  return *std::min_element(f.values().begin(), f.values().end());
}

double max_value(const ScalarField& f) {
  return *std::max_element(f.values().begin(), f.values().end());
}

TrigInterpolant::TrigInterpolant(const std::vector<ScalarField>& components)
    : ncomp_(components.size()) {
  if (components.empty()) throw DomainError("TrigInterpolant needs at least one component");
  const TorusGrid g = components.front().grid();
  const int n = g.n();
  std::vector<Spectrum> spectra;
  spectra.reserve(ncomp_);
  double cmax = 0.0;
  for (const auto& c : components) {
    require_same_grid(g, c.grid());
    require_finite(c, "TrigInterpolant");
    spectra.push_back(forward(c));
    for (auto z : spectra.back().coefficients()) cmax = std::max(cmax, std::abs(z));
  }
  const double cutoff = 1e-15 * cmax;
  for (int ix = 0; ix < n; ++ix) {
    for (int ky = 0; ky <= n / 2; ++ky) {
      bool keep = false;
      for (const auto& s : spectra) keep = keep || std::abs(s.at(ix, ky)) > cutoff;
      if (!keep) continue;
      const int kx = g.wavenumber(ix);
      modes_.push_back({kx, ky, mode_weight(ky, n)});
      for (const auto& s : spectra) coeff_.push_back(s.at(ix, ky));
      kx_min_ = std::min(kx_min_, kx);
      kx_max_ = std::max(kx_max_, kx);
      ky_max_ = std::max(ky_max_, ky);
    }
  }
}

void TrigInterpolant::phases(double x, double y, std::vector<std::complex<double>>& ex,
                             std::vector<std::complex<double>>& ey) const {
  ex.assign(static_cast<std::size_t>(kx_max_ - kx_min_ + 1), 1.0);
  ey.assign(static_cast<std::size_t>(ky_max_ + 1), 1.0);
  const std::complex<double> bx(std::cos(x), std::sin(x));
  const std::complex<double> by(std::cos(y), std::sin(y));
  const int zero = -kx_min_;
  for (int k = 1; k <= kx_max_; ++k) ex[zero + k] = ex[zero + k - 1] * bx;
  for (int k = -1; k >= kx_min_; --k) ex[zero + k] = ex[zero + k + 1] * std::conj(bx);
  for (int k = 1; k <= ky_max_; ++k) ey[k] = ey[k - 1] * by;
}

void TrigInterpolant::evaluate(double x, double y, std::span<double> out) const {
  thread_local std::vector<std::complex<double>> ex, ey;
  phases(x, y, ex, ey);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t m = 0; m < modes_.size(); ++m) {
    const Mode& md = modes_[m];
    const std::complex<double> e = ex[md.kx - kx_min_] * ey[md.ky];
    const std::complex<double>* c = &coeff_[m * ncomp_];
    for (std::size_t j = 0; j < ncomp_; ++j) out[j] += md.weight * (c[j] * e).real();
  }
}

void TrigInterpolant::evaluate(double x, double y, std::span<Sample> out) const {
  thread_local std::vector<std::complex<double>> ex, ey;
  phases(x, y, ex, ey);
  std::fill(out.begin(), out.end(), Sample{});
  for (std::size_t m = 0; m < modes_.size(); ++m) {
    const Mode& md = modes_[m];
    const std::complex<double> e = ex[md.kx - kx_min_] * ey[md.ky];
    const std::complex<double>* c = &coeff_[m * ncomp_];
    for (std::size_t j = 0; j < ncomp_; ++j) {
      const std::complex<double> ce = c[j] * e;
      // d/dx Re(c e^{i k.x}) = Re(i kx c e) = -kx Im(c e)
      out[j].value += md.weight * ce.real();
      out[j].dx -= md.weight * md.kx * ce.imag();
      out[j].dy -= md.weight * md.ky * ce.imag();
    }
  }
}

double TrigInterpolant::evaluate(double x, double y) const {
  double v = 0.0;
  evaluate(x, y, std::span<double>(&v, 1));
  return v;
}

double wrap_difference(double d) noexcept {
  d = std::remainder(d, kTwoPi);
  return d == -kPi ? kPi : d;
}

double wrap_coordinate(double x) noexcept {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r >= kTwoPi ? 0.0 : r;
}

namespace {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little,
                "snapshot IO assumes a little-endian host");
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path,
                    const std::vector<ScalarField>& components) {
  if (components.empty()) throw DomainError("snapshot needs at least one component");
  const TorusGrid g = components.front().grid();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("io", "cannot open " + path.string() + " for writing");
  os.write("RTLB", 4);
  put_le<std::uint32_t>(os, kSnapshotVersion);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(g.n()));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(components.size()));
  for (const auto& c : components) {
    require_same_grid(g, c.grid());
    os.write(reinterpret_cast<const char*>(c.values().data()),
             static_cast<std::streamsize>(c.size() * sizeof(double)));
  }
  if (!os) throw Error("io", "short write to " + path.string());
}

std::vector<ScalarField> read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("io", "cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "RTLB", 4) != 0) {
    throw Error("io", path.string() + " is not a field snapshot (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(is);
  if (version != kSnapshotVersion) {
    throw Error("io", "unsupported snapshot version " + std::to_string(version));
  }
  const auto n = get_le<std::uint32_t>(is);
  const auto count = get_le<std::uint32_t>(is);
  if (!is) throw Error("io", "truncated snapshot header in " + path.string());
  const TorusGrid g(static_cast<int>(n));
  std::vector<ScalarField> out;
  for (std::uint32_t c = 0; c < count; ++c) {
    std::vector<double> v(g.size());
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is) throw Error("io", "truncated snapshot payload in " + path.string());
    out.emplace_back(g, std::move(v));
  }
  return out;
}

}  // namespace rotlab
