#include "rotlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "rotlab/approx2.hpp"
#include "rotlab/errors.hpp"
#include "rotlab/pressureless.hpp"

namespace rotlab {

using nlohmann::json;

// ================================================================ data

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"zero", "shear", "rigid", "storm", "steepening",
                                              "random-bandlimited"};
  return names;
}

bool is_preset(const std::string& name) {
  const auto& names = preset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

ScalarField band_limited(const TorusGrid& g, int kmax, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  struct Mode {
    double kx, ky, a, b;
  };
  std::vector<Mode> modes;
  for (int kx = -kmax; kx <= kmax; ++kx) {
    for (int ky = 0; ky <= kmax; ++ky) {
      if (ky == 0 && kx <= 0) continue;  // one of each +-k pair, no mean
      const double a = normal(rng);
      const double b = normal(rng);
      modes.push_back({double(kx), double(ky), a, b});
    }
  }
  ScalarField f = ScalarField::sample(g, [&](double x, double y) {
    double v = 0.0;
    for (const Mode& m : modes) {
      const double arg = m.kx * x + m.ky * y;
      v += m.a * std::cos(arg) + m.b * std::sin(arg);
    }
    return v;
  });
  const double peak = linf_norm(f);
  if (peak > 0.0) f *= 1.0 / peak;
  return f;
}

InitialData random_data(const TorusGrid& g, double amplitude, std::uint64_t seed, double tau) {
  std::mt19937_64 rng(seed);
  ScalarField u1 = band_limited(g, 4, rng);
  ScalarField u2 = band_limited(g, 4, rng);
  ScalarField h = band_limited(g, 4, rng);
  VectorField u((0.5 * amplitude) * u1, (0.5 * amplitude) * u2);
  for (int i = 0; i < 60 && threshold_analyze(u, tau).margin < 0.5; ++i) {
    u.c1 *= 0.5;
    u.c2 *= 0.5;
  }
  return InitialData{(0.1 * amplitude) * h, std::move(u), std::nullopt};
}

InitialData from_snapshot(const std::string& path, const TorusGrid& g) {
  if (!std::filesystem::exists(path)) throw ConfigError("data", "unknown preset or missing file: " + path);
  std::vector<ScalarField> c;
  try {
    c = read_snapshot(path);
  } catch (const std::exception& e) {
    throw ConfigError("data", std::string("unreadable data file: ") + e.what());
  }
  if (c.size() < 3 || c.size() > 4) throw ConfigError("data", "data file needs components h, u1, u2[, S]");
  if (!(c[0].grid() == g)) throw GridMismatchError("data file grid differs from the requested n");
  InitialData d{c[0], VectorField(c[1], c[2]), std::nullopt};
  if (c.size() == 4) d.S0 = c[3];
  return d;
}

}  // namespace

InitialData make_data(const DataSpec& spec, const TorusGrid& g, double tau) {
  const double A = spec.amplitude;
  const std::string& name = spec.preset;
  auto vel = [&](auto f1, auto f2) { return VectorField(ScalarField::sample(g, f1), ScalarField::sample(g, f2)); };
  if (name == "zero") return InitialData{ScalarField(g), VectorField(g), std::nullopt};
  if (name == "shear" || name == "steepening") {
    const bool shear = name == "shear";
    return InitialData{ScalarField(g),
                       vel([&](double x, double y) { return 0.5 * A * std::sin(shear ? y : x); },
                           [](double, double) { return 0.0; }),
                       std::nullopt};
  }
  if (name == "rigid") {
    return InitialData{ScalarField(g),
                       vel([&](double, double y) { return -0.5 * A * std::sin(y); },
                           [&](double x, double) { return 0.5 * A * std::sin(x); }),
                       std::nullopt};
  }
  if (name == "storm") {
    return InitialData{ScalarField(g),
                       vel([&](double x, double y) { return 0.5 * A * std::cos(x) * std::sin(y); },
                           [&](double x, double y) { return -0.5 * A * std::sin(x) * std::cos(y); }),
                       std::nullopt};
  }
  if (name == "random-bandlimited") return random_data(g, A, spec.seed, tau);
  return from_snapshot(name, g);
}

// ================================================================ reports

std::size_t Series::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw DomainError("series has no column " + name);
  return std::size_t(it - columns.begin());
}

std::vector<double> Series::values(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r.at(c));
  return v;
}

bool RunReport::passed() const {
  return !verdicts.empty() &&
         std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

// ================================================================ fits

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  if (x.size() < 2 || x.size() != y.size()) throw DomainError("linear fit needs at least two points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw DomainError("linear fit with identical abscissae");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  return linear_fit(lx, ly).first;
}

double envelope_rate(const std::vector<double>& t, const std::vector<double>& eps, double delta) {
  double C = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0)) continue;
    if (!std::isfinite(eps[i])) return std::numeric_limits<double>::infinity();
    // eps = x / (1 - x) with x = e^{Ct} delta.
    const double x = eps[i] / (1.0 + eps[i]);
    if (x > 0.0) C = std::max(C, std::log(x / delta) / t[i]);
  }
  return C;
}

double envelope(double C, double t, double delta) {
  const double x = std::exp(C * t) * delta;
  return x < 1.0 ? x / (1.0 - x) : std::numeric_limits<double>::infinity();
}

// ================================================================ helpers

int worker_count() {
  if (const char* env = std::getenv("ROTLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return int(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Runs body(i) for i in [0, count) on up to worker_count() threads. The first
// exception (by index) is rethrown after all workers finish.
template <class Body>
void parallel_for(std::size_t count, Body body) {
  const std::size_t workers = std::min<std::size_t>(std::size_t(worker_count()), count);
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double data_norm(const FlowParams& prm, const InitialData& d, double s) {
  double n = sobolev_norm(normalize_height(d.h0, prm), s) + sobolev_norm(d.u0, s);
  if (d.S0 && prm.family() == Family::ideal) n += sobolev_norm(*d.S0, s);
  return n;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

json params_json(const FlowParams& p) {
  return json{{"tau", p.tau()},     {"sigma", p.sigma()}, {"delta", p.delta()}, {"gamma", p.gamma()},
              {"family", std::string(to_string(p.family()))}, {"n", p.n()}, {"cfl", p.cfl()}};
}

// Integrates the solver and compares with the approximation at each sample
// time (ascending). Stops early at breakdown.
struct Comparison {
  std::vector<double> t;
  std::vector<ErrorRecord> errors;
  std::vector<SeriesRow> measures;
  bool broken_down = false;
  double breakdown_time = 0.0;
};

Comparison compare_along(const SecondApproximation& approx, const InitialData& d,
                         const std::vector<double>& times, double s, double multiplier) {
  Comparison out;
  FlowState state = make_state(approx.params(), d.h0, d.u0, d.S0);
  const double initial = grad_linf(state.u);
  for (double t : times) {
    // integrate measures growth against its own start; rescale to the original reference.
    DtPolicy pol;
    const double current = grad_linf(state.u);
    pol.breakdown_multiplier = current > 0.0 ? multiplier * initial / current : multiplier;
    state = integrate(state, t, pol).state;
    const SeriesRow m = measure(state);
    if (state.broken_down || (initial > 0.0 && m.grad_linf > multiplier * initial)) {
      out.broken_down = true;
      out.breakdown_time = state.broken_down ? state.breakdown_time : state.t;
      break;
    }
    out.t.push_back(t);
    out.errors.push_back(compare_to_approx(state, approx.at(t), s));
    out.measures.push_back(m);
  }
  return out;
}

}  // namespace

// ================================================================ periodicity

RunReport periodicity_suite(const FlowParams& prm, const InitialData& d, const PeriodicityOptions& opt) {
  RunReport r;
  r.kind = "periodicity";
  const double T = prm.period();
  const SecondApproximation approx(prm, d.u0, d.h0, d.S0);
  const ApproxSolution end = approx.at(T);
  std::vector<std::string> names;
  Series closure{{"quantity", "deviation", "tolerance"}, {}};
  auto add = [&](const std::string& name, double dev, double tol) {
    closure.rows.push_back({double(names.size()), dev, tol});
    names.push_back(name);
  };
  add("u1", linf_norm(end.u1 - d.u0), opt.exact_tolerance);
  add("h2", linf_norm(end.h2 - d.h0), opt.exact_tolerance);
  add("u2", linf_norm(end.u2 - d.u0), opt.exact_tolerance);
  if (end.S2) add("S2", linf_norm(*end.S2 - *approx.at(0.0).S2), opt.exact_tolerance);
  if (opt.numeric) {
    const NumericTransport num =
        transport_h2_numeric(approx.flow(), d.h0, prm, T, opt.numeric_dt_fraction * prm.tau());
    add("h2_numeric", num.broken_down ? std::numeric_limits<double>::infinity() : linf_norm(num.h2 - d.h0),
        opt.numeric_tolerance);
  }
  r.series["closure"] = std::move(closure);
  r.summary = json{{"params", params_json(prm)}, {"period", T}, {"quantities", names},
                   {"criteria", {{"exact_tolerance", opt.exact_tolerance},
                                 {"numeric_tolerance", opt.numeric_tolerance}}}};
  r.verdicts = evaluate(r);
  return r;
}

// ================================================================ sweep spec

FlowParams SweepSpec::member_params(double delta) const {
  if (!(delta > 0.0)) throw ConfigError("deltas", "delta must be positive");
  if (mode == Mode::fixed_tau) return FlowParams::from_tau_delta(tau, delta, family, gamma, n, cfl);
  return FlowParams::from_sigma_delta(sigma, delta, family, gamma, n, cfl);
}

namespace {

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "invalid value for key \"" + key + "\"");
  }
}

void require_positive(double v, const std::string& key) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key, "key \"" + key + "\" must be positive");
}

}  // namespace

SweepSpec sweep_spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("", "sweep spec must be a JSON object");
  static const std::vector<std::string> known{
      "family", "gamma", "data", "amplitude", "seed", "deltas", "mode", "tau", "sigma", "t_end", "n", "cfl",
      "sobolev_index", "residual_only", "slope_min", "slope_max", "t_max", "breakdown_multiplier"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(key, "unknown key \"" + key + "\"");
  }
  SweepSpec s;
  if (j.contains("family")) s.family = family_from_string(get_as<std::string>(j, "family"));
  if (j.contains("gamma")) s.gamma = get_as<double>(j, "gamma");
  if (s.family == Family::rsw) s.gamma = 2.0;
  if (j.contains("data")) s.data.preset = get_as<std::string>(j, "data");
  if (j.contains("amplitude")) s.data.amplitude = get_as<double>(j, "amplitude");
  if (j.contains("seed")) s.data.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("deltas")) s.deltas = get_as<std::vector<double>>(j, "deltas");
  if (j.contains("mode")) {
    const auto m = get_as<std::string>(j, "mode");
    if (m == "fixed_tau") s.mode = SweepSpec::Mode::fixed_tau;
    else if (m == "fixed_sigma") s.mode = SweepSpec::Mode::fixed_sigma;
    else throw ConfigError("mode", "mode must be fixed_tau or fixed_sigma");
  }
  if (j.contains("tau")) s.tau = get_as<double>(j, "tau");
  if (j.contains("sigma")) s.sigma = get_as<double>(j, "sigma");
  if (j.contains("t_end")) s.t_end = get_as<double>(j, "t_end");
  if (j.contains("n")) s.n = get_as<int>(j, "n");
  if (j.contains("cfl")) s.cfl = get_as<double>(j, "cfl");
  if (j.contains("sobolev_index")) s.sobolev_index = get_as<double>(j, "sobolev_index");
  if (j.contains("residual_only")) s.residual_only = get_as<bool>(j, "residual_only");
  if (j.contains("slope_min")) s.slope_min = get_as<double>(j, "slope_min");
  if (j.contains("slope_max")) s.slope_max = get_as<double>(j, "slope_max");
  if (j.contains("t_max")) s.t_max = get_as<double>(j, "t_max");
  if (j.contains("breakdown_multiplier")) s.breakdown_multiplier = get_as<double>(j, "breakdown_multiplier");

  if (s.deltas.empty()) throw ConfigError("deltas", "deltas must not be empty");
  for (double d : s.deltas) require_positive(d, "deltas");
  require_positive(s.tau, "tau");
  require_positive(s.sigma, "sigma");
  require_positive(s.cfl, "cfl");
  require_positive(s.t_max, "t_max");
  require_positive(s.breakdown_multiplier, "breakdown_multiplier");
  if (!(s.gamma > 1.0)) throw ConfigError("gamma", "gamma must exceed 1");
  if (s.n < 8 || s.n % 2) throw ConfigError("n", "n must be even and at least 8");
  if (!(s.t_end >= 0.0)) throw ConfigError("t_end", "t_end must be non-negative");
  if (!(s.sobolev_index >= 0.0)) throw ConfigError("sobolev_index", "sobolev_index must be non-negative");
  if (!(s.slope_min < s.slope_max)) throw ConfigError("slope_min", "slope_min must be below slope_max");
  if (!is_preset(s.data.preset) && !std::filesystem::exists(s.data.preset))
    throw ConfigError("data", "unknown preset or missing file: " + s.data.preset);
  return s;
}

json to_json(const SweepSpec& s) {
  return json{{"family", std::string(to_string(s.family))},
              {"gamma", s.gamma},
              {"data", s.data.preset},
              {"amplitude", s.data.amplitude},
              {"seed", s.data.seed},
              {"deltas", s.deltas},
              {"mode", s.mode == SweepSpec::Mode::fixed_tau ? "fixed_tau" : "fixed_sigma"},
              {"tau", s.tau},
              {"sigma", s.sigma},
              {"t_end", s.t_end},
              {"n", s.n},
              {"cfl", s.cfl},
              {"sobolev_index", s.sobolev_index},
              {"residual_only", s.residual_only},
              {"slope_min", s.slope_min},
              {"slope_max", s.slope_max},
              {"t_max", s.t_max},
              {"breakdown_multiplier", s.breakdown_multiplier}};
}

// ================================================================ delta sweep

namespace {

constexpr int kResidualSamples = 16;
constexpr double kFractions[] = {0.25, 0.5, 0.75, 1.0};

struct MemberResult {
  std::vector<double> row;
  std::vector<std::vector<double>> fractions;
  std::string note;
};

MemberResult sweep_member(const SweepSpec& spec, double delta) {
  MemberResult m;
  const FlowParams prm = spec.member_params(delta);
  const TorusGrid g(prm.n());
  const InitialData d = make_data(spec.data, g, prm.tau());
  const double t_cmp = spec.t_end > 0.0 ? std::min(prm.period(), spec.t_end) : prm.period();
  double err_total = NAN, err_p = NAN, err_u = NAN, err_S = NAN, residual = NAN;
  double breakdown = 0.0, supercritical = 0.0, vacuum = 0.0, failed = 0.0;
  const double s = spec.sobolev_index;
  if (!threshold_analyze(d.u0, prm.tau()).subcritical) {
    supercritical = 1.0;
    m.note = "tau is not sub-critical for the data; member aborted";
  } else if (!(vacuum_margin(d.h0, prm.sigma()) > 0.0)) {
    vacuum = 1.0;
    m.note = "vacuum in the initial height; member aborted";
  } else {
    try {
      const SecondApproximation approx(prm, d.u0, d.h0, d.S0);
      residual = 0.0;
      for (int k = 1; k <= kResidualSamples; ++k) {
        const double t = t_cmp * k / kResidualSamples;
        const ApproxSolution a = approx.at(t);
        const VectorField R = residual_R(a.u1, a.h2, prm, t, a.S2 ? &*a.S2 : nullptr);
        residual = std::max(residual, sobolev_norm(R, s));
      }
      if (!spec.residual_only) {
        std::vector<double> times;
        for (double f : kFractions) times.push_back(f * t_cmp);
        const Comparison c = compare_along(approx, d, times, s, 1e3);
        for (std::size_t i = 0; i < c.t.size(); ++i)
          m.fractions.push_back({delta, kFractions[i], c.t[i], c.errors[i].total()});
        if (c.broken_down) {
          breakdown = 1.0;
          m.note = "solver broke down at t = " + fmt(c.breakdown_time);
        } else {
          const ErrorRecord& e = c.errors.back();
          err_total = e.total();
          err_p = e.p;
          err_u = e.u;
          err_S = e.S;
        }
      }
    } catch (const Error& e) {
      failed = 1.0;
      m.note = e.kind() + ": " + e.what();
    }
  }
  m.row = {delta,    prm.tau(), prm.sigma(), t_cmp,     err_total,     err_p,  err_u,
           err_S,    residual,  prm.sigma() > 1.0 ? 1.0 : 0.0, breakdown, supercritical, vacuum, failed};
  return m;
}

}  // namespace

RunReport delta_sweep(const SweepSpec& spec) {
  RunReport r;
  r.kind = "sweep";
  std::vector<MemberResult> results(spec.deltas.size());
  parallel_for(spec.deltas.size(), [&](std::size_t i) { results[i] = sweep_member(spec, spec.deltas[i]); });

  // Deterministic reduction ordered by delta, largest first.
  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return spec.deltas[a] > spec.deltas[b]; });
  Series members{{"delta", "tau", "sigma", "t_compare", "error", "error_p", "error_u", "error_S", "residual",
                  "sigma_above_one", "breakdown", "supercritical", "vacuum", "failed"},
                 {}};
  Series fractions{{"delta", "fraction", "t", "error"}, {}};
  json notes = json::array();
  for (std::size_t i : order) {
    members.rows.push_back(results[i].row);
    for (auto& row : results[i].fractions) fractions.rows.push_back(row);
    notes.push_back(results[i].note);
  }
  r.series["members"] = std::move(members);
  if (!spec.residual_only) r.series["fractions"] = std::move(fractions);
  r.summary = json{{"spec", to_json(spec)},
                   {"notes", notes},
                   {"criteria",
                    {{"fit_column", spec.residual_only ? "residual" : "error"},
                     {"slope_min", spec.slope_min},
                     {"slope_max", spec.slope_max}}}};
  r.verdicts = evaluate(r);
  // Fitted slope for readers; evaluate() recomputes it.
  const Series& ms = r.series.at("members");
  std::vector<double> x, y;
  const std::string col = r.summary["criteria"]["fit_column"];
  for (const auto& row : ms.rows) {
    const bool excluded = row[ms.column("breakdown")] + row[ms.column("supercritical")] +
                              row[ms.column("vacuum")] + row[ms.column("failed")] > 0.0;
    if (!excluded) {
      x.push_back(row[ms.column("delta")]);
      y.push_back(row[ms.column(col)]);
    }
  }
  if (x.size() >= 2) r.summary["slope"] = loglog_slope(x, y);
  else r.summary["slope"] = nullptr;
  return r;
}

// ================================================================ life span

RunReport lifespan_study(const SweepSpec& spec) {
  RunReport r;
  r.kind = "lifespan";
  // Index 0 is the control (no rotation, parameters of the largest delta).
  std::vector<double> deltas = spec.deltas;
  std::sort(deltas.begin(), deltas.end(), std::greater<>());
  const std::size_t count = deltas.size() + 1;
  std::vector<std::vector<double>> rows(count);
  parallel_for(count, [&](std::size_t i) {
    const bool control = i == 0;
    const double delta = control ? deltas.front() : deltas[i - 1];
    const FlowParams prm = spec.member_params(delta);
    const TorusGrid g(prm.n());
    const InitialData d = make_data(spec.data, g, prm.tau());
    DtPolicy pol;
    pol.breakdown_multiplier = spec.breakdown_multiplier;
    pol.rhs.rotation = !control;
    const auto t_star = breakdown_time(make_state(prm, d.h0, d.u0, d.S0), spec.t_max, pol);
    rows[i] = {delta, prm.tau(), prm.sigma(), control ? 0.0 : 1.0, t_star ? *t_star : kNoBreakdown, spec.t_max};
  });
  r.series["members"] = Series{{"delta", "tau", "sigma", "rotation", "t_star", "t_max"}, std::move(rows)};

  // Error growth rate of the largest-delta member, sampled every quarter
  // period up to ln(1/delta).
  const double delta_ref = deltas.front();
  const FlowParams prm = spec.member_params(delta_ref);
  const TorusGrid g(prm.n());
  const InitialData d = make_data(spec.data, g, prm.tau());
  Series env{{"t", "eps"}, {}};
  try {
    const SecondApproximation approx(prm, d.u0, d.h0, d.S0);
    std::vector<double> times;
    const double horizon = std::min(spec.t_max, std::log(1.0 / delta_ref));
    for (double t = prm.period() / 4; t <= horizon + 1e-12; t += prm.period() / 4) times.push_back(t);
    const Comparison c = compare_along(approx, d, times, spec.sobolev_index, spec.breakdown_multiplier);
    const double norm0 = data_norm(prm, d, spec.sobolev_index);
    for (std::size_t i = 0; i < c.t.size(); ++i) env.rows.push_back({c.t[i], c.errors[i].total() / norm0});
  } catch (const Error&) {
    // Leaves the envelope series empty; the bound verdict then fails.
  }
  r.series["envelope"] = std::move(env);
  r.summary = json{{"spec", to_json(spec)}, {"criteria", {{"delta_ref", delta_ref}}}};
  r.verdicts = evaluate(r);
  const std::vector<double> t = r.series["envelope"].values("t"), eps = r.series["envelope"].values("eps");
  r.summary["C_fit"] = t.empty() ? json(nullptr) : json(envelope_rate(t, eps, delta_ref));
  return r;
}

// ================================================================ NIO

RunReport nio_scenario(const NioInputs& in) {
  RunReport r;
  r.kind = "nio";
  const double tau = in.speed / (in.coriolis * in.length);
  const double sigma = in.speed / std::sqrt(in.gravity * in.depth);
  const FlowParams prm(tau, sigma, Family::rsw, 2.0, in.n);
  const double t_final = std::log(1.0 / prm.delta());
  const double seconds = t_final * in.length / in.speed;
  const TorusGrid g(prm.n());
  const InitialData d = make_data(DataSpec{"storm", in.amplitude, 0}, g, tau);
  const ThresholdReport thr = threshold_analyze(d.u0, tau);

  Series timeline{{"t", "error", "eps", "grad_linf", "min_depth"}, {}};
  bool broken = false;
  double initial_gradient = grad_linf(d.u0);
  {
    const SecondApproximation approx(prm, d.u0, d.h0, d.S0);
    std::vector<double> times;
    const double dt = prm.period() / 4;
    for (double t = dt; t < t_final - 1e-9; t += dt) times.push_back(t);
    times.push_back(t_final);
    const Comparison c = compare_along(approx, d, times, 3.0, 5.0);
    broken = c.broken_down;
    const double norm0 = data_norm(prm, d, 3.0);
    for (std::size_t i = 0; i < c.t.size(); ++i) {
      timeline.rows.push_back({c.t[i], c.errors[i].total(), c.errors[i].total() / norm0, c.measures[i].grad_linf,
                               c.measures[i].min_depth});
    }
  }
  r.series["timeline"] = std::move(timeline);
  r.summary = json{{"inputs",
                    {{"coriolis", in.coriolis}, {"length", in.length}, {"depth", in.depth}, {"speed", in.speed},
                     {"gravity", in.gravity}, {"n", in.n}, {"amplitude", in.amplitude}}},
                   {"params", params_json(prm)},
                   {"data", "storm"},
                   {"threshold_margin", thr.margin},
                   {"life_span_seconds", seconds},
                   {"life_span_days", seconds / 86400.0},
                   {"t_final", t_final},
                   {"initial_gradient", initial_gradient},
                   {"solver_breakdown", broken},
                   {"criteria",
                    {{"tau", 0.1}, {"sigma", 1.0}, {"delta", 0.1}, {"reference_days", 2.0},
                     {"gradient_multiplier", 5.0}}}};
  r.verdicts = evaluate(r);
  const Series& tl = r.series["timeline"];
  r.summary["C_fit"] = envelope_rate(tl.values("t"), tl.values("eps"), prm.delta());
  return r;
}

// ================================================================ verdicts

namespace {

std::vector<Verdict> evaluate_periodicity(const RunReport& r) {
  std::vector<Verdict> v;
  const Series& s = r.series.at("closure");
  const auto& names = r.summary.at("quantities");
  for (const auto& row : s.rows) {
    const std::string name = names.at(std::size_t(row[0]));
    v.push_back({name + "_closure", row[1] <= row[2], "deviation " + fmt(row[1]) + " <= " + fmt(row[2])});
  }
  return v;
}

std::vector<Verdict> evaluate_sweep(const RunReport& r) {
  const Series& s = r.series.at("members");
  const json& crit = r.summary.at("criteria");
  const std::string col = crit.at("fit_column");
  std::vector<double> x, y;
  int excluded = 0;
  for (const auto& row : s.rows) {
    const bool out = row[s.column("breakdown")] + row[s.column("supercritical")] + row[s.column("vacuum")] +
                         row[s.column("failed")] > 0.0 ||
                     !(row[s.column(col)] > 0.0);
    if (out) {
      ++excluded;
      continue;
    }
    x.push_back(row[s.column("delta")]);
    y.push_back(row[s.column(col)]);
  }
  std::vector<Verdict> v;
  v.push_back({"members_usable", excluded == 0, std::to_string(excluded) + " member(s) excluded from the fit"});
  bool distinct = x.size() >= 2 && *std::min_element(x.begin(), x.end()) < *std::max_element(x.begin(), x.end());
  if (!distinct) {
    v.push_back({"slope", false, "fit refused: fewer than two distinct usable deltas"});
  } else {
    const double slope = loglog_slope(x, y);
    const double lo = crit.at("slope_min"), hi = crit.at("slope_max");
    v.push_back({"slope", slope >= lo && slope <= hi,
                 "log-log slope of " + col + " vs delta = " + fmt(slope) + " in [" + fmt(lo) + ", " + fmt(hi) + "]"});
  }
  return v;
}

std::vector<Verdict> evaluate_lifespan(const RunReport& r) {
  const Series& s = r.series.at("members");
  std::vector<Verdict> v;
  double control = kNoBreakdown;
  struct Member {
    double delta, t_star, t_max;
  };
  std::vector<Member> rot;
  for (const auto& row : s.rows) {
    if (row[s.column("rotation")] == 0.0) control = row[s.column("t_star")];
    else rot.push_back({row[s.column("delta")], row[s.column("t_star")], row[s.column("t_max")]});
  }
  std::sort(rot.begin(), rot.end(), [](const Member& a, const Member& b) { return a.delta > b.delta; });
  const bool conclusive = control != kNoBreakdown;
  v.push_back({"control_breaks_down", conclusive,
               conclusive ? "control T* = " + fmt(control) : "inconclusive: control survived to t_max"});
  auto effective = [](const Member& m) { return m.t_star == kNoBreakdown ? m.t_max : m.t_star; };

  bool above = conclusive;
  for (const Member& m : rot) above = above && effective(m) > control;
  v.push_back({"control_is_minimum", above, "every rotating run outlives the control"});

  // Smaller delta must not break down earlier. A censored run is a lower
  // bound t_max, so a finite time after a censored one is a contradiction.
  bool monotone = true;
  for (std::size_t i = 1; i < rot.size(); ++i) {
    const Member &big = rot[i - 1], &small = rot[i];
    if (small.t_star == kNoBreakdown) continue;
    if (big.t_star == kNoBreakdown || !(small.t_star > big.t_star)) monotone = false;
  }
  v.push_back({"monotone", monotone, "T*(delta) increases as delta decreases"});

  std::vector<double> x, y;
  for (const Member& m : rot) {
    if (m.t_star != kNoBreakdown) {
      x.push_back(std::log(1.0 / m.delta));
      y.push_back(m.t_star);
    }
  }
  if (x.size() >= 2) {
    const double slope = linear_fit(x, y).first;
    v.push_back({"log_fit", slope > 0.0, "T* = a + b ln(1/delta) with b = " + fmt(slope)});
  } else {
    v.push_back({"log_fit", monotone,
                 std::to_string(x.size()) + " finite rotating T*; censored runs bound the fit from below"});
  }

  const Series& env = r.series.at("envelope");
  const double delta_ref = r.summary.at("criteria").at("delta_ref");
  if (env.rows.empty()) {
    v.push_back({"lifespan_bound", false, "no error samples for the growth-rate fit"});
  } else {
    const double C = envelope_rate(env.values("t"), env.values("eps"), delta_ref);
    bool ok = true;
    for (const Member& m : rot) ok = ok && (C == 0.0 || effective(m) >= std::log(1.0 / m.delta) / C);
    v.push_back({"lifespan_bound", ok, "T*(delta) >= ln(1/delta)/C with C = " + fmt(C)});
  }
  return v;
}

std::vector<Verdict> evaluate_nio(const RunReport& r) {
  const json& sm = r.summary;
  const json& crit = sm.at("criteria");
  const json& p = sm.at("params");
  std::vector<Verdict> v;
  const double tau = p.at("tau"), sigma = p.at("sigma"), delta = p.at("delta");
  const bool exact = std::abs(tau - double(crit.at("tau"))) <= 1e-12 &&
                     std::abs(sigma - double(crit.at("sigma"))) <= 1e-12 &&
                     std::abs(delta - double(crit.at("delta"))) <= 1e-12;
  v.push_back({"nondimensional_numbers", exact,
               "tau = " + fmt(tau) + ", sigma = " + fmt(sigma) + ", delta = " + fmt(delta)});
  const double margin = sm.at("threshold_margin");
  v.push_back({"subcritical", margin > 0.0, "threshold margin " + fmt(margin)});
  const double days = sm.at("life_span_days"), ref = crit.at("reference_days");
  v.push_back({"life_span_order", std::abs(std::log10(days / ref)) <= 0.5,
               "life span " + fmt(days) + " days vs reference order " + fmt(ref)});

  const Series& tl = r.series.at("timeline");
  const double t_final = sm.at("t_final");
  const double g0 = sm.at("initial_gradient"), mult = crit.at("gradient_multiplier");
  bool smooth = !tl.rows.empty() && tl.rows.back()[tl.column("t")] >= t_final - 1e-9;
  for (const auto& row : tl.rows) {
    smooth = smooth && std::isfinite(row[tl.column("error")]) && row[tl.column("grad_linf")] <= mult * g0 &&
             row[tl.column("min_depth")] > 0.0;
  }
  v.push_back({"smooth", smooth, "solver reached t = ln(1/delta) without breakdown or vacuum"});
  if (tl.rows.empty()) {
    v.push_back({"envelope", false, "no samples"});
  } else {
    const double C = envelope_rate(tl.values("t"), tl.values("eps"), delta);
    const bool inside = std::isfinite(envelope(C, t_final, delta));
    v.push_back({"envelope", inside, "growth rate C = " + fmt(C) + "; envelope finite through t = " + fmt(t_final)});
  }
  return v;
}

}  // namespace

std::vector<Verdict> evaluate(const RunReport& r) {
  if (r.kind == "periodicity") return evaluate_periodicity(r);
  if (r.kind == "sweep") return evaluate_sweep(r);
  if (r.kind == "lifespan") return evaluate_lifespan(r);
  if (r.kind == "nio") return evaluate_nio(r);
  throw DomainError("unknown report kind " + r.kind);
}

}  // namespace rotlab
