#include "rotlab/cli_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rotlab/errors.hpp"

namespace rotlab {

using nlohmann::json;

namespace fs = std::filesystem;

FlowParams resolve_params(std::optional<double> tau, std::optional<double> sigma,
                          std::optional<double> delta, Family family, double gamma, int n, double cfl) {
  for (auto [v, key] : {std::pair{tau, "tau"}, std::pair{sigma, "sigma"}, std::pair{delta, "delta"}}) {
    if (v && !(*v > 0.0 && std::isfinite(*v)))
      throw ConfigError(key, std::string(key) + " must be positive and finite");
  }
  const int given = int(bool(tau)) + int(bool(sigma)) + int(bool(delta));
  if (given < 2) throw ConfigError(tau ? (sigma ? "delta" : "sigma") : "tau", "give two of tau, sigma, delta");
  if (tau && sigma) {
    FlowParams p(*tau, *sigma, family, gamma, n, cfl);
    if (delta && std::abs(p.delta() - *delta) > 1e-12 * *delta)
      throw ConfigError("delta", "delta is inconsistent with tau / sigma^2");
    return p;
  }
  if (tau) return FlowParams::from_tau_delta(*tau, *delta, family, gamma, n, cfl);
  return FlowParams::from_sigma_delta(*sigma, *delta, family, gamma, n, cfl);
}

namespace {

template <class T>
T value_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "invalid value for key \"" + key + "\"");
  }
}

template <class T>
std::optional<T> optional_as(const json& j, const std::string& key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return value_as<T>(j, key);
}

const std::vector<std::string> kTolerances{"exact", "numeric", "slope_min", "slope_max"};

// JSON cannot hold NaN or infinity; series store them as strings.
json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double from_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  throw ConfigError("series", "bad numeric entry " + s);
}

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  static const std::vector<std::string> known{"subcommand", "tau", "sigma", "delta", "gamma",
                                              "family",     "n",   "cfl",   "t_end", "data",
                                              "amplitude",  "seed", "out",  "tolerances", "spec"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError(key, "unknown key \"" + key + "\"");
  }
  RunConfig c;
  c.subcommand = optional_as<std::string>(j, "subcommand").value_or("");
  const Family family =
      j.contains("family") ? family_from_string(value_as<std::string>(j, "family")) : Family::rsw;
  const double gamma = family == Family::rsw ? 2.0 : optional_as<double>(j, "gamma").value_or(2.0);
  const int n = optional_as<int>(j, "n").value_or(64);
  if (n < 8 || n % 2) throw ConfigError("n", "n must be even and at least 8");
  const double cfl = optional_as<double>(j, "cfl").value_or(0.5);
  if (!(cfl > 0.0)) throw ConfigError("cfl", "cfl must be positive");
  if (!(gamma > 1.0)) throw ConfigError("gamma", "gamma must exceed 1");
  auto tau = optional_as<double>(j, "tau");
  auto sigma = optional_as<double>(j, "sigma");
  auto delta = optional_as<double>(j, "delta");
  // Missing values default to tau = 0.1, sigma = 1; a lone sigma keeps tau = 0.1.
  const int given = int(bool(tau)) + int(bool(sigma)) + int(bool(delta));
  if (given == 0) tau = 0.1;
  if (given <= 1) {
    if (sigma) tau = 0.1;
    else sigma = 1.0;
  }
  c.params = resolve_params(tau, sigma, delta, family, gamma, n, cfl);
  c.data.preset = optional_as<std::string>(j, "data").value_or("storm");
  c.data.amplitude = optional_as<double>(j, "amplitude").value_or(1.0);
  c.data.seed = optional_as<std::uint64_t>(j, "seed").value_or(0);
  c.out = optional_as<std::string>(j, "out").value_or(".");
  c.t_end = optional_as<double>(j, "t_end").value_or(0.0);
  if (!(c.t_end >= 0.0)) throw ConfigError("t_end", "t_end must be non-negative");
  c.spec = optional_as<std::string>(j, "spec").value_or("");
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    if (!t.is_object()) throw ConfigError("tolerances", "tolerances must be an object");
    for (const auto& [key, value] : t.items()) {
      if (std::find(kTolerances.begin(), kTolerances.end(), key) == kTolerances.end())
        throw ConfigError("tolerances." + key, "unknown key \"tolerances." + key + "\"");
      if (!value.is_number() || (!(value.get<double>() > 0.0) && key != "slope_min"))
        throw ConfigError("tolerances." + key, "invalid value for key \"tolerances." + key + "\"");
      c.tolerances[key] = value.get<double>();
    }
  }
  return c;
}

json to_json(const RunConfig& c) {
  return json{{"subcommand", c.subcommand},
              {"tau", c.params.tau()},
              {"sigma", c.params.sigma()},
              {"delta", c.params.delta()},
              {"gamma", c.params.gamma()},
              {"family", std::string(to_string(c.params.family()))},
              {"n", c.params.n()},
              {"cfl", c.params.cfl()},
              {"t_end", c.t_end},
              {"data", c.data.preset},
              {"amplitude", c.data.amplitude},
              {"seed", c.data.seed},
              {"out", c.out},
              {"tolerances", c.tolerances},
              {"spec", c.spec}};
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("path", "cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("path", path.string() + ": " + e.what());
  }
}

RunConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("io", "cannot open " + tmp.string() + " for writing");
    os << text;
    os.flush();
    if (!os) throw Error("io", "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error("io", "cannot rename into " + path.string());
  }
}

std::string to_csv(const Series& s) {
  std::string out;
  for (std::size_t i = 0; i < s.columns.size(); ++i) out += (i ? "," : "") + s.columns[i];
  out += '\n';
  for (const auto& row : s.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + shortest(row[i]);
    out += '\n';
  }
  return out;
}

json to_json(const RunReport& r) {
  json series = json::object();
  for (const auto& [name, s] : r.series) {
    json rows = json::array();
    for (const auto& row : s.rows) {
      json jr = json::array();
      for (double v : row) jr.push_back(number(v));
      rows.push_back(std::move(jr));
    }
    series[name] = json{{"columns", s.columns}, {"rows", std::move(rows)}};
  }
  json verdicts = json::array();
  for (const Verdict& v : r.verdicts) verdicts.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
  return json{{"kind", r.kind},         {"passed", r.passed()}, {"summary", r.summary},
              {"verdicts", verdicts},   {"series", series}};
}

RunReport report_from_json(const json& j) {
  try {
    RunReport r;
    r.kind = j.at("kind").get<std::string>();
    r.summary = j.at("summary");
    for (const auto& [name, s] : j.at("series").items()) {
      Series out;
      out.columns = s.at("columns").get<std::vector<std::string>>();
      for (const auto& row : s.at("rows")) {
        std::vector<double> v;
        for (const auto& x : row) v.push_back(from_number(x));
        out.rows.push_back(std::move(v));
      }
      r.series[name] = std::move(out);
    }
    for (const auto& v : j.at("verdicts"))
      r.verdicts.push_back({v.at("name").get<std::string>(), v.at("pass").get<bool>(), v.at("detail").get<std::string>()});
    return r;
  } catch (const json::exception& e) {
    throw ConfigError("report", std::string("malformed report: ") + e.what());
  }
}

std::vector<fs::path> persist_report(const RunReport& r, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("io", "cannot create " + dir.string());
  std::vector<fs::path> paths;
  const fs::path summary = dir / (r.kind + ".json");
  write_atomic(summary, to_json(r).dump(2) + "\n");
  paths.push_back(summary);
  for (const auto& [name, s] : r.series) {
    const fs::path csv = dir / (r.kind + "_" + name + ".csv");
    write_atomic(csv, to_csv(s));
    paths.push_back(csv);
  }
  return paths;
}

RunReport load_report(const fs::path& path) { return report_from_json(read_json(path)); }

json threshold_json(const ThresholdReport& t) {
  return json{{"tau", t.tau},
              {"margin", t.margin},
              {"tau_c", std::isinf(t.tau_c) ? json("inf") : json(t.tau_c)},
              {"subcritical", t.subcritical},
              {"extremal_point", {t.extremal_point.x, t.extremal_point.y}}};
}

}  // namespace rotlab
