#pragma once

// Run configuration, parameter resolution and report persistence shared by the
// command-line front end and the tests.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotlab/experiments.hpp"
#include "rotlab/params.hpp"
#include "rotlab/pressureless.hpp"

namespace rotlab {

/// Resolves FlowParams from any two of tau, sigma and delta (all three are
/// accepted when consistent to 1e-12 relative). Throws ConfigError naming the
/// offending key.
FlowParams resolve_params(std::optional<double> tau, std::optional<double> sigma,
                          std::optional<double> delta, Family family = Family::rsw,
                          double gamma = 2.0, int n = 64, double cfl = 0.5);

struct RunConfig {
  std::string subcommand;
  FlowParams params{0.1, 1.0};
  DataSpec data;
  std::string out = ".";
  double t_end = 0.0;                         // 0 picks the subcommand default
  std::map<std::string, double> tolerances;  // exact, numeric, slope_min, slope_max
  std::string spec;                           // sweep or lifespan spec file

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Accepted keys: subcommand, tau, sigma, delta, gamma, family, n, cfl, t_end,
/// data, amplitude, seed, out, tolerances, spec. Unknown keys and invalid values
/// raise ConfigError naming the key. With fewer than two of tau, sigma, delta
/// the missing ones default to sigma = 1 (tau = 0.1 when only sigma is given).
RunConfig config_from_json(const nlohmann::json& j);
/// Normalized form: every key present, delta derived.
nlohmann::json to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// Reads a JSON document; ConfigError on parse failure.
nlohmann::json read_json(const std::filesystem::path& path);

/// Writes text to path through a sibling temporary file and a rename, so a
/// partial file is never visible under the final name.
void write_atomic(const std::filesystem::path& path, const std::string& text);

/// CSV with a header row; doubles in shortest round-trip form, nan for NaN.
std::string to_csv(const Series& series);

nlohmann::json to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

/// Writes <dir>/<kind>.json (summary, verdicts and all series) and one
/// <dir>/<kind>_<series>.csv per series. Returns the written paths.
std::vector<std::filesystem::path> persist_report(const RunReport& report,
                                                  const std::filesystem::path& dir);
RunReport load_report(const std::filesystem::path& json_path);

/// {tau, margin, tau_c ("inf" when infinite), subcritical, extremal_point}.
nlohmann::json threshold_json(const ThresholdReport& report);

}  // namespace rotlab
