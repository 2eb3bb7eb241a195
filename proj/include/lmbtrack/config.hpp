#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmbtrack/filter.hpp"

namespace lmbtrack {

/// Everything one benchmark invocation needs: scenario selection, filter
/// variants, Monte-Carlo setup and output location.
struct RunConfig {
  std::string scenario_name;          // library scenario, or
  std::string scenario_file;          // path to a scenario JSON document
  nlohmann::json scenario_params = nlohmann::json::object();
  std::vector<std::string> variants{"baseline", "interacting"};
  int replicates = 20;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  std::string output_dir = "out";
  FilterConfig filter;
  BirthModel birth;
  double match_gate = 5.0;
  double ospa_cutoff = 10.0;
  double ospa_order = 1.0;
  int reference_vehicle = -1;  // -1 = scenario default
  bool write_csv = true;
};

/// The shipped defaults as a JSON document (filter thresholds, process
/// noise, IDM parameters).
nlohmann::json run_config_defaults();

/// Parses a config document merged over the defaults.
/// Throws ConfigError on malformed input.
RunConfig run_config_from_json(const nlohmann::json& doc);

/// Applies a `--key.subkey=value` style override to a JSON document.
/// The value is parsed as JSON when possible, else taken as a string.
void apply_dotted_override(nlohmann::json& doc, const std::string& dotted_key,
                           const std::string& value);

/// Known variants: `baseline` (plain UKF-CTRV path), `interacting` (IDM +
/// map), `interaction-only`, `map-only`. Throws ConfigError otherwise.
FilterConfig variant_config(const FilterConfig& base, const std::string& variant);

}  // namespace lmbtrack
