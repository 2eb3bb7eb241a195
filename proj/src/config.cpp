#include "lmbtrack/config.hpp"

#include <sstream>

#include "lmbtrack/errors.hpp"

namespace lmbtrack {

nlohmann::json run_config_defaults() {
  return {
      {"scenario", {{"name", "s-curve"}, {"params", nlohmann::json::object()}}},
      {"variants", {"baseline", "interacting"}},
      {"monte_carlo", {{"replicates", 20}, {"seed", 1}, {"threads", 0}}},
      {"output", "out"},
      {"write_csv", true},
      {"idm", {{"s0", 2.0}, {"T", 1.6}, {"a", 0.73}, {"b", 1.67}}},
      {"filter",
       {{"survival_prob", 0.99},
        {"extraction_threshold", 0.2},
        {"prune_threshold", 0.01},
        {"gate_chi2", 13.8},
        {"hypothesis_cap", 100},
        {"component_prune_weight", 1e-6},
        {"process_noise", {{"sigma_v", 5.0}, {"sigma_omega", 0.1}}}}},
      {"prediction",
       {{"kappa", 2.0},
        {"v_min", 0.5},
        {"s_min", 0.5},
        {"omega_clamp", 1.0},
        {"max_decel", 9.81},
        {"max_lookahead", 3},
        {"leader_existence_threshold", 0.5},
        {"gap_cutoff", 100.0},
        {"component_cap", 12},
        {"merge_threshold", 0.1}}},
      {"birth",
       {{"mode", "measurement-driven"},
        {"existence", 0.05},
        {"position_sigma", 1.0},
        {"speed_mean", 8.0},
        {"speed_sigma", 5.0},
        {"heading_mean", 0.0},
        {"heading_sigma", 2.0},
        {"omega_sigma", 0.3}}},
      {"evaluation", {{"match_gate", 5.0}, {"ospa_cutoff", 10.0}, {"ospa_order", 1.0}}},
  };
}

namespace {

void merge_over(nlohmann::json& base, const nlohmann::json& overlay) {
  if (!overlay.is_object() || !base.is_object()) {
    base = overlay;
    return;
  }
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (base.contains(it.key())) {
      merge_over(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& user_doc) {
  nlohmann::json doc = run_config_defaults();
  merge_over(doc, user_doc);

  RunConfig config;
  try {
    const auto& scenario = doc.at("scenario");
    if (scenario.contains("file")) config.scenario_file = scenario.at("file").get<std::string>();
    if (scenario.contains("name")) config.scenario_name = scenario.at("name").get<std::string>();
    if (scenario.contains("params")) config.scenario_params = scenario.at("params");

    config.variants = doc.at("variants").get<std::vector<std::string>>();
    if (config.variants.empty()) throw ConfigError("config: variants may not be empty");

    const auto& mc = doc.at("monte_carlo");
    config.replicates = mc.at("replicates").get<int>();
    config.seed = mc.at("seed").get<std::uint64_t>();
    config.threads = mc.at("threads").get<int>();
    if (config.replicates < 1) throw ConfigError("config: replicates must be >= 1");

    config.output_dir = doc.at("output").get<std::string>();
    config.write_csv = doc.at("write_csv").get<bool>();

    const auto& idm = doc.at("idm");
    config.filter.idm.min_gap = idm.at("s0").get<double>();
    config.filter.idm.time_gap = idm.at("T").get<double>();
    config.filter.idm.max_accel = idm.at("a").get<double>();
    config.filter.idm.comfort_decel = idm.at("b").get<double>();
    if (config.filter.idm.min_gap <= 0.0 || config.filter.idm.time_gap <= 0.0 ||
        config.filter.idm.max_accel <= 0.0 || config.filter.idm.comfort_decel <= 0.0) {
      throw ConfigError("config: idm parameters must be positive");
    }

    const auto& filter = doc.at("filter");
    config.filter.survival_prob = filter.at("survival_prob").get<double>();
    config.filter.extraction_threshold = filter.at("extraction_threshold").get<double>();
    config.filter.prune_threshold = filter.at("prune_threshold").get<double>();
    config.filter.gate_chi2 = filter.at("gate_chi2").get<double>();
    config.filter.hypothesis_cap = filter.at("hypothesis_cap").get<int>();
    config.filter.component_prune_weight = filter.at("component_prune_weight").get<double>();
    config.filter.process_noise.sigma_v = filter.at("process_noise").at("sigma_v").get<double>();
    config.filter.process_noise.sigma_omega =
        filter.at("process_noise").at("sigma_omega").get<double>();
    if (!(config.filter.prune_threshold > 0.0) ||
        !(config.filter.prune_threshold < config.filter.extraction_threshold) ||
        !(config.filter.extraction_threshold < 1.0)) {
      throw ConfigError("config: require 0 < prune_threshold < extraction_threshold < 1");
    }

    const auto& prediction = doc.at("prediction");
    auto& settings = config.filter.prediction;
    settings.kappa = prediction.at("kappa").get<double>();
    settings.v_min = prediction.at("v_min").get<double>();
    settings.s_min = prediction.at("s_min").get<double>();
    settings.omega_clamp = prediction.at("omega_clamp").get<double>();
    settings.max_decel = prediction.at("max_decel").get<double>();
    settings.max_lookahead = prediction.at("max_lookahead").get<int>();
    settings.leader_existence_threshold =
        prediction.at("leader_existence_threshold").get<double>();
    settings.gap_cutoff = prediction.at("gap_cutoff").get<double>();
    settings.component_cap = prediction.at("component_cap").get<std::size_t>();
    settings.merge_threshold = prediction.at("merge_threshold").get<double>();

    const auto& birth = doc.at("birth");
    const std::string mode = birth.at("mode").get<std::string>();
    if (mode == "measurement-driven") {
      config.birth.mode = BirthModel::Mode::kMeasurementDriven;
    } else if (mode == "static") {
      config.birth.mode = BirthModel::Mode::kStatic;
    } else {
      throw ConfigError("config: unknown birth mode " + mode);
    }
    config.birth.existence = birth.at("existence").get<double>();
    config.birth.position_sigma = birth.at("position_sigma").get<double>();
    config.birth.speed_mean = birth.at("speed_mean").get<double>();
    config.birth.speed_sigma = birth.at("speed_sigma").get<double>();
    config.birth.heading_mean = birth.at("heading_mean").get<double>();
    config.birth.heading_sigma = birth.at("heading_sigma").get<double>();
    config.birth.omega_sigma = birth.at("omega_sigma").get<double>();
    if (!(config.birth.existence > 0.0) || !(config.birth.existence < 1.0)) {
      throw ConfigError("config: birth existence must lie in (0, 1)");
    }

    const auto& eval = doc.at("evaluation");
    config.match_gate = eval.at("match_gate").get<double>();
    config.ospa_cutoff = eval.at("ospa_cutoff").get<double>();
    config.ospa_order = eval.at("ospa_order").get<double>();
    if (doc.contains("reference_vehicle")) {
      config.reference_vehicle = doc.at("reference_vehicle").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config document: ") + e.what());
  }
  return config;
}

void apply_dotted_override(nlohmann::json& doc, const std::string& dotted_key,
                           const std::string& value) {
  nlohmann::json* node = &doc;
  std::stringstream keys(dotted_key);
  std::string key;
  std::vector<std::string> parts;
  while (std::getline(keys, key, '.')) parts.push_back(key);
  if (parts.empty()) throw ConfigError("override: empty key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    node = &(*node)[parts[i]];
  }
  const nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  (*node)[parts.back()] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
}

FilterConfig variant_config(const FilterConfig& base, const std::string& variant) {
  FilterConfig config = base;
  if (variant == "baseline") {
    config.prediction.enable_interaction = false;
    config.prediction.enable_map = false;
    config.use_baseline_path = true;
  } else if (variant == "interacting") {
    config.prediction.enable_interaction = true;
    config.prediction.enable_map = true;
    config.use_baseline_path = false;
  } else if (variant == "interaction-only") {
    config.prediction.enable_interaction = true;
    config.prediction.enable_map = false;
    config.use_baseline_path = false;
  } else if (variant == "map-only") {
    config.prediction.enable_interaction = false;
    config.prediction.enable_map = true;
    config.use_baseline_path = false;
  } else {
    throw ConfigError("unknown filter variant: " + variant);
  }
  return config;
}

}  // namespace lmbtrack
