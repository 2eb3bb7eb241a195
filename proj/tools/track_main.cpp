#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lmbtrack/errors.hpp"
#include "lmbtrack/runner.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitScenario = 3;
constexpr int kExitRuntime = 4;

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw lmbtrack::ConfigError("cannot open " + path);
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw lmbtrack::ConfigError(path + " is not valid JSON");
  return doc;
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream stream(csv);
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_run(const std::string& config_path, const std::string& scenario,
            const std::string& variants, int mc, long long seed, const std::string& out_dir,
            int threads, bool no_csv, const std::vector<std::string>& sets,
            const std::vector<std::string>& extras) {
  nlohmann::json doc = config_path.empty() ? nlohmann::json::object() : load_json_file(config_path);

  if (!scenario.empty()) {
    if (std::filesystem::exists(scenario) || scenario.ends_with(".json")) {
      doc["scenario"] = {{"file", scenario}};
    } else {
      doc["scenario"]["name"] = scenario;
      doc["scenario"].erase("file");
    }
  }
  if (!variants.empty()) doc["variants"] = split_csv(variants);
  if (mc > 0) doc["monte_carlo"]["replicates"] = mc;
  if (seed >= 0) doc["monte_carlo"]["seed"] = seed;
  if (threads >= 0) doc["monte_carlo"]["threads"] = threads;
  if (!out_dir.empty()) doc["output"] = out_dir;
  if (no_csv) doc["write_csv"] = false;

  // Dotted overrides: explicit --set key=value plus bare --key.subkey=value.
  auto apply = [&doc](const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
      throw lmbtrack::ConfigError("override must look like key.subkey=value: " + spec);
    }
    lmbtrack::apply_dotted_override(doc, spec.substr(0, eq), spec.substr(eq + 1));
  };
  for (const auto& s : sets) apply(s);
  for (const auto& extra : extras) {
    std::string s = extra;
    while (!s.empty() && s.front() == '-') s.erase(s.begin());
    if (s.empty() || s.find('=') == std::string::npos) {
      throw lmbtrack::ConfigError("unrecognized argument: " + extra);
    }
    apply(s);
  }

  const lmbtrack::RunConfig config = lmbtrack::run_config_from_json(doc);
  lmbtrack::run_and_write(config);
  std::cout << "wrote " << config.output_dir << "\n";
  return 0;
}

int cmd_map_build(const std::string& input, std::string output) {
  const nlohmann::json doc = load_json_file(input);
  const lmbtrack::RoadMap map = lmbtrack::load_road_map(doc);
  if (output.empty()) output = input + ".map.json";
  std::ofstream out(output);
  if (!out) throw lmbtrack::ConfigError("cannot write " + output);
  out << lmbtrack::road_map_to_json(map).dump(2) << "\n";
  std::cout << "wrote " << output << " (" << map.size() << " rectangles)\n";
  return 0;
}

int cmd_report_diff(const std::string& a_path, const std::string& b_path) {
  auto load_rmse = [](const std::string& path) {
    const nlohmann::json doc = load_json_file(path);
    lmbtrack::ComponentRmse rmse;
    const auto& r = doc.at("aggregate").at("rmse_mean");
    rmse.x = r.at("x").get<double>();
    rmse.y = r.at("y").get<double>();
    rmse.v = r.at("v").get<double>();
    rmse.phi_deg = r.at("phi_deg").get<double>();
    rmse.omega_deg = r.at("omega_deg").get<double>();
    return std::make_pair(doc.value("variant", path), rmse);
  };
  const auto [name_a, rmse_a] = load_rmse(a_path);
  const auto [name_b, rmse_b] = load_rmse(b_path);
  std::printf("| States | %s | %s | Improvement [%%] |\n|---|---|---|---|\n", name_a.c_str(),
              name_b.c_str());
  for (const auto& [key, pct] : lmbtrack::improvement_pct(rmse_a, rmse_b)) {
    double va = 0.0, vb = 0.0;
    if (key == "x") va = rmse_a.x, vb = rmse_b.x;
    if (key == "y") va = rmse_a.y, vb = rmse_b.y;
    if (key == "phi") va = rmse_a.phi_deg, vb = rmse_b.phi_deg;
    if (key == "v") va = rmse_a.v, vb = rmse_b.v;
    if (key == "omega") va = rmse_a.omega_deg, vb = rmse_b.omega_deg;
    std::printf("| %s | %.3f | %.3f | %.2f |\n", key.c_str(), va, vb, pct);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GM-LMB tracking benchmark"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a benchmark scenario");
  std::string config_path, scenario, variants, out_dir;
  int mc = -1, threads = -1;
  long long seed = -1;
  bool no_csv = false;
  std::vector<std::string> sets;
  run->add_option("--config", config_path, "config JSON file (defaults merged underneath)");
  run->add_option("--scenario", scenario, "library scenario name or scenario JSON file");
  run->add_option("--variants", variants,
                  "comma list: baseline,interacting,interaction-only,map-only");
  run->add_option("--mc", mc, "Monte-Carlo replicates");
  run->add_option("--seed", seed, "base RNG seed");
  run->add_option("--threads", threads, "worker threads (0 = all cores)");
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--no-csv", no_csv, "skip CSV trace output");
  run->add_option("--set", sets, "config override key.subkey=value (repeatable)");
  run->allow_extras();

  auto* scenario_cmd = app.add_subcommand("scenario", "scenario utilities");
  auto* scenario_list = scenario_cmd->add_subcommand("list", "list library scenarios");

  auto* map_cmd = app.add_subcommand("map", "road map utilities");
  auto* map_build = map_cmd->add_subcommand("build", "fit rectangles to lane polylines");
  std::string map_input, map_output;
  map_build->add_option("input", map_input, "lane polyline JSON document")->required();
  map_build->add_option("-o,--out", map_output, "output file");

  auto* report_cmd = app.add_subcommand("report", "report utilities");
  auto* report_diff = report_cmd->add_subcommand("diff", "compare two report JSONs");
  std::string report_a, report_b;
  report_diff->add_option("candidate", report_a, "candidate report JSON")->required();
  report_diff->add_option("baseline", report_b, "baseline report JSON")->required();

  CLI11_PARSE(app, argc, argv);

  if (const char* env = std::getenv("TRACK_CONFIG"); env != nullptr && config_path.empty()) {
    config_path = env;
  }

  try {
    if (run->parsed()) {
      return cmd_run(config_path, scenario, variants, mc, seed, out_dir, threads, no_csv, sets,
                     run->remaining());
    }
    if (scenario_list->parsed()) {
      for (const auto& name : lmbtrack::scenario_names()) std::cout << name << "\n";
      return 0;
    }
    if (map_build->parsed()) return cmd_map_build(map_input, map_output);
    if (report_diff->parsed()) return cmd_report_diff(report_a, report_b);
  } catch (const lmbtrack::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const lmbtrack::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitScenario;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  std::cerr << "no subcommand given\n";
  return 1;
}
