#include "lmbtrack/runner.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "lmbtrack/errors.hpp"

namespace lmbtrack {

namespace {

Aggregate aggregate_of(const std::vector<double>& values) {
  Aggregate out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

}  // namespace

ComponentRmse VariantSummary::mean_rmse() const {
  ComponentRmse out;
  out.x = x.mean;
  out.y = y.mean;
  out.v = v.mean;
  out.phi_deg = phi_deg.mean;
  out.omega_deg = omega_deg.mean;
  return out;
}

Scenario resolve_scenario(const RunConfig& config) {
  if (!config.scenario_file.empty()) {
    std::ifstream in(config.scenario_file);
    if (!in) throw ScenarioError("cannot open scenario file: " + config.scenario_file);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
      throw ScenarioError("scenario file is not valid JSON: " + config.scenario_file);
    }
    Scenario scenario = scenario_from_json(doc);
    validate_scenario(scenario);
    return scenario;
  }
  if (config.scenario_name.empty()) throw ConfigError("config: no scenario given");
  return make_scenario(config.scenario_name, config.scenario_params);
}

EstimateLog run_filter(const Scenario& scenario, const SimulationResult& sim,
                       const FilterConfig& config, const BirthModel& birth) {
  LmbFilter filter(config, birth, scenario.map);
  const std::size_t n_steps = sim.truth.steps.size();

  // Scans grouped by step, ordered by sensor id within a step.
  std::vector<std::vector<const MeasurementScan*>> by_step(n_steps);
  for (const auto& scan : sim.scans) {
    by_step[static_cast<std::size_t>(scan.step)].push_back(&scan);
  }
  for (auto& scans : by_step) {
    std::stable_sort(scans.begin(), scans.end(),
                     [](const MeasurementScan* a, const MeasurementScan* b) {
                       return a->sensor.id < b->sensor.id;
                     });
  }

  EstimateLog log;
  log.reserve(n_steps);
  for (std::size_t k = 0; k < n_steps; ++k) {
    if (k > 0) filter.predict(scenario.step);
    for (const MeasurementScan* scan : by_step[k]) filter.update(*scan);
    log.push_back(filter.extract());
  }
  return log;
}

RunArtifacts run_benchmark(const RunConfig& config) {
  RunArtifacts artifacts;
  artifacts.scenario = resolve_scenario(config);
  const int reference = config.reference_vehicle >= 0 ? config.reference_vehicle
                                                      : artifacts.scenario.reference_vehicle;

  for (const auto& variant : config.variants) {
    VariantSummary summary;
    summary.variant = variant;
    summary.replicates.resize(config.replicates);
    artifacts.variants.push_back(std::move(summary));
    variant_config(config.filter, variant);  // validate the name up front
  }

  const int n_threads = config.threads > 0
                            ? config.threads
                            : std::max(1u, std::thread::hardware_concurrency());
  std::atomic<int> next{0};
  std::vector<std::string> errors(config.replicates);

  auto worker = [&]() {
    while (true) {
      const int rep = next.fetch_add(1);
      if (rep >= config.replicates) return;
      try {
        const SimulationResult sim =
            simulate(artifacts.scenario, derive_seed(config.seed, rep));
        for (std::size_t v = 0; v < config.variants.size(); ++v) {
          const FilterConfig fc = variant_config(config.filter, config.variants[v]);
          const EstimateLog estimates = run_filter(artifacts.scenario, sim, fc, config.birth);
          artifacts.variants[v].replicates[rep] =
              evaluate(estimates, sim.truth, reference, config.match_gate, config.ospa_cutoff,
                       config.ospa_order);
        }
      } catch (const std::exception& e) {
        errors[rep] = e.what();
      }
    }
  };

  std::vector<std::thread> pool;
  for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& e : errors) {
    if (!e.empty()) throw std::runtime_error("replicate failed: " + e);
  }

  for (auto& summary : artifacts.variants) {
    std::vector<double> xs, ys, vs, phis, omegas, finals, ospas;
    for (const auto& rep : summary.replicates) {
      xs.push_back(rep.rmse.x);
      ys.push_back(rep.rmse.y);
      vs.push_back(rep.rmse.v);
      phis.push_back(rep.rmse.phi_deg);
      omegas.push_back(rep.rmse.omega_deg);
      finals.push_back(rep.label_error_series.empty()
                           ? 0.0
                           : static_cast<double>(rep.label_error_series.back()));
      double mean_ospa = 0.0;
      for (double o : rep.ospa_series) mean_ospa += o;
      if (!rep.ospa_series.empty()) mean_ospa /= static_cast<double>(rep.ospa_series.size());
      ospas.push_back(mean_ospa);
    }
    summary.x = aggregate_of(xs);
    summary.y = aggregate_of(ys);
    summary.v = aggregate_of(vs);
    summary.phi_deg = aggregate_of(phis);
    summary.omega_deg = aggregate_of(omegas);
    summary.final_label_error = aggregate_of(finals);
    summary.ospa_mean = aggregate_of(ospas);
  }
  return artifacts;
}

std::string comparison_markdown(const VariantSummary& candidate, const VariantSummary& baseline) {
  const auto improvements = improvement_pct(candidate.mean_rmse(), baseline.mean_rmse());
  auto pick = [&](const std::string& key) {
    for (const auto& [k, v] : improvements) {
      if (k == key) return v;
    }
    return 0.0;
  };
  char line[256];
  std::ostringstream out;
  out << "| States | " << candidate.variant << " | " << baseline.variant
      << " | Improvement [%] |\n|---|---|---|---|\n";
  auto row = [&](const char* name, const Aggregate& cand, const Aggregate& base,
                 const std::string& key) {
    std::snprintf(line, sizeof(line), "| %s | %.3f +- %.3f | %.3f +- %.3f | %.2f |\n", name,
                  cand.mean, cand.stddev, base.mean, base.stddev, pick(key));
    out << line;
  };
  row("x [m]", candidate.x, baseline.x, "x");
  row("y [m]", candidate.y, baseline.y, "y");
  row("phi [deg]", candidate.phi_deg, baseline.phi_deg, "phi");
  row("v [m/s]", candidate.v, baseline.v, "v");
  row("omega [deg/s]", candidate.omega_deg, baseline.omega_deg, "omega");
  std::snprintf(line, sizeof(line), "| final label error | %.2f +- %.2f | %.2f +- %.2f | |\n",
                candidate.final_label_error.mean, candidate.final_label_error.stddev,
                baseline.final_label_error.mean, baseline.final_label_error.stddev);
  out << line;
  return out.str();
}

void run_and_write(const RunConfig& config) {
  const std::filesystem::path out_dir(config.output_dir);
  std::filesystem::create_directories(out_dir);

  RunArtifacts artifacts = run_benchmark(config);

  write_file(out_dir / "scenario.json", scenario_to_json(artifacts.scenario).dump(2) + "\n");

  for (const auto& summary : artifacts.variants) {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& rep : summary.replicates) reps.push_back(report_to_json(rep));
    nlohmann::json doc = {
        {"variant", summary.variant},
        {"aggregate",
         {{"rmse_mean",
           {{"x", summary.x.mean},
            {"y", summary.y.mean},
            {"v", summary.v.mean},
            {"phi_deg", summary.phi_deg.mean},
            {"omega_deg", summary.omega_deg.mean}}},
          {"rmse_std",
           {{"x", summary.x.stddev},
            {"y", summary.y.stddev},
            {"v", summary.v.stddev},
            {"phi_deg", summary.phi_deg.stddev},
            {"omega_deg", summary.omega_deg.stddev}}},
          {"final_label_error",
           {{"mean", summary.final_label_error.mean}, {"std", summary.final_label_error.stddev}}},
          {"ospa", {{"mean", summary.ospa_mean.mean}, {"std", summary.ospa_mean.stddev}}}}},
        {"replicates", reps}};
    write_file(out_dir / ("report_" + summary.variant + ".json"), doc.dump(2) + "\n");
  }

  const VariantSummary* baseline = nullptr;
  for (const auto& s : artifacts.variants) {
    if (s.variant == "baseline") baseline = &s;
  }
  if (baseline == nullptr && !artifacts.variants.empty()) baseline = &artifacts.variants.front();
  if (baseline != nullptr) {
    std::string tables;
    for (const auto& s : artifacts.variants) {
      if (&s == baseline) continue;
      tables += comparison_markdown(s, *baseline) + "\n";
    }
    if (!tables.empty()) write_file(out_dir / "comparison.md", tables);
  }

  if (config.write_csv) {
    const std::filesystem::path traces_dir = out_dir / "traces";
    const std::filesystem::path logs_dir = out_dir / "replicates";
    std::filesystem::create_directories(traces_dir);
    std::filesystem::create_directories(logs_dir);
    const int reference = config.reference_vehicle >= 0 ? config.reference_vehicle
                                                        : artifacts.scenario.reference_vehicle;
    for (int rep = 0; rep < config.replicates; ++rep) {
      const SimulationResult sim = simulate(artifacts.scenario, derive_seed(config.seed, rep));
      write_file(logs_dir / ("rep" + std::to_string(rep) + "_truth.csv"),
                 truth_to_csv(sim.truth));
      write_file(logs_dir / ("rep" + std::to_string(rep) + "_scans.csv"), scans_to_csv(sim));
      for (const auto& variant : config.variants) {
        const FilterConfig fc = variant_config(config.filter, variant);
        const EstimateLog estimates = run_filter(artifacts.scenario, sim, fc, config.birth);
        const auto traces = step_traces(estimates, sim.truth, reference, config.match_gate,
                                        config.ospa_cutoff, config.ospa_order);
        write_file(traces_dir / (variant + "_rep" + std::to_string(rep) + ".csv"),
                   traces_to_csv(traces));
      }
    }
  }
}

}  // namespace lmbtrack
