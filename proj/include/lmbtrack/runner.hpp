#pragma once

#include <string>
#include <vector>

#include "lmbtrack/config.hpp"
#include "lmbtrack/metrics.hpp"
#include "lmbtrack/scenarios.hpp"

namespace lmbtrack {

/// Aggregate of one RMSE component over replicates.
struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
};

struct VariantSummary {
  std::string variant;
  std::vector<EvaluationReport> replicates;
  Aggregate x, y, v, phi_deg, omega_deg;
  Aggregate final_label_error;
  Aggregate ospa_mean;

  ComponentRmse mean_rmse() const;
};

struct RunArtifacts {
  Scenario scenario;
  std::vector<VariantSummary> variants;
};

/// Runs one filter variant over a prepared scan stream.
EstimateLog run_filter(const Scenario& scenario, const SimulationResult& sim,
                       const FilterConfig& config, const BirthModel& birth);

/// Full Monte-Carlo benchmark: per replicate, one simulation shared by
/// every variant (identical scans), replicates spread over a worker pool,
/// results merged in replicate order.
RunArtifacts run_benchmark(const RunConfig& config);

/// Table-styled comparison of a candidate variant against the baseline.
std::string comparison_markdown(const VariantSummary& candidate, const VariantSummary& baseline);

/// Runs the benchmark and writes reports, comparison table, and CSV traces
/// under config.output_dir.
void run_and_write(const RunConfig& config);

/// Resolves the configured scenario (library builder or file).
Scenario resolve_scenario(const RunConfig& config);

}  // namespace lmbtrack
