#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmbtrack/filter.hpp"
#include "lmbtrack/simulator.hpp"

namespace lmbtrack {

/// Per-component RMSE in reporting units: meters, m/s, degrees, deg/s.
struct ComponentRmse {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double phi_deg = 0.0;
  double omega_deg = 0.0;
  int matched_steps = 0;
  int unmatched_steps = 0;
};

struct EvaluationReport {
  ComponentRmse rmse;
  std::vector<int> label_error_series;
  std::vector<double> ospa_series;
};

/// Estimates per step (output of LmbFilter::extract per step).
using EstimateLog = std::vector<std::vector<ExtractedTrack>>;

/// Per-step nearest-position matching of extracted tracks to the reference
/// vehicle within `gate` meters; RMSE over matched steps, heading wrapped
/// before squaring. Throws NumericalError when no step matches.
ComponentRmse rmse_report(const EstimateLog& estimates, const GroundTruthLog& truth,
                          int reference_vehicle, double gate = 5.0);

/// Per-step label-error series: 0 while the reference vehicle is
/// untracked, otherwise the cumulative count of distinct labels that have
/// been matched to it so far. Ideal outcome: constant 1.
std::vector<int> label_error(const EstimateLog& estimates, const GroundTruthLog& truth,
                             int reference_vehicle, double gate = 5.0);

/// Optimal sub-pattern assignment distance between two position sets.
double ospa(const std::vector<Vec2>& a, const std::vector<Vec2>& b, double cutoff, double order);

EvaluationReport evaluate(const EstimateLog& estimates, const GroundTruthLog& truth,
                          int reference_vehicle, double gate = 5.0, double ospa_cutoff = 10.0,
                          double ospa_order = 1.0);

nlohmann::json report_to_json(const EvaluationReport& report);

/// Per-step error trace for CSV export and plotting.
struct StepTrace {
  int step = 0;
  bool matched = false;
  double err_x = 0.0;
  double err_y = 0.0;
  double err_v = 0.0;
  double err_phi_deg = 0.0;
  double err_omega_deg = 0.0;
  int label_error = 0;
  double ospa = 0.0;
};

std::vector<StepTrace> step_traces(const EstimateLog& estimates, const GroundTruthLog& truth,
                                   int reference_vehicle, double gate = 5.0,
                                   double ospa_cutoff = 10.0, double ospa_order = 1.0);

std::string traces_to_csv(const std::vector<StepTrace>& traces);

/// 100 * (baseline - candidate) / baseline, per RMSE component.
std::vector<std::pair<std::string, double>> improvement_pct(const ComponentRmse& candidate,
                                                            const ComponentRmse& baseline);

/// Minimum-cost assignment over a square cost matrix (Hungarian
/// algorithm); returns assigned column per row.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

}  // namespace lmbtrack
