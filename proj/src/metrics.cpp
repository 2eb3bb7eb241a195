#include "lmbtrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "lmbtrack/errors.hpp"

namespace lmbtrack {

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;

// Nearest extracted track within the gate, or nullptr.
const ExtractedTrack* match_reference(const std::vector<ExtractedTrack>& estimates,
                                      const StateVector& truth, double gate) {
  const ExtractedTrack* best = nullptr;
  double best_dist = gate;
  for (const auto& e : estimates) {
    const double d = (e.state.position() - truth.position()).norm();
    if (d <= best_dist) {
      best_dist = d;
      best = &e;
    }
  }
  return best;
}

}  // namespace

ComponentRmse rmse_report(const EstimateLog& estimates, const GroundTruthLog& truth,
                          int reference_vehicle, double gate) {
  double sx = 0.0, sy = 0.0, sv = 0.0, sphi = 0.0, somega = 0.0;
  int matched = 0, unmatched = 0;
  const std::size_t n = std::min(estimates.size(), truth.steps.size());
  for (std::size_t k = 0; k < n; ++k) {
    const TruthEntry* ref = truth.find(k, reference_vehicle);
    if (ref == nullptr) continue;  // vehicle not present at this step
    const ExtractedTrack* est = match_reference(estimates[k], ref->state, gate);
    if (est == nullptr) {
      ++unmatched;
      continue;
    }
    ++matched;
    const double ex = est->state.x - ref->state.x;
    const double ey = est->state.y - ref->state.y;
    const double ev = est->state.v - ref->state.v;
    const double ephi = wrap_angle(est->state.phi - ref->state.phi);
    const double eomega = est->state.omega - ref->state.omega;
    sx += ex * ex;
    sy += ey * ey;
    sv += ev * ev;
    sphi += ephi * ephi;
    somega += eomega * eomega;
  }
  if (matched == 0) {
    throw NumericalError("rmse_report: no step matched the reference vehicle");
  }
  ComponentRmse out;
  out.x = std::sqrt(sx / matched);
  out.y = std::sqrt(sy / matched);
  out.v = std::sqrt(sv / matched);
  out.phi_deg = std::sqrt(sphi / matched) * kRadToDeg;
  out.omega_deg = std::sqrt(somega / matched) * kRadToDeg;
  out.matched_steps = matched;
  out.unmatched_steps = unmatched;
  return out;
}

std::vector<int> label_error(const EstimateLog& estimates, const GroundTruthLog& truth,
                             int reference_vehicle, double gate) {
  std::vector<int> series;
  std::set<Label> seen;
  const std::size_t n = std::min(estimates.size(), truth.steps.size());
  series.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const TruthEntry* ref = truth.find(k, reference_vehicle);
    if (ref == nullptr) {
      series.push_back(0);
      continue;
    }
    const ExtractedTrack* est = match_reference(estimates[k], ref->state, gate);
    if (est == nullptr) {
      series.push_back(0);
      continue;
    }
    seen.insert(est->label);
    series.push_back(static_cast<int>(seen.size()));
  }
  return series;
}

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost) {
  // Jonker-Volgenant style shortest augmenting path, O(n^3).
  const int n = static_cast<int>(cost.size());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) assignment[p[j] - 1] = j - 1;
  }
  return assignment;
}

double ospa(const std::vector<Vec2>& a, const std::vector<Vec2>& b, double cutoff, double order) {
  if (!(cutoff > 0.0) || !(order >= 1.0)) {
    throw std::invalid_argument("ospa: require cutoff > 0 and order >= 1");
  }
  if (a.empty() && b.empty()) return 0.0;
  const std::vector<Vec2>& small = a.size() <= b.size() ? a : b;
  const std::vector<Vec2>& large = a.size() <= b.size() ? b : a;
  const int m = static_cast<int>(small.size());
  const int n = static_cast<int>(large.size());
  if (m == 0) return cutoff;

  // Pad to square with zero columns: padded slots stand for cardinality
  // mismatches and are charged separately.
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      cost[i][j] = std::pow(std::min((large[i] - small[j]).norm(), cutoff), order);
    }
  }
  const std::vector<int> assignment = solve_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (assignment[i] < m) total += cost[i][assignment[i]];
  }
  total += std::pow(cutoff, order) * (n - m);
  return std::pow(total / n, 1.0 / order);
}

EvaluationReport evaluate(const EstimateLog& estimates, const GroundTruthLog& truth,
                          int reference_vehicle, double gate, double ospa_cutoff,
                          double ospa_order) {
  EvaluationReport report;
  report.rmse = rmse_report(estimates, truth, reference_vehicle, gate);
  report.label_error_series = label_error(estimates, truth, reference_vehicle, gate);
  const std::size_t n = std::min(estimates.size(), truth.steps.size());
  report.ospa_series.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<Vec2> est_positions;
    for (const auto& e : estimates[k]) est_positions.push_back(e.state.position());
    std::vector<Vec2> truth_positions;
    for (const auto& t : truth.steps[k]) truth_positions.push_back(t.state.position());
    report.ospa_series.push_back(ospa(est_positions, truth_positions, ospa_cutoff, ospa_order));
  }
  return report;
}

nlohmann::json report_to_json(const EvaluationReport& report) {
  double ospa_mean = 0.0;
  for (double o : report.ospa_series) ospa_mean += o;
  if (!report.ospa_series.empty()) ospa_mean /= static_cast<double>(report.ospa_series.size());
  return {{"rmse",
           {{"x", report.rmse.x},
            {"y", report.rmse.y},
            {"v", report.rmse.v},
            {"phi_deg", report.rmse.phi_deg},
            {"omega_deg", report.rmse.omega_deg},
            {"matched_steps", report.rmse.matched_steps},
            {"unmatched_steps", report.rmse.unmatched_steps}}},
          {"label_error", report.label_error_series},
          {"label_error_final",
           report.label_error_series.empty() ? 0 : report.label_error_series.back()},
          {"ospa_mean", ospa_mean},
          {"ospa", report.ospa_series}};
}

std::vector<StepTrace> step_traces(const EstimateLog& estimates, const GroundTruthLog& truth,
                                   int reference_vehicle, double gate, double ospa_cutoff,
                                   double ospa_order) {
  const std::vector<int> labels = label_error(estimates, truth, reference_vehicle, gate);
  std::vector<StepTrace> traces;
  const std::size_t n = std::min(estimates.size(), truth.steps.size());
  traces.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    StepTrace t;
    t.step = static_cast<int>(k);
    t.label_error = k < labels.size() ? labels[k] : 0;

    std::vector<Vec2> est_positions;
    for (const auto& e : estimates[k]) est_positions.push_back(e.state.position());
    std::vector<Vec2> truth_positions;
    for (const auto& e : truth.steps[k]) truth_positions.push_back(e.state.position());
    t.ospa = ospa(est_positions, truth_positions, ospa_cutoff, ospa_order);

    if (const TruthEntry* ref = truth.find(k, reference_vehicle)) {
      if (const ExtractedTrack* est = match_reference(estimates[k], ref->state, gate)) {
        t.matched = true;
        t.err_x = est->state.x - ref->state.x;
        t.err_y = est->state.y - ref->state.y;
        t.err_v = est->state.v - ref->state.v;
        t.err_phi_deg = wrap_angle(est->state.phi - ref->state.phi) * kRadToDeg;
        t.err_omega_deg = (est->state.omega - ref->state.omega) * kRadToDeg;
      }
    }
    traces.push_back(t);
  }
  return traces;
}

std::string traces_to_csv(const std::vector<StepTrace>& traces) {
  std::string out = "step,matched,err_x,err_y,err_v,err_phi_deg,err_omega_deg,label_error,ospa\n";
  char line[256];
  for (const auto& t : traces) {
    std::snprintf(line, sizeof(line), "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%.9g\n", t.step,
                  t.matched ? 1 : 0, t.err_x, t.err_y, t.err_v, t.err_phi_deg, t.err_omega_deg,
                  t.label_error, t.ospa);
    out += line;
  }
  return out;
}

std::vector<std::pair<std::string, double>> improvement_pct(const ComponentRmse& candidate,
                                                            const ComponentRmse& baseline) {
  auto pct = [](double cand, double base) {
    return base != 0.0 ? 100.0 * (base - cand) / base : 0.0;
  };
  return {{"x", pct(candidate.x, baseline.x)},
          {"y", pct(candidate.y, baseline.y)},
          {"phi", pct(candidate.phi_deg, baseline.phi_deg)},
          {"v", pct(candidate.v, baseline.v)},
          {"omega", pct(candidate.omega_deg, baseline.omega_deg)}};
}

}  // namespace lmbtrack
