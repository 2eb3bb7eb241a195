#pragma once

// Test-only oracles, written directly against definitions and independent
// of the library's update path.

#include <cmath>
#include <vector>

#include "lmbtrack/filter.hpp"

namespace lmbtrack::test {

struct OracleTrackModel {
  std::vector<double> miss_weight;                // per component: w_j (1 - pD_j)
  std::vector<std::vector<double>> det_weight;    // per measurement, per component
  double miss_factor = 0.0;
  std::vector<double> det_factor;                 // per measurement (0 if ungated)
  std::vector<bool> gated;
};

// Closed-form linear-Gaussian factors for h(x) = (x, y), with the same
// 1e-9 covariance regularization and clutter floor the contracts specify.
inline OracleTrackModel oracle_track_model(const BernoulliTrack& track,
                                           const MeasurementScan& scan, double gate_chi2) {
  const double clutter = std::max(scan.sensor.clutter_intensity, 1e-12);
  OracleTrackModel model;
  const std::size_t n_meas = scan.points.size();
  model.det_weight.assign(n_meas, {});
  model.det_factor.assign(n_meas, 0.0);
  model.gated.assign(n_meas, false);

  std::vector<Vec2> z_pred;
  std::vector<Mat2> s_inv;
  std::vector<double> s_det;
  for (const auto& comp : track.density.components) {
    const double pd =
        scan.sensor.fov.contains(comp.mean.position()) ? scan.sensor.detection_prob : 0.0;
    model.miss_weight.push_back(comp.weight * (1.0 - pd));
    model.miss_factor += comp.weight * (1.0 - pd);
    const Mat5 p = 0.5 * (comp.cov + comp.cov.transpose()) + 1e-9 * Mat5::Identity();
    const Mat2 s = p.topLeftCorner<2, 2>() + scan.sensor.measurement_noise;
    z_pred.push_back(comp.mean.position());
    s_inv.push_back(s.inverse());
    s_det.push_back(s.determinant());
  }

  for (std::size_t m = 0; m < n_meas; ++m) {
    bool gated = false;
    for (std::size_t j = 0; j < z_pred.size(); ++j) {
      const Vec2 d = scan.points[m] - z_pred[j];
      if (track.density.components[j].weight > 0.0 &&
          double(d.transpose() * s_inv[j] * d) <= gate_chi2) {
        gated = true;
      }
    }
    model.gated[m] = gated;
    if (!gated) continue;
    for (std::size_t j = 0; j < z_pred.size(); ++j) {
      const auto& comp = track.density.components[j];
      const double pd =
          scan.sensor.fov.contains(comp.mean.position()) ? scan.sensor.detection_prob : 0.0;
      const Vec2 d = scan.points[m] - z_pred[j];
      const double q =
          std::exp(-0.5 * double(d.transpose() * s_inv[j] * d)) / (2.0 * M_PI * std::sqrt(s_det[j]));
      const double w = comp.weight * pd * q / clutter;
      model.det_weight[m].push_back(w);
      model.det_factor[m] += w;
    }
  }
  return model;
}

// Exhaustive global association enumeration (no grouping, no caps):
// posterior existence per track.
inline std::vector<double> brute_force_existence(const LmbDensity& density,
                                                 const MeasurementScan& scan, double gate_chi2) {
  const std::size_t n_tracks = density.tracks.size();
  std::vector<OracleTrackModel> models;
  for (const auto& t : density.tracks) {
    models.push_back(oracle_track_model(t, scan, gate_chi2));
  }

  std::vector<double> numer(n_tracks, 0.0);
  double denom = 0.0;
  std::vector<int> assignment(n_tracks, -2);
  std::vector<bool> taken(scan.points.size(), false);

  auto recurse = [&](auto&& self, std::size_t idx, double weight) -> void {
    if (idx == n_tracks) {
      denom += weight;
      for (std::size_t t = 0; t < n_tracks; ++t) {
        if (assignment[t] != -2) numer[t] += weight;
      }
      return;
    }
    const double r = density.tracks[idx].existence;
    assignment[idx] = -2;
    self(self, idx + 1, weight * (1.0 - r));
    if (r > 0.0) {
      assignment[idx] = -1;
      self(self, idx + 1, weight * r * models[idx].miss_factor);
      for (std::size_t m = 0; m < scan.points.size(); ++m) {
        if (!models[idx].gated[m] || taken[m]) continue;
        taken[m] = true;
        assignment[idx] = static_cast<int>(m);
        self(self, idx + 1, weight * r * models[idx].det_factor[m]);
        taken[m] = false;
      }
    }
    assignment[idx] = -2;
  };
  recurse(recurse, 0, 1.0);

  std::vector<double> out(n_tracks, 0.0);
  for (std::size_t t = 0; t < n_tracks; ++t) out[t] = denom > 0.0 ? numer[t] / denom : 0.0;
  return out;
}

}  // namespace lmbtrack::test
