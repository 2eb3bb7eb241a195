#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmbtrack/filter.hpp"
#include "lmbtrack/road_map.hpp"

namespace lmbtrack {

/// Piecewise-linear speed profile over time; constant extrapolation.
struct SpeedProfile {
  std::vector<std::pair<double, double>> knots;  // (time, speed)
  double at(double t) const;
};

/// Arc-length-parameterized path. Ground truth follows this exactly, so
/// the truth never shares the filter's motion model.
class RoutePath {
 public:
  RoutePath() = default;
  explicit RoutePath(std::vector<Vec2> points);

  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  /// Position and heading at arc coordinate `s` (clamped to the path).
  std::pair<Vec2, double> pose_at(double s) const;
  const std::vector<Vec2>& points() const { return points_; }

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

struct VehicleSpec {
  int id = 0;
  int lane = 0;  // vehicles on the same lane interact via IDM follow
  double spawn_time = 0.0;
  double initial_speed = 10.0;
  double initial_arc = 0.0;
  enum class Behavior { kScripted, kIdmFollow };
  Behavior behavior = Behavior::kScripted;
  SpeedProfile profile;          // scripted behavior
  double desired_speed = 15.0;   // IDM free term target
  std::vector<Vec2> centerline;  // dense reference line the vehicle follows
  std::vector<int> route;        // rectangle chain, validated against the map
};

/// Detectability blackout for one vehicle (applies to every sensor).
struct DropoutWindow {
  int vehicle = 0;
  double start = 0.0;
  double end = 0.0;
};

struct Scenario {
  std::string name;
  std::shared_ptr<const RoadMap> map;
  std::vector<VehicleSpec> vehicles;
  std::vector<SensorModel> sensors;
  std::vector<DropoutWindow> dropouts;
  IdmParams idm;
  double duration = 30.0;
  double step = 0.1;
  std::uint64_t seed = 1;
  bool occlusion = false;  // geometric disc shadowing, radius 1.5 m
  int reference_vehicle = 0;
};

struct TruthEntry {
  int vehicle = 0;
  StateVector state;
};

struct GroundTruthLog {
  double step_time = 0.1;
  std::vector<std::vector<TruthEntry>> steps;

  const TruthEntry* find(std::size_t step, int vehicle) const;
};

struct SimulationResult {
  GroundTruthLog truth;
  /// One scan per sensor per step, ordered by (step, sensor index).
  std::vector<MeasurementScan> scans;
  /// Per scan: clutter flag per point. Diagnostics only; never fed to the
  /// filter.
  std::vector<std::vector<bool>> clutter_flags;
};

/// Throws ScenarioError on invalid scenarios (bad step, disconnected
/// route, unbounded clutter region).
void validate_scenario(const Scenario& scenario);

SimulationResult simulate(const Scenario& scenario);
SimulationResult simulate(const Scenario& scenario, std::uint64_t seed_override);

/// Deterministic per-replicate seed derivation (splitmix64 over the base
/// seed and replicate index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t replicate);

Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& scenario);

std::string truth_to_csv(const GroundTruthLog& truth);
std::string scans_to_csv(const SimulationResult& result);

}  // namespace lmbtrack
