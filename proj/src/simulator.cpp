#include "lmbtrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lmbtrack/errors.hpp"
#include "lmbtrack/idm.hpp"

namespace lmbtrack {

namespace {

constexpr double kOcclusionRadius = 1.5;
constexpr double kMaxBrake = 9.81;

double segment_point_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

struct VehicleRuntime {
  const VehicleSpec* spec = nullptr;
  RoutePath path;
  bool active = false;
  bool finished = false;
  double arc = 0.0;
  double speed = 0.0;
  double heading = 0.0;
  double omega = 0.0;
  Vec2 position{0.0, 0.0};
};

}  // namespace

double SpeedProfile::at(double t) const {
  if (knots.empty()) return 0.0;
  if (t <= knots.front().first) return knots.front().second;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const auto& [t0, v0] = knots[i];
    const auto& [t1, v1] = knots[i + 1];
    if (t <= t1) {
      const double a = t1 > t0 ? (t - t0) / (t1 - t0) : 1.0;
      return v0 + a * (v1 - v0);
    }
  }
  return knots.back().second;
}

RoutePath::RoutePath(std::vector<Vec2> points) : points_(std::move(points)) {
  cumulative_.reserve(points_.size());
  double s = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (i > 0) s += (points_[i] - points_[i - 1]).norm();
    cumulative_.push_back(s);
  }
}

std::pair<Vec2, double> RoutePath::pose_at(double s) const {
  if (points_.size() < 2) {
    throw ScenarioError("route path needs at least 2 points");
  }
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t i = std::min<std::size_t>(std::distance(cumulative_.begin(), it),
                                        cumulative_.size() - 1);
  if (i == 0) i = 1;
  const Vec2 a = points_[i - 1];
  const Vec2 b = points_[i];
  const double seg = cumulative_[i] - cumulative_[i - 1];
  const double t = seg > 0.0 ? (s - cumulative_[i - 1]) / seg : 0.0;
  const Vec2 d = b - a;
  return {a + t * d, std::atan2(d(1), d(0))};
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t replicate) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (replicate + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void validate_scenario(const Scenario& scenario) {
  if (!(scenario.step > 0.0)) throw ScenarioError("scenario: step must be positive");
  if (!(scenario.duration > 0.0)) throw ScenarioError("scenario: duration must be positive");
  if (scenario.vehicles.empty()) throw ScenarioError("scenario: no vehicles");
  for (const auto& v : scenario.vehicles) {
    if (v.centerline.size() < 2 && v.route.size() < 1) {
      throw ScenarioError("scenario: vehicle " + std::to_string(v.id) +
                          " has neither centerline nor route");
    }
    if (!v.route.empty()) {
      if (scenario.map == nullptr) {
        throw ScenarioError("scenario: vehicle route given but no map");
      }
      for (int id : v.route) {
        if (!scenario.map->has(id)) {
          throw ScenarioError("scenario: route references unknown rectangle " +
                              std::to_string(id));
        }
      }
      for (std::size_t i = 0; i + 1 < v.route.size(); ++i) {
        const auto& succ = scenario.map->rectangle(v.route[i]).successors;
        if (std::find(succ.begin(), succ.end(), v.route[i + 1]) == succ.end()) {
          throw ScenarioError("scenario: route of vehicle " + std::to_string(v.id) +
                              " is not a successor chain at rectangle " +
                              std::to_string(v.route[i]));
        }
      }
    }
  }
  for (const auto& s : scenario.sensors) {
    if (s.clutter_intensity > 0.0 && !s.fov.bounded) {
      throw ScenarioError("scenario: clutter requires a bounded field of view");
    }
    Eigen::LLT<Mat2> llt(s.measurement_noise);
    if (llt.info() != Eigen::Success) {
      throw ScenarioError("scenario: measurement noise must be positive definite");
    }
  }
}

SimulationResult simulate(const Scenario& scenario, std::uint64_t seed_override) {
  Scenario copy = scenario;
  copy.seed = seed_override;
  return simulate(copy);
}

SimulationResult simulate(const Scenario& scenario) {
  validate_scenario(scenario);
  const double dt = scenario.step;
  const int n_steps = static_cast<int>(std::llround(scenario.duration / dt)) + 1;

  std::vector<VehicleRuntime> vehicles;
  vehicles.reserve(scenario.vehicles.size());
  for (const auto& spec : scenario.vehicles) {
    VehicleRuntime rt;
    rt.spec = &spec;
    if (spec.centerline.size() >= 2) {
      rt.path = RoutePath(spec.centerline);
    } else {
      // Fall back to the chain of rectangle centerline segments.
      std::vector<Vec2> pts;
      for (std::size_t i = 0; i < spec.route.size(); ++i) {
        const Rectangle& r = scenario.map->rectangle(spec.route[i]);
        if (i == 0) pts.push_back(r.entry_point());
        pts.push_back(r.exit_point());
      }
      rt.path = RoutePath(std::move(pts));
    }
    vehicles.push_back(std::move(rt));
  }
  // Vehicles interact in id order; ensure the spec list is usable as-is.
  std::vector<int> order(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return vehicles[a].spec->id < vehicles[b].spec->id; });

  std::mt19937_64 rng(scenario.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SimulationResult result;
  result.truth.step_time = dt;
  result.truth.steps.resize(n_steps);

  for (int k = 0; k < n_steps; ++k) {
    const double t = k * dt;

    // Start-of-step snapshot so followers react to where the leader was,
    // not to its already-advanced state.
    struct ArcSnapshot {
      bool active;
      double arc;
      double speed;
      int lane;
    };
    std::vector<ArcSnapshot> before(vehicles.size());
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      before[i] = {vehicles[i].active && !vehicles[i].finished, vehicles[i].arc,
                   vehicles[i].speed, vehicles[i].spec->lane};
    }

    for (int idx : order) {
      VehicleRuntime& rt = vehicles[idx];
      const VehicleSpec& spec = *rt.spec;
      if (rt.finished || t < spec.spawn_time) continue;
      if (!rt.active) {
        rt.active = true;
        rt.arc = spec.initial_arc;
        rt.speed = spec.initial_speed;
        auto [pos, heading] = rt.path.pose_at(rt.arc);
        rt.position = pos;
        rt.heading = heading;
        rt.omega = 0.0;
      } else {
        if (spec.behavior == VehicleSpec::Behavior::kScripted) {
          rt.speed = std::max(0.0, spec.profile.at(t));
        } else {
          // Nearest vehicle ahead on the same lane at the start of the step.
          const ArcSnapshot* leader = nullptr;
          for (std::size_t i = 0; i < before.size(); ++i) {
            if (static_cast<int>(i) == idx || !before[i].active) continue;
            if (before[i].lane != spec.lane) continue;
            if (before[i].arc <= before[idx].arc) continue;
            if (leader == nullptr || before[i].arc < leader->arc) leader = &before[i];
          }
          double accel;
          if (leader != nullptr) {
            const double gap = leader->arc - before[idx].arc;
            accel = gap > 0.0
                        ? idm_accel(rt.speed, spec.desired_speed, rt.speed - leader->speed, gap,
                                    scenario.idm)
                        : -kMaxBrake;
          } else {
            accel = scenario.idm.max_accel *
                    (1.0 - std::pow(rt.speed / spec.desired_speed, 4.0));
          }
          accel = std::clamp(accel, -kMaxBrake, scenario.idm.max_accel);
          rt.speed = std::max(0.0, rt.speed + accel * dt);
        }
        rt.arc += rt.speed * dt;
        if (rt.arc > rt.path.length()) {
          rt.finished = true;
          rt.active = false;
          continue;
        }
        auto [pos, heading] = rt.path.pose_at(rt.arc);
        rt.position = pos;
        rt.omega = wrap_angle(heading - rt.heading) / dt;
        rt.heading = heading;
      }
      result.truth.steps[k].push_back(
          {spec.id, StateVector{rt.position(0), rt.position(1), rt.speed, rt.heading, rt.omega}});
    }

    for (const auto& sensor : scenario.sensors) {
      MeasurementScan scan;
      scan.time = t;
      scan.step = k;
      scan.sensor = sensor;
      std::vector<bool> flags;

      for (int idx : order) {
        const VehicleRuntime& rt = vehicles[idx];
        if (!rt.active) continue;
        const double coin = uniform(rng);

        bool detectable = sensor.fov.contains(rt.position);
        for (const auto& d : scenario.dropouts) {
          if (d.vehicle == rt.spec->id && t >= d.start && t < d.end) detectable = false;
        }
        if (detectable && scenario.occlusion) {
          for (int jdx : order) {
            const VehicleRuntime& other = vehicles[jdx];
            if (jdx == idx || !other.active) continue;
            if (segment_point_distance(sensor.position, rt.position, other.position) <
                kOcclusionRadius) {
              detectable = false;
              break;
            }
          }
        }
        if (detectable && coin < sensor.detection_prob) {
          Eigen::LLT<Mat2> llt(sensor.measurement_noise);
          const Mat2 l = llt.matrixL();
          const Vec2 noise = l * Vec2{gauss(rng), gauss(rng)};
          scan.points.push_back(rt.position + noise);
          flags.push_back(false);
        }
      }

      if (sensor.clutter_intensity > 0.0 && sensor.fov.bounded) {
        std::poisson_distribution<int> poisson(sensor.clutter_intensity * sensor.fov.area());
        const int n_clutter = poisson(rng);
        for (int c = 0; c < n_clutter; ++c) {
          const double x = sensor.fov.min(0) + uniform(rng) * (sensor.fov.max(0) - sensor.fov.min(0));
          const double y = sensor.fov.min(1) + uniform(rng) * (sensor.fov.max(1) - sensor.fov.min(1));
          scan.points.push_back(Vec2{x, y});
          flags.push_back(true);
        }
      }

      result.scans.push_back(std::move(scan));
      result.clutter_flags.push_back(std::move(flags));
    }
  }
  return result;
}

const TruthEntry* GroundTruthLog::find(std::size_t step, int vehicle) const {
  if (step >= steps.size()) return nullptr;
  for (const auto& e : steps[step]) {
    if (e.vehicle == vehicle) return &e;
  }
  return nullptr;
}

namespace {

FieldOfView fov_from_json(const nlohmann::json& doc) {
  FieldOfView fov;
  if (doc.is_string() && doc.get<std::string>() == "full") return fov;
  fov.bounded = true;
  fov.min = Vec2{doc.at(0).get<double>(), doc.at(1).get<double>()};
  fov.max = Vec2{doc.at(2).get<double>(), doc.at(3).get<double>()};
  return fov;
}

nlohmann::json fov_to_json(const FieldOfView& fov) {
  if (!fov.bounded) return "full";
  return {fov.min(0), fov.min(1), fov.max(0), fov.max(1)};
}

}  // namespace

SensorModel sensor_from_json(const nlohmann::json& doc) {
  SensorModel sensor;
  sensor.id = doc.value("id", 0);
  sensor.detection_prob = doc.value("detection_prob", 0.85);
  sensor.clutter_intensity = doc.value("clutter_intensity", 1e-5);
  if (doc.contains("noise_sigma")) {
    const double sigma = doc.at("noise_sigma").get<double>();
    sensor.measurement_noise = Mat2::Identity() * sigma * sigma;
  }
  if (doc.contains("fov")) sensor.fov = fov_from_json(doc.at("fov"));
  if (doc.contains("position")) {
    sensor.position = Vec2{doc.at("position").at(0).get<double>(),
                           doc.at("position").at(1).get<double>()};
  }
  return sensor;
}

nlohmann::json sensor_to_json(const SensorModel& sensor) {
  return {{"id", sensor.id},
          {"detection_prob", sensor.detection_prob},
          {"clutter_intensity", sensor.clutter_intensity},
          {"noise_sigma", std::sqrt(sensor.measurement_noise(0, 0))},
          {"fov", fov_to_json(sensor.fov)},
          {"position", {sensor.position(0), sensor.position(1)}}};
}

Scenario scenario_from_json(const nlohmann::json& doc) {
  Scenario scenario;
  try {
    scenario.name = doc.value("name", "scenario");
    scenario.duration = doc.at("duration").get<double>();
    scenario.step = doc.at("step").get<double>();
    scenario.seed = doc.value("seed", 1ULL);
    scenario.occlusion = doc.value("occlusion", false);
    scenario.reference_vehicle = doc.value("reference_vehicle", 0);
    if (doc.contains("map")) {
      scenario.map = std::make_shared<RoadMap>(load_road_map(doc.at("map")));
    }
    if (doc.contains("idm")) {
      const auto& idm = doc.at("idm");
      scenario.idm.min_gap = idm.value("s0", scenario.idm.min_gap);
      scenario.idm.time_gap = idm.value("T", scenario.idm.time_gap);
      scenario.idm.max_accel = idm.value("a", scenario.idm.max_accel);
      scenario.idm.comfort_decel = idm.value("b", scenario.idm.comfort_decel);
    }
    for (const auto& v : doc.at("vehicles")) {
      VehicleSpec spec;
      spec.id = v.at("id").get<int>();
      spec.lane = v.value("lane", 0);
      spec.spawn_time = v.value("spawn_time", 0.0);
      spec.initial_speed = v.value("initial_speed", 10.0);
      spec.initial_arc = v.value("initial_arc", 0.0);
      const std::string behavior = v.value("behavior", "scripted");
      if (behavior == "idm-follow") {
        spec.behavior = VehicleSpec::Behavior::kIdmFollow;
      } else if (behavior == "scripted") {
        spec.behavior = VehicleSpec::Behavior::kScripted;
      } else {
        throw ScenarioError("scenario: unknown behavior " + behavior);
      }
      spec.desired_speed = v.value("desired_speed", 15.0);
      if (v.contains("profile")) {
        for (const auto& knot : v.at("profile")) {
          spec.profile.knots.emplace_back(knot.at(0).get<double>(), knot.at(1).get<double>());
        }
      } else {
        spec.profile.knots.emplace_back(0.0, spec.initial_speed);
      }
      if (v.contains("centerline")) {
        for (const auto& p : v.at("centerline")) {
          spec.centerline.push_back(Vec2{p.at(0).get<double>(), p.at(1).get<double>()});
        }
      }
      if (v.contains("route")) spec.route = v.at("route").get<std::vector<int>>();
      scenario.vehicles.push_back(std::move(spec));
    }
    for (const auto& s : doc.at("sensors")) scenario.sensors.push_back(sensor_from_json(s));
    if (doc.contains("dropouts")) {
      for (const auto& d : doc.at("dropouts")) {
        scenario.dropouts.push_back({d.at("vehicle").get<int>(), d.at("start").get<double>(),
                                     d.at("end").get<double>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("scenario document: ") + e.what());
  }
  return scenario;
}

nlohmann::json scenario_to_json(const Scenario& scenario) {
  nlohmann::json vehicles = nlohmann::json::array();
  for (const auto& v : scenario.vehicles) {
    nlohmann::json profile = nlohmann::json::array();
    for (const auto& [t, s] : v.profile.knots) profile.push_back({t, s});
    nlohmann::json centerline = nlohmann::json::array();
    for (const auto& p : v.centerline) centerline.push_back({p(0), p(1)});
    vehicles.push_back(
        {{"id", v.id},
         {"lane", v.lane},
         {"spawn_time", v.spawn_time},
         {"initial_speed", v.initial_speed},
         {"initial_arc", v.initial_arc},
         {"behavior", v.behavior == VehicleSpec::Behavior::kIdmFollow ? "idm-follow" : "scripted"},
         {"desired_speed", v.desired_speed},
         {"profile", profile},
         {"centerline", centerline},
         {"route", v.route}});
  }
  nlohmann::json sensors = nlohmann::json::array();
  for (const auto& s : scenario.sensors) sensors.push_back(sensor_to_json(s));
  nlohmann::json dropouts = nlohmann::json::array();
  for (const auto& d : scenario.dropouts) {
    dropouts.push_back({{"vehicle", d.vehicle}, {"start", d.start}, {"end", d.end}});
  }
  nlohmann::json doc = {{"name", scenario.name},
                        {"duration", scenario.duration},
                        {"step", scenario.step},
                        {"seed", scenario.seed},
                        {"occlusion", scenario.occlusion},
                        {"reference_vehicle", scenario.reference_vehicle},
                        {"idm",
                         {{"s0", scenario.idm.min_gap},
                          {"T", scenario.idm.time_gap},
                          {"a", scenario.idm.max_accel},
                          {"b", scenario.idm.comfort_decel}}},
                        {"vehicles", vehicles},
                        {"sensors", sensors},
                        {"dropouts", dropouts}};
  return doc;
}

std::string truth_to_csv(const GroundTruthLog& truth) {
  std::ostringstream out;
  out << "step,vehicle_id,x,y,v,phi,omega\n";
  out.precision(17);
  for (std::size_t k = 0; k < truth.steps.size(); ++k) {
    for (const auto& e : truth.steps[k]) {
      out << k << ',' << e.vehicle << ',' << e.state.x << ',' << e.state.y << ',' << e.state.v
          << ',' << e.state.phi << ',' << e.state.omega << '\n';
    }
  }
  return out.str();
}

std::string scans_to_csv(const SimulationResult& result) {
  std::ostringstream out;
  out << "step,sensor_id,meas_x,meas_y,is_clutter\n";
  out.precision(17);
  for (std::size_t i = 0; i < result.scans.size(); ++i) {
    const auto& scan = result.scans[i];
    for (std::size_t m = 0; m < scan.points.size(); ++m) {
      out << scan.step << ',' << scan.sensor.id << ',' << scan.points[m](0) << ','
          << scan.points[m](1) << ',' << (result.clutter_flags[i][m] ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

}  // namespace lmbtrack
