#include "lmbtrack/scenarios.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "lmbtrack/errors.hpp"

namespace lmbtrack {

CenterlineBuilder::CenterlineBuilder(const Vec2& start, double heading, double spacing)
    : position_(start), heading_(heading), spacing_(spacing) {
  points_.push_back(start);
}

CenterlineBuilder& CenterlineBuilder::straight(double length) {
  const int n = std::max(1, static_cast<int>(std::ceil(length / spacing_)));
  const Vec2 dir{std::cos(heading_), std::sin(heading_)};
  for (int i = 1; i <= n; ++i) {
    points_.push_back(position_ + (length * i / n) * dir);
  }
  position_ = points_.back();
  return *this;
}

CenterlineBuilder& CenterlineBuilder::arc(double radius, double angle) {
  const double side = angle >= 0.0 ? 1.0 : -1.0;
  const Vec2 normal{-std::sin(heading_) * side, std::cos(heading_) * side};
  const Vec2 center = position_ + radius * normal;
  const double a0 = std::atan2(position_(1) - center(1), position_(0) - center(0));
  const int n = std::max(1, static_cast<int>(std::ceil(radius * std::abs(angle) / spacing_)));
  for (int i = 1; i <= n; ++i) {
    const double a = a0 + angle * i / n;
    points_.push_back(center + radius * Vec2{std::cos(a), std::sin(a)});
  }
  position_ = points_.back();
  heading_ = wrap_angle(heading_ + angle);
  return *this;
}

namespace {

double param(const nlohmann::json& params, const char* key, double fallback) {
  return params.is_object() ? params.value(key, fallback) : fallback;
}

bool param_flag(const nlohmann::json& params, const char* key, bool fallback) {
  return params.is_object() ? params.value(key, fallback) : fallback;
}

SensorModel default_sensor(const std::vector<Vec2>& coverage, double p_d, double noise_sigma,
                           double clutter, double margin = 30.0) {
  SensorModel sensor;
  sensor.id = 0;
  sensor.detection_prob = p_d;
  sensor.clutter_intensity = clutter;
  sensor.measurement_noise = Mat2::Identity() * noise_sigma * noise_sigma;
  sensor.fov.bounded = true;
  Vec2 lo = coverage.front(), hi = coverage.front();
  for (const auto& p : coverage) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  sensor.fov.min = lo - Vec2{margin, margin};
  sensor.fov.max = hi + Vec2{margin, margin};
  sensor.position = Vec2{lo(0) - 5.0, lo(1) - 5.0};
  return sensor;
}

// Rectangle ids of one lane in chain order, walking successors from the
// lane's first id.
std::vector<int> lane_chain(const RoadMap& map, int id_prefix) {
  std::vector<int> chain;
  int id = id_prefix;
  while (map.has(id)) {
    chain.push_back(id);
    const auto& succ = map.rectangle(id).successors;
    const int next = id + 1;
    if (std::find(succ.begin(), succ.end(), next) == succ.end()) break;
    id = next;
  }
  return chain;
}

// The ring rectangle whose centerline segment passes closest to `point`.
int closest_rectangle(const RoadMap& map, int id_prefix, const Vec2& point) {
  int best = -1;
  double best_dist = std::numeric_limits<double>::max();
  for (const auto& r : map.rectangles()) {
    if (r.id < id_prefix || r.id >= id_prefix + 1000) continue;
    const double d = (r.center - point).norm();
    if (d < best_dist) {
      best_dist = d;
      best = r.id;
    }
  }
  return best;
}

Scenario long_right_turn(const nlohmann::json& params) {
  const double radius = param(params, "radius", 40.0);
  const double lead_in = param(params, "lead_in", 40.0);
  const double lead_out = param(params, "lead_out", 40.0);
  const double tolerance = param(params, "tolerance", 0.005);
  const double speed = param(params, "speed", 10.0);

  CenterlineBuilder line({0.0, 0.0}, 0.0, 0.25);
  line.straight(lead_in).arc(radius, -M_PI / 2.0).straight(lead_out);

  RoadMapSpec map_spec;
  map_spec.default_width = param(params, "width", 3.5);
  map_spec.default_tolerance = tolerance;
  map_spec.lanes.push_back({0, line.points(), {}, {}});

  Scenario scenario;
  scenario.name = "long-right-turn";
  scenario.map = std::make_shared<RoadMap>(build_road_map(map_spec));
  scenario.step = param(params, "step", 0.1);
  const double path_length = RoutePath(line.points()).length();
  scenario.duration = param(params, "duration", std::floor(path_length / speed) - 1.0);
  scenario.reference_vehicle = 0;

  VehicleSpec vehicle;
  vehicle.id = 0;
  vehicle.initial_speed = speed;
  vehicle.profile.knots = {{0.0, speed}};
  vehicle.centerline = line.points();
  vehicle.route = lane_chain(*scenario.map, 0);
  scenario.vehicles.push_back(std::move(vehicle));

  scenario.sensors.push_back(default_sensor(line.points(), param(params, "p_d", 0.9),
                                            param(params, "noise_sigma", 0.5),
                                            param(params, "clutter", 1e-5)));
  return scenario;
}

Scenario s_curve(const nlohmann::json& params) {
  const double radius = param(params, "radius", 25.0);
  const double speed = param(params, "speed", 10.0);
  const double start_heading = 40.0 * M_PI / 180.0;

  CenterlineBuilder line({0.0, 0.0}, start_heading, 0.25);
  line.straight(param(params, "lead_in", 60.0))
      .arc(radius, -80.0 * M_PI / 180.0)
      .arc(radius, 38.0 * M_PI / 180.0)
      .straight(param(params, "lead_out", 90.0));

  RoadMapSpec map_spec;
  map_spec.default_width = param(params, "width", 3.5);
  map_spec.default_tolerance = param(params, "tolerance", 0.1);
  map_spec.lanes.push_back({0, line.points(), {}, {}});

  Scenario scenario;
  scenario.name = "s-curve";
  scenario.map = std::make_shared<RoadMap>(build_road_map(map_spec));
  scenario.step = param(params, "step", 0.1);
  const double path_length = RoutePath(line.points()).length();
  scenario.duration = param(params, "duration", std::floor(path_length / speed) - 1.0);
  scenario.reference_vehicle = 0;

  VehicleSpec vehicle;
  vehicle.id = 0;
  vehicle.initial_speed = speed;
  vehicle.profile.knots = {{0.0, speed}};
  vehicle.centerline = line.points();
  vehicle.route = lane_chain(*scenario.map, 0);
  scenario.vehicles.push_back(std::move(vehicle));

  scenario.sensors.push_back(default_sensor(line.points(), param(params, "p_d", 0.9),
                                            param(params, "noise_sigma", 0.9),
                                            param(params, "clutter", 1e-5)));
  return scenario;
}

Scenario roundabout(const nlohmann::json& params) {
  const double radius = param(params, "radius", 20.0);
  const double entry_len = param(params, "entry", 40.0);
  const double exit_len = param(params, "exit", 30.0);
  const double speed = param(params, "speed", 10.0);
  const double tolerance = param(params, "tolerance", 0.1);

  // Entry runs east along y = -radius and joins the ring tangentially at
  // (0, -radius); the ring is counterclockwise; the exit leaves
  // tangentially at (-radius, 0) heading south.
  CenterlineBuilder entry({-entry_len, -radius}, 0.0, 0.25);
  entry.straight(entry_len);
  CenterlineBuilder ring({0.0, -radius}, 0.0, 0.25);
  ring.arc(radius, 2.0 * M_PI);
  CenterlineBuilder exit({-radius, 0.0}, -M_PI / 2.0, 0.25);
  exit.straight(exit_len);

  RoadMapSpec map_spec;
  map_spec.default_width = param(params, "width", 3.5);
  map_spec.default_tolerance = tolerance;
  map_spec.lanes.push_back({0, entry.points(), {}, {}});
  map_spec.lanes.push_back({100, ring.points(), {}, {}});
  map_spec.lanes.push_back({300, exit.points(), {}, {}});
  RoadMap staged = build_road_map(map_spec);

  const std::vector<int> entry_ids = lane_chain(staged, 0);
  const std::vector<int> ring_ids = lane_chain(staged, 100);
  const std::vector<int> exit_ids = lane_chain(staged, 300);
  const int ring_at_entry = closest_rectangle(staged, 100, Vec2{2.0, -radius});
  const int ring_at_exit = closest_rectangle(staged, 100, Vec2{-radius, 2.0});
  map_spec.links.emplace_back(entry_ids.back(), ring_at_entry);
  map_spec.links.emplace_back(ring_ids.back(), ring_ids.front());  // close the loop
  map_spec.links.emplace_back(ring_at_exit, exit_ids.front());

  Scenario scenario;
  scenario.name = "roundabout";
  scenario.map = std::make_shared<RoadMap>(build_road_map(map_spec));
  scenario.step = param(params, "step", 0.1);
  scenario.reference_vehicle = 0;

  // Vehicle path: entry, three quarters of the ring, exit.
  CenterlineBuilder path({-entry_len, -radius}, 0.0, 0.25);
  path.straight(entry_len).arc(radius, 1.5 * M_PI).straight(exit_len);
  const double path_length = RoutePath(path.points()).length();
  scenario.duration = param(params, "duration", std::floor(path_length / speed) - 1.0);

  // Route: entry chain, ring chain from the entry junction around to the
  // exit junction, exit chain.
  std::vector<int> route = entry_ids;
  int id = ring_at_entry;
  while (id != ring_at_exit) {
    route.push_back(id);
    const auto& succ = scenario.map->rectangle(id).successors;
    int next = -1;
    for (int s : succ) {
      if (s >= 100 && s < 300) next = s;
    }
    if (next < 0) break;
    id = next;
  }
  route.push_back(ring_at_exit);
  route.insert(route.end(), exit_ids.begin(), exit_ids.end());

  VehicleSpec vehicle;
  vehicle.id = 0;
  vehicle.initial_speed = speed;
  vehicle.profile.knots = {{0.0, speed}};
  vehicle.centerline = path.points();
  vehicle.route = route;
  scenario.vehicles.push_back(std::move(vehicle));

  scenario.sensors.push_back(default_sensor(path.points(), param(params, "p_d", 0.9),
                                            param(params, "noise_sigma", 0.9),
                                            param(params, "clutter", 1e-5)));
  return scenario;
}

Scenario crossing(const std::string& name, double leg, double speed, double turn_radius,
                  const nlohmann::json& params) {
  // Two perpendicular single-lane roads crossing at the origin; the west
  // approach forks into the east and north exits.
  std::vector<Vec2> west{{-leg, 0.0}, {0.0, 0.0}};
  std::vector<Vec2> east{{0.0, 0.0}, {leg, 0.0}};
  std::vector<Vec2> north{{0.0, 0.0}, {0.0, leg}};

  RoadMapSpec map_spec;
  map_spec.default_width = param(params, "width", 3.5);
  map_spec.default_tolerance = param(params, "tolerance", 0.2);
  map_spec.lanes.push_back({0, west, {}, {}});
  map_spec.lanes.push_back({100, east, {}, {}});
  map_spec.lanes.push_back({200, north, {}, {}});
  map_spec.links.emplace_back(0, 100);
  map_spec.links.emplace_back(0, 200);

  Scenario scenario;
  scenario.name = name;
  scenario.map = std::make_shared<RoadMap>(build_road_map(map_spec));
  scenario.step = param(params, "step", 0.1);
  scenario.duration = param(params, "duration", std::floor(2.0 * leg / speed) - 1.0);
  scenario.reference_vehicle = 0;

  // Vehicle 0 drives straight through; vehicle 1 turns north.
  CenterlineBuilder straight_path({-leg, 0.0}, 0.0, 0.25);
  straight_path.straight(2.0 * leg);
  VehicleSpec through;
  through.id = 0;
  through.lane = 0;
  through.initial_speed = speed;
  through.profile.knots = {{0.0, speed}};
  through.centerline = straight_path.points();
  through.route = {0, 100};
  scenario.vehicles.push_back(std::move(through));

  CenterlineBuilder turn_path({-leg, 0.0}, 0.0, 0.25);
  turn_path.straight(leg - turn_radius).arc(turn_radius, M_PI / 2.0).straight(leg - turn_radius);
  VehicleSpec turner;
  turner.id = 1;
  turner.lane = 1;
  turner.spawn_time = param(params, "second_spawn", 3.0);
  turner.initial_speed = 0.8 * speed;
  turner.profile.knots = {{0.0, 0.8 * speed}};
  turner.centerline = turn_path.points();
  turner.route = {0, 200};
  scenario.vehicles.push_back(std::move(turner));

  std::vector<Vec2> coverage{{-leg, -leg}, {leg, leg}};
  scenario.sensors.push_back(default_sensor(coverage, param(params, "p_d", 0.9),
                                            param(params, "noise_sigma", 0.5),
                                            param(params, "clutter", 1e-5)));
  return scenario;
}

Scenario dense_following(const nlohmann::json& params) {
  const double lane_length = param(params, "lane_length", 600.0);
  const double leader_speed = param(params, "leader_speed", 10.0);
  const double gap0 = param(params, "gap_front", 20.0);
  const double gap1 = param(params, "gap_rear", 20.0);
  const double leader_start = param(params, "leader_start", 100.0);
  const bool brake = param_flag(params, "brake", true);
  const double brake_time = param(params, "brake_time", 8.0);
  const double brake_speed = param(params, "brake_speed", 1.0);
  const bool dropout = param_flag(params, "dropout", true);

  CenterlineBuilder line({0.0, 0.0}, 0.0, 1.0);
  line.straight(lane_length);

  RoadMapSpec map_spec;
  map_spec.default_width = param(params, "width", 3.5);
  map_spec.default_tolerance = 0.2;
  map_spec.lanes.push_back({0, line.points(), {}, {}});

  Scenario scenario;
  scenario.name = "dense-following";
  scenario.map = std::make_shared<RoadMap>(build_road_map(map_spec));
  scenario.step = param(params, "step", 0.25);
  scenario.duration = param(params, "duration", 18.0);
  scenario.reference_vehicle = 1;

  VehicleSpec leader;
  leader.id = 0;
  leader.lane = 0;
  leader.initial_speed = leader_speed;
  leader.initial_arc = leader_start;
  leader.centerline = line.points();
  leader.route = lane_chain(*scenario.map, 0);
  if (brake) {
    leader.profile.knots = {{0.0, leader_speed},
                            {brake_time, leader_speed},
                            {brake_time + 2.0, brake_speed},
                            {scenario.duration, brake_speed}};
  } else {
    leader.profile.knots = {{0.0, leader_speed}};
  }
  scenario.vehicles.push_back(leader);

  auto follower = [&](int id, double arc) {
    VehicleSpec v;
    v.id = id;
    v.lane = 0;
    v.behavior = VehicleSpec::Behavior::kIdmFollow;
    v.desired_speed = param(params, "desired_speed", 2.0 * leader_speed);
    v.initial_speed = leader_speed;
    v.initial_arc = arc;
    v.centerline = line.points();
    v.route = lane_chain(*scenario.map, 0);
    return v;
  };
  scenario.vehicles.push_back(follower(1, leader_start - gap0));
  scenario.vehicles.push_back(follower(2, leader_start - gap0 - gap1));

  if (dropout) {
    scenario.dropouts.push_back({1, brake_time, brake_time + 2.0});
  }

  scenario.sensors.push_back(default_sensor(line.points(), param(params, "p_d", 0.45),
                                            param(params, "noise_sigma", 0.5),
                                            param(params, "clutter", 1e-5), 20.0));
  return scenario;
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"roundabout", "urban-intersection", "long-right-turn",
          "rural-intersection", "s-curve", "dense-following"};
}

Scenario make_scenario(const std::string& name) { return make_scenario(name, nlohmann::json{}); }

Scenario make_scenario(const std::string& name, const nlohmann::json& params) {
  Scenario scenario;
  if (name == "long-right-turn") {
    scenario = long_right_turn(params);
  } else if (name == "s-curve") {
    scenario = s_curve(params);
  } else if (name == "roundabout") {
    scenario = roundabout(params);
  } else if (name == "urban-intersection") {
    scenario = crossing("urban-intersection", param(params, "leg", 60.0),
                        param(params, "speed", 10.0), param(params, "turn_radius", 8.0), params);
  } else if (name == "rural-intersection") {
    scenario = crossing("rural-intersection", param(params, "leg", 100.0),
                        param(params, "speed", 14.0), param(params, "turn_radius", 15.0), params);
  } else if (name == "dense-following") {
    scenario = dense_following(params);
  } else {
    throw ScenarioError("unknown scenario: " + name);
  }
  if (params.is_object() && params.contains("seed")) {
    scenario.seed = params.at("seed").get<std::uint64_t>();
  }
  validate_scenario(scenario);
  return scenario;
}

}  // namespace lmbtrack
