#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmbtrack/simulator.hpp"

namespace lmbtrack {

/// Names accepted by make_scenario.
std::vector<std::string> scenario_names();

/// Parameterized scenario builders: `roundabout`, `urban-intersection`,
/// `long-right-turn`, `rural-intersection`, `s-curve`, `dense-following`.
/// `params` overrides builder defaults (see each builder for keys).
/// Throws ScenarioError for unknown names.
Scenario make_scenario(const std::string& name, const nlohmann::json& params);
Scenario make_scenario(const std::string& name);

/// Dense sampled centerline composed of straights and circular arcs.
class CenterlineBuilder {
 public:
  CenterlineBuilder(const Vec2& start, double heading, double spacing = 0.5);

  CenterlineBuilder& straight(double length);
  /// Positive `angle` turns left, negative right; `radius` > 0.
  CenterlineBuilder& arc(double radius, double angle);

  const std::vector<Vec2>& points() const { return points_; }
  double heading() const { return heading_; }
  Vec2 position() const { return position_; }

 private:
  std::vector<Vec2> points_;
  Vec2 position_;
  double heading_;
  double spacing_;
};

}  // namespace lmbtrack
