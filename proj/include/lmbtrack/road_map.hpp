#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmbtrack/state.hpp"

namespace lmbtrack {

/// Oriented lane rectangle. `orientation` is the direction of travel;
/// `successors` holds the ids of rectangles reachable next along the lane.
struct Rectangle {
  int id = 0;
  Vec2 center{0.0, 0.0};
  double length = 0.0;
  double width = 0.0;
  double orientation = 0.0;
  std::vector<int> successors;

  /// Boundary-inclusive point-in-oriented-rectangle test.
  bool contains(const Vec2& point) const;

  /// Along-lane distance from `point` to the downstream short edge,
  /// in [0, length]. Throws std::invalid_argument if `point` is outside.
  double distance_to_exit(const Vec2& point) const;

  /// Signed coordinates of `point` in the rectangle frame:
  /// u along `orientation`, w across it.
  Vec2 local_coordinates(const Vec2& point) const;

  /// Start/end of the centerline segment the rectangle was fitted to.
  Vec2 entry_point() const;
  Vec2 exit_point() const;
};

/// Ramer iterative end-point fit: keeps a subsequence of `points`
/// (always including both endpoints) such that every input point lies
/// within `tolerance` of the simplified chain.
/// Throws std::invalid_argument for fewer than 2 points or tolerance <= 0.
std::vector<Vec2> simplify_polyline(const std::vector<Vec2>& points, double tolerance);

/// One rectangle per consecutive point pair: center at the segment
/// midpoint, length = segment length, orientation = segment direction.
/// Ids run from `id_seed`; rectangle i gets rectangle i+1 as successor.
/// Zero-length segments are skipped (counted in `skipped` when given).
std::vector<Rectangle> fit_rectangles(const std::vector<Vec2>& simplified, double width,
                                      int id_seed, int* skipped = nullptr);

/// Adds `to` to the successor list of `from` if absent (idempotent).
/// Throws std::invalid_argument on unknown ids or a self-link.
void link_lanes(std::vector<Rectangle>& rectangles, int from, int to);

/// Immutable set of lane rectangles with a uniform-grid point index.
/// All queries are read-only and thread-safe.
class RoadMap {
 public:
  RoadMap() = default;
  explicit RoadMap(std::vector<Rectangle> rectangles);

  std::size_t size() const { return rectangles_.size(); }
  const std::vector<Rectangle>& rectangles() const { return rectangles_; }

  /// Throws std::invalid_argument for an unknown id.
  const Rectangle& rectangle(int id) const;
  bool has(int id) const;

  /// Ids of all rectangles containing `point` (ascending). May be empty
  /// (off-road) or hold several ids where rectangles overlap.
  std::vector<int> rectangles_containing(const Vec2& point) const;

  /// Among rectangles containing `point`, the one whose orientation is
  /// angularly closest to `heading`; nullptr when off-road.
  const Rectangle* canonical_rectangle(const Vec2& point, double heading) const;

  /// Ids reachable from `start` via at most `max_hops` successor hops,
  /// including `start` itself.
  std::vector<int> reachable(int start, int max_hops) const;

 private:
  std::vector<Rectangle> rectangles_;  // sorted by id
  // Uniform grid over the bounding box of all rectangles; each cell lists
  // the rectangles whose bounding box overlaps it.
  double cell_size_ = 1.0;
  Vec2 grid_min_{0.0, 0.0};
  Vec2 grid_max_{0.0, 0.0};
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<int>> cells_;

  void build_index();
};

/// Lane description fed to the map loader: a dense reference line plus the
/// fit parameters for it.
struct LaneSpec {
  int id_prefix = 0;
  std::vector<Vec2> points;
  std::optional<double> width;
  std::optional<double> tolerance;
};

struct RoadMapSpec {
  std::vector<LaneSpec> lanes;
  std::vector<std::pair<int, int>> links;
  double default_width = 3.5;
  double default_tolerance = 0.5;
};

/// Builds a map by simplifying each lane, fitting rectangles, and applying
/// the explicit links.
RoadMap build_road_map(const RoadMapSpec& spec);

/// JSON document form: {"width":..,"tolerance":..,"lanes":[{"id_prefix":..,
/// "width":..,"tolerance":..,"points":[[x,y],..]}],"links":[[from,to],..]}.
/// Throws ConfigError on malformed documents.
RoadMapSpec road_map_spec_from_json(const nlohmann::json& doc);
RoadMap load_road_map(const nlohmann::json& doc);
nlohmann::json road_map_to_json(const RoadMap& map);

}  // namespace lmbtrack
