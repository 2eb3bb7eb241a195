#include "lmbtrack/road_map.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lmbtrack/errors.hpp"

namespace lmbtrack {

namespace {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

void simplify_recursive(const std::vector<Vec2>& pts, std::size_t first, std::size_t last,
                        double tolerance, std::vector<bool>& keep) {
  if (last <= first + 1) return;
  double max_dist = -1.0;
  std::size_t split = first;
  for (std::size_t i = first + 1; i < last; ++i) {
    const double d = point_segment_distance(pts[i], pts[first], pts[last]);
    if (d > max_dist) {
      max_dist = d;
      split = i;
    }
  }
  if (max_dist > tolerance) {
    keep[split] = true;
    simplify_recursive(pts, first, split, tolerance, keep);
    simplify_recursive(pts, split, last, tolerance, keep);
  }
}

}  // namespace

bool Rectangle::contains(const Vec2& point) const {
  const Vec2 local = local_coordinates(point);
  return std::abs(local(0)) <= 0.5 * length && std::abs(local(1)) <= 0.5 * width;
}

Vec2 Rectangle::local_coordinates(const Vec2& point) const {
  const double c = std::cos(orientation);
  const double s = std::sin(orientation);
  const Vec2 d = point - center;
  return {c * d(0) + s * d(1), -s * d(0) + c * d(1)};
}

double Rectangle::distance_to_exit(const Vec2& point) const {
  if (!contains(point)) {
    throw std::invalid_argument("distance_to_exit: point outside rectangle");
  }
  return 0.5 * length - local_coordinates(point)(0);
}

Vec2 Rectangle::entry_point() const {
  return center - 0.5 * length * Vec2{std::cos(orientation), std::sin(orientation)};
}

Vec2 Rectangle::exit_point() const {
  return center + 0.5 * length * Vec2{std::cos(orientation), std::sin(orientation)};
}

std::vector<Vec2> simplify_polyline(const std::vector<Vec2>& points, double tolerance) {
  if (points.size() < 2) {
    throw std::invalid_argument("simplify_polyline: need at least 2 points");
  }
  if (!(tolerance > 0.0)) {
    throw std::invalid_argument("simplify_polyline: tolerance must be positive");
  }
  std::vector<bool> keep(points.size(), false);
  keep.front() = keep.back() = true;
  simplify_recursive(points, 0, points.size() - 1, tolerance, keep);
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (keep[i]) out.push_back(points[i]);
  }
  return out;
}

std::vector<Rectangle> fit_rectangles(const std::vector<Vec2>& simplified, double width,
                                      int id_seed, int* skipped) {
  if (simplified.size() < 2) {
    throw std::invalid_argument("fit_rectangles: need at least 2 points");
  }
  std::vector<Rectangle> rects;
  rects.reserve(simplified.size() - 1);
  int next_id = id_seed;
  int skip_count = 0;
  for (std::size_t i = 0; i + 1 < simplified.size(); ++i) {
    const Vec2 a = simplified[i];
    const Vec2 b = simplified[i + 1];
    const Vec2 d = b - a;
    const double len = d.norm();
    if (len == 0.0) {
      ++skip_count;
      continue;
    }
    Rectangle r;
    r.id = next_id++;
    r.center = 0.5 * (a + b);
    r.length = len;
    r.width = width;
    r.orientation = std::atan2(d(1), d(0));
    rects.push_back(std::move(r));
  }
  for (std::size_t i = 0; i + 1 < rects.size(); ++i) {
    rects[i].successors.push_back(rects[i + 1].id);
  }
  if (skipped) *skipped = skip_count;
  return rects;
}

void link_lanes(std::vector<Rectangle>& rectangles, int from, int to) {
  if (from == to) throw std::invalid_argument("link_lanes: self-link rejected");
  auto find = [&rectangles](int id) -> Rectangle* {
    for (auto& r : rectangles) {
      if (r.id == id) return &r;
    }
    return nullptr;
  };
  Rectangle* src = find(from);
  if (src == nullptr) throw std::invalid_argument("link_lanes: unknown source id");
  if (find(to) == nullptr) throw std::invalid_argument("link_lanes: unknown target id");
  if (std::find(src->successors.begin(), src->successors.end(), to) == src->successors.end()) {
    src->successors.push_back(to);
  }
}

RoadMap::RoadMap(std::vector<Rectangle> rectangles) : rectangles_(std::move(rectangles)) {
  std::sort(rectangles_.begin(), rectangles_.end(),
            [](const Rectangle& a, const Rectangle& b) { return a.id < b.id; });
  for (std::size_t i = 0; i + 1 < rectangles_.size(); ++i) {
    if (rectangles_[i].id == rectangles_[i + 1].id) {
      throw std::invalid_argument("RoadMap: duplicate rectangle id");
    }
  }
  for (const auto& r : rectangles_) {
    if (!(r.length > 0.0) || !(r.width > 0.0)) {
      throw std::invalid_argument("RoadMap: rectangle with non-positive extent");
    }
    for (int s : r.successors) {
      if (!has(s)) throw std::invalid_argument("RoadMap: successor references unknown id");
    }
  }
  build_index();
}

bool RoadMap::has(int id) const {
  auto it = std::lower_bound(rectangles_.begin(), rectangles_.end(), id,
                             [](const Rectangle& r, int key) { return r.id < key; });
  return it != rectangles_.end() && it->id == id;
}

const Rectangle& RoadMap::rectangle(int id) const {
  auto it = std::lower_bound(rectangles_.begin(), rectangles_.end(), id,
                             [](const Rectangle& r, int key) { return r.id < key; });
  if (it == rectangles_.end() || it->id != id) {
    throw std::invalid_argument("RoadMap: unknown rectangle id");
  }
  return *it;
}

void RoadMap::build_index() {
  if (rectangles_.empty()) return;
  double max_diag = 0.0;
  grid_min_ = Vec2{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  grid_max_ = Vec2{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
  std::vector<std::pair<Vec2, Vec2>> boxes;
  boxes.reserve(rectangles_.size());
  for (const auto& r : rectangles_) {
    max_diag = std::max(max_diag, std::hypot(r.length, r.width));
    const double c = std::abs(std::cos(r.orientation));
    const double s = std::abs(std::sin(r.orientation));
    const double hx = 0.5 * (r.length * c + r.width * s);
    const double hy = 0.5 * (r.length * s + r.width * c);
    const Vec2 lo = r.center - Vec2{hx, hy};
    const Vec2 hi = r.center + Vec2{hx, hy};
    boxes.emplace_back(lo, hi);
    grid_min_ = grid_min_.cwiseMin(lo);
    grid_max_ = grid_max_.cwiseMax(hi);
  }
  cell_size_ = std::max(max_diag, 1e-6);
  nx_ = std::max(1, static_cast<int>(std::ceil((grid_max_(0) - grid_min_(0)) / cell_size_)));
  ny_ = std::max(1, static_cast<int>(std::ceil((grid_max_(1) - grid_min_(1)) / cell_size_)));
  cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  for (std::size_t i = 0; i < rectangles_.size(); ++i) {
    const auto& [lo, hi] = boxes[i];
    const int x0 = std::clamp(static_cast<int>((lo(0) - grid_min_(0)) / cell_size_), 0, nx_ - 1);
    const int x1 = std::clamp(static_cast<int>((hi(0) - grid_min_(0)) / cell_size_), 0, nx_ - 1);
    const int y0 = std::clamp(static_cast<int>((lo(1) - grid_min_(1)) / cell_size_), 0, ny_ - 1);
    const int y1 = std::clamp(static_cast<int>((hi(1) - grid_min_(1)) / cell_size_), 0, ny_ - 1);
    for (int x = x0; x <= x1; ++x) {
      for (int y = y0; y <= y1; ++y) {
        cells_[static_cast<std::size_t>(y) * nx_ + x].push_back(static_cast<int>(i));
      }
    }
  }
}

std::vector<int> RoadMap::rectangles_containing(const Vec2& point) const {
  std::vector<int> out;
  if (rectangles_.empty()) return out;
  if (point(0) < grid_min_(0) || point(0) > grid_max_(0) || point(1) < grid_min_(1) ||
      point(1) > grid_max_(1)) {
    return out;
  }
  const int x = std::clamp(static_cast<int>((point(0) - grid_min_(0)) / cell_size_), 0, nx_ - 1);
  const int y = std::clamp(static_cast<int>((point(1) - grid_min_(1)) / cell_size_), 0, ny_ - 1);
  for (int idx : cells_[static_cast<std::size_t>(y) * nx_ + x]) {
    if (rectangles_[idx].contains(point)) out.push_back(rectangles_[idx].id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const Rectangle* RoadMap::canonical_rectangle(const Vec2& point, double heading) const {
  const std::vector<int> ids = rectangles_containing(point);
  const Rectangle* best = nullptr;
  double best_diff = std::numeric_limits<double>::max();
  for (int id : ids) {
    const Rectangle& r = rectangle(id);
    const double diff = std::abs(wrap_angle(r.orientation - heading));
    if (diff < best_diff) {
      best_diff = diff;
      best = &r;
    }
  }
  return best;
}

std::vector<int> RoadMap::reachable(int start, int max_hops) const {
  std::vector<int> out;
  if (!has(start)) return out;
  std::set<int> seen{start};
  std::deque<std::pair<int, int>> frontier{{start, 0}};
  while (!frontier.empty()) {
    auto [id, hops] = frontier.front();
    frontier.pop_front();
    out.push_back(id);
    if (hops >= max_hops) continue;
    for (int next : rectangle(id).successors) {
      if (seen.insert(next).second) frontier.emplace_back(next, hops + 1);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

RoadMap build_road_map(const RoadMapSpec& spec) {
  std::vector<Rectangle> rects;
  for (const auto& lane : spec.lanes) {
    const double width = lane.width.value_or(spec.default_width);
    const double tolerance = lane.tolerance.value_or(spec.default_tolerance);
    const std::vector<Vec2> simplified = simplify_polyline(lane.points, tolerance);
    std::vector<Rectangle> lane_rects = fit_rectangles(simplified, width, lane.id_prefix);
    rects.insert(rects.end(), lane_rects.begin(), lane_rects.end());
  }
  for (const auto& [from, to] : spec.links) link_lanes(rects, from, to);
  return RoadMap(std::move(rects));
}

RoadMapSpec road_map_spec_from_json(const nlohmann::json& doc) {
  RoadMapSpec spec;
  try {
    if (doc.contains("width")) spec.default_width = doc.at("width").get<double>();
    if (doc.contains("tolerance")) spec.default_tolerance = doc.at("tolerance").get<double>();
    for (const auto& lane_doc : doc.at("lanes")) {
      LaneSpec lane;
      lane.id_prefix = lane_doc.at("id_prefix").get<int>();
      if (lane_doc.contains("width")) lane.width = lane_doc.at("width").get<double>();
      if (lane_doc.contains("tolerance")) lane.tolerance = lane_doc.at("tolerance").get<double>();
      for (const auto& p : lane_doc.at("points")) {
        lane.points.push_back(Vec2{p.at(0).get<double>(), p.at(1).get<double>()});
      }
      spec.lanes.push_back(std::move(lane));
    }
    if (doc.contains("links")) {
      for (const auto& link : doc.at("links")) {
        spec.links.emplace_back(link.at(0).get<int>(), link.at(1).get<int>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("road map document: ") + e.what());
  }
  return spec;
}

RoadMap load_road_map(const nlohmann::json& doc) {
  try {
    return build_road_map(road_map_spec_from_json(doc));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("road map document: ") + e.what());
  }
}

nlohmann::json road_map_to_json(const RoadMap& map) {
  nlohmann::json rects = nlohmann::json::array();
  for (const auto& r : map.rectangles()) {
    rects.push_back({{"id", r.id},
                     {"center", {r.center(0), r.center(1)}},
                     {"length", r.length},
                     {"width", r.width},
                     {"orientation", r.orientation},
                     {"successors", r.successors}});
  }
  return {{"rectangles", rects}};
}

}  // namespace lmbtrack
