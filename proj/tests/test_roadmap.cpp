#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "lmbtrack/errors.hpp"
#include "lmbtrack/road_map.hpp"

using namespace lmbtrack;

namespace {

double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double dist_to_polyline(const Vec2& p, const std::vector<Vec2>& line) {
  double best = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    best = std::min(best, dist_point_segment(p, line[i], line[i + 1]));
  }
  return best;
}

// Independent naive end-point-fit used as the oracle: same recursion, but
// written directly against the definition with no shared code.
void naive_endpoint_fit(const std::vector<Vec2>& pts, std::size_t lo, std::size_t hi, double tol,
                        std::vector<Vec2>& out) {
  double worst = 0.0;
  std::size_t worst_idx = lo;
  for (std::size_t i = lo + 1; i < hi; ++i) {
    const double d = dist_point_segment(pts[i], pts[lo], pts[hi]);
    if (d > worst) {
      worst = d;
      worst_idx = i;
    }
  }
  if (worst > tol) {
    naive_endpoint_fit(pts, lo, worst_idx, tol, out);
    out.push_back(pts[worst_idx]);
    naive_endpoint_fit(pts, worst_idx, hi, tol, out);
  }
}

std::vector<Vec2> naive_simplify(const std::vector<Vec2>& pts, double tol) {
  std::vector<Vec2> out{pts.front()};
  naive_endpoint_fit(pts, 0, pts.size() - 1, tol, out);
  out.push_back(pts.back());
  return out;
}

std::vector<Vec2> semicircle_points() {
  std::vector<Vec2> pts;
  const double radius = 20.0;
  const int n = static_cast<int>(M_PI * radius);  // about 1 m spacing
  for (int i = 0; i <= n; ++i) {
    const double a = M_PI * i / n;
    pts.push_back(Vec2{radius * std::cos(a), radius * std::sin(a)});
  }
  return pts;
}

}  // namespace

TEST_CASE("simplify_polyline collinear input keeps endpoints only") {
  std::vector<Vec2> pts;
  for (int i = 0; i < 100; ++i) pts.push_back(Vec2{0.5 * i, 0.0});
  const auto out = simplify_polyline(pts, 0.1);
  REQUIRE(out.size() == 2);
  CHECK(out.front() == pts.front());
  CHECK(out.back() == pts.back());
}

TEST_CASE("simplify_polyline keeps a sharp corner") {
  const std::vector<Vec2> pts{{0, 0}, {1, 0}, {1, 1}};
  const auto out = simplify_polyline(pts, 0.2);
  CHECK(out.size() == 3);
}

TEST_CASE("simplify_polyline rejects degenerate input") {
  CHECK_THROWS_AS(simplify_polyline({Vec2{0, 0}}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(simplify_polyline({Vec2{0, 0}, Vec2{1, 0}}, 0.0), std::invalid_argument);
}

TEST_CASE("simplify_polyline matches the naive end-point-fit oracle on a semicircle") {
  const auto pts = semicircle_points();
  const auto ours = simplify_polyline(pts, 0.5);
  const auto oracle = naive_simplify(pts, 0.5);
  REQUIRE(ours.size() == oracle.size());
  for (std::size_t i = 0; i < ours.size(); ++i) {
    CHECK((ours[i] - oracle[i]).norm() == 0.0);
  }
  // And the deviation bound holds for every input point.
  for (const auto& p : pts) {
    CHECK(dist_to_polyline(p, ours) <= 0.5 + 1e-12);
  }
}

TEST_CASE("simplify_polyline deviation bound on random polylines") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec2> pts;
    Vec2 p{0.0, 0.0};
    double heading = uniform(rng) * M_PI;
    for (int i = 0; i < 60; ++i) {
      pts.push_back(p);
      heading += 0.4 * uniform(rng);
      p += Vec2{std::cos(heading), std::sin(heading)};
    }
    const double tol = 0.05 + 0.5 * std::abs(uniform(rng));
    const auto out = simplify_polyline(pts, tol);
    CHECK(out.front() == pts.front());
    CHECK(out.back() == pts.back());
    for (const auto& q : pts) {
      REQUIRE(dist_to_polyline(q, out) <= tol + 1e-12);
    }
  }
}

TEST_CASE("fit_rectangles axis-aligned segment") {
  const auto rects = fit_rectangles({{0, 0}, {10, 0}}, 4.0, 7);
  REQUIRE(rects.size() == 1);
  CHECK(rects[0].id == 7);
  CHECK(rects[0].center(0) == doctest::Approx(5.0));
  CHECK(rects[0].center(1) == doctest::Approx(0.0));
  CHECK(rects[0].length == doctest::Approx(10.0));
  CHECK(rects[0].width == doctest::Approx(4.0));
  CHECK(rects[0].orientation == doctest::Approx(0.0));
  CHECK(rects[0].successors.empty());
}

TEST_CASE("fit_rectangles right angle chain") {
  const auto rects = fit_rectangles({{0, 0}, {0, 10}, {10, 10}}, 3.5, 0);
  REQUIRE(rects.size() == 2);
  CHECK(rects[0].orientation == doctest::Approx(M_PI / 2.0));
  CHECK(rects[1].orientation == doctest::Approx(0.0));
  REQUIRE(rects[0].successors.size() == 1);
  CHECK(rects[0].successors[0] == 1);
  CHECK(rects[1].successors.empty());
}

TEST_CASE("fit_rectangles diagonal segment") {
  const auto rects = fit_rectangles({{0, 0}, {10, 10}}, 3.5, 0);
  REQUIRE(rects.size() == 1);
  CHECK(rects[0].orientation == doctest::Approx(M_PI / 4.0));
  CHECK(rects[0].length == doctest::Approx(std::sqrt(200.0)));
}

TEST_CASE("fit_rectangles skips zero-length segments") {
  int skipped = 0;
  const auto rects = fit_rectangles({{0, 0}, {0, 0}, {10, 0}}, 3.5, 0, &skipped);
  CHECK(rects.size() == 1);
  CHECK(skipped == 1);
}

TEST_CASE("fit_rectangles covers every simplified vertex with a short edge") {
  const auto pts = simplify_polyline(semicircle_points(), 0.5);
  const auto rects = fit_rectangles(pts, 3.5, 0);
  REQUIRE(rects.size() == pts.size() - 1);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool on_short_edge = false;
    for (const auto& r : rects) {
      if ((r.entry_point() - pts[i]).norm() < 1e-9 || (r.exit_point() - pts[i]).norm() < 1e-9) {
        on_short_edge = true;
        break;
      }
    }
    CHECK(on_short_edge);
  }
}

TEST_CASE("halving tolerance never decreases rectangle count on a curve") {
  const auto pts = semicircle_points();
  std::size_t prev = 0;
  for (double tol = 1.6; tol > 0.01; tol /= 2.0) {
    const auto count = fit_rectangles(simplify_polyline(pts, tol), 3.5, 0).size();
    CHECK(count >= prev);
    prev = count;
  }
}

TEST_CASE("link_lanes") {
  auto rects = fit_rectangles({{0, 0}, {10, 0}, {20, 0}, {30, 5}}, 3.5, 0);
  REQUIRE(rects.size() == 3);

  SUBCASE("appends a new successor") {
    link_lanes(rects, 0, 2);
    CHECK(rects[0].successors == std::vector<int>{1, 2});
  }

  SUBCASE("is idempotent") {
    link_lanes(rects, 0, 1);
    CHECK(rects[0].successors == std::vector<int>{1});
  }

  SUBCASE("rejects self links and unknown ids") {
    CHECK_THROWS_AS(link_lanes(rects, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(link_lanes(rects, 0, 99), std::invalid_argument);
    CHECK_THROWS_AS(link_lanes(rects, 99, 0), std::invalid_argument);
  }
}

TEST_CASE("rectangles_containing basics") {
  Rectangle r;
  r.id = 3;
  r.center = Vec2{5.0, 0.0};
  r.length = 10.0;
  r.width = 4.0;
  r.orientation = 0.0;
  RoadMap map({r});

  CHECK(map.rectangles_containing(Vec2{5.0, 0.0}) == std::vector<int>{3});
  // Corner is boundary-inclusive.
  CHECK(map.rectangles_containing(Vec2{10.0, 2.0}) == std::vector<int>{3});
  CHECK(map.rectangles_containing(Vec2{10.0, 2.0001}).empty());
  CHECK(map.rectangles_containing(Vec2{-1.0, 0.0}).empty());
}

TEST_CASE("rectangles_containing overlap matches brute force") {
  // Two rectangles crossing at the origin plus random ones.
  std::vector<Rectangle> rects;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uniform(-50.0, 50.0);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  int id = 0;
  for (int i = 0; i < 60; ++i) {
    Rectangle r;
    r.id = id++;
    r.center = Vec2{uniform(rng), uniform(rng)};
    r.length = 2.0 + std::abs(uniform(rng)) / 4.0;
    r.width = 1.0 + std::abs(uniform(rng)) / 10.0;
    r.orientation = angle(rng);
    rects.push_back(r);
  }
  RoadMap map(rects);

  for (int i = 0; i < 10000; ++i) {
    const Vec2 p{uniform(rng) * 1.2, uniform(rng) * 1.2};
    std::vector<int> brute;
    for (const auto& r : rects) {
      if (r.contains(p)) brute.push_back(r.id);
    }
    std::sort(brute.begin(), brute.end());
    REQUIRE(map.rectangles_containing(p) == brute);
  }
}

TEST_CASE("distance_to_exit") {
  Rectangle r;
  r.center = Vec2{5.0, 0.0};
  r.length = 10.0;
  r.width = 4.0;
  r.orientation = 0.0;

  CHECK(r.distance_to_exit(r.center) == doctest::Approx(5.0));
  CHECK(r.distance_to_exit(Vec2{10.0, 0.0}) == doctest::Approx(0.0));
  CHECK(r.distance_to_exit(Vec2{7.0, 1.0}) == doctest::Approx(3.0));
  CHECK_THROWS_AS(r.distance_to_exit(Vec2{20.0, 0.0}), std::invalid_argument);
}

TEST_CASE("road map JSON loader") {
  const nlohmann::json doc = {
      {"width", 4.0},
      {"tolerance", 0.1},
      {"lanes",
       {{{"id_prefix", 0}, {"points", {{0.0, 0.0}, {50.0, 0.0}}}},
        {{"id_prefix", 100}, {"width", 3.0}, {"points", {{50.0, 0.0}, {50.0, 40.0}}}}}},
      {"links", {{0, 100}}}};
  const RoadMap map = load_road_map(doc);
  REQUIRE(map.size() == 2);
  CHECK(map.rectangle(0).width == 4.0);
  CHECK(map.rectangle(100).width == 3.0);
  CHECK(map.rectangle(0).successors == std::vector<int>{100});

  CHECK_THROWS_AS(load_road_map(nlohmann::json{{"lanes", 3}}), ConfigError);
}

TEST_CASE("canonical rectangle picks closest orientation") {
  Rectangle a;
  a.id = 0;
  a.center = Vec2{0, 0};
  a.length = 10;
  a.width = 10;
  a.orientation = 0.0;
  Rectangle b = a;
  b.id = 1;
  b.orientation = M_PI / 2.0;
  RoadMap map({a, b});
  REQUIRE(map.canonical_rectangle(Vec2{0, 0}, 0.2) != nullptr);
  CHECK(map.canonical_rectangle(Vec2{0, 0}, 0.2)->id == 0);
  CHECK(map.canonical_rectangle(Vec2{0, 0}, 1.4)->id == 1);
  CHECK(map.canonical_rectangle(Vec2{100, 100}, 0.0) == nullptr);
}

TEST_CASE("reachable respects hop limit") {
  auto rects = fit_rectangles({{0, 0}, {10, 0}, {20, 0}, {30, 0}, {40, 0}, {50, 0}}, 3.5, 0);
  RoadMap map(rects);
  CHECK(map.reachable(0, 0) == std::vector<int>{0});
  CHECK(map.reachable(0, 2) == std::vector<int>{0, 1, 2});
  CHECK(map.reachable(3, 10) == std::vector<int>{3, 4});
}
