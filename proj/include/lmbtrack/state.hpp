#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace lmbtrack {

inline constexpr int kStateDim = 5;

using Vec2 = Eigen::Vector2d;
using Vec5 = Eigen::Matrix<double, kStateDim, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat5 = Eigen::Matrix<double, kStateDim, kStateDim>;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) r += 2.0 * M_PI;
  return r;
}

/// CTRV state: planar position [m], speed magnitude [m/s], heading [rad],
/// turn rate [rad/s].
struct StateVector {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double phi = 0.0;
  double omega = 0.0;

  Vec2 position() const { return {x, y}; }

  Vec5 to_vector() const {
    Vec5 s;
    s << x, y, v, phi, omega;
    return s;
  }

  static StateVector from_vector(const Vec5& s) {
    return {s(0), s(1), s(2), s(3), s(4)};
  }
};

/// Difference with the heading component wrapped into (-pi, pi].
inline Vec5 state_residual(const Vec5& a, const Vec5& b) {
  Vec5 d = a - b;
  d(3) = wrap_angle(d(3));
  return d;
}

}  // namespace lmbtrack
