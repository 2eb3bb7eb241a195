#include <doctest.h>

#include <cmath>
#include <initializer_list>
#include <stdexcept>

#include "lmbtrack/idm.hpp"

using namespace lmbtrack;

TEST_CASE("desired_gap") {
  const IdmParams params;  // s0=2, T=1.6, a=0.73, b=1.67

  SUBCASE("standstill gives the minimum gap") {
    CHECK(desired_gap(0.0, 0.0, params) == doctest::Approx(2.0));
  }

  SUBCASE("steady following at 20 m/s") {
    CHECK(desired_gap(20.0, 0.0, params) == doctest::Approx(2.0 + 20.0 * 1.6));
  }

  SUBCASE("closing at 5 m/s") {
    const double expected = 2.0 + 20.0 * 1.6 + 20.0 * 5.0 / (2.0 * std::sqrt(0.73 * 1.67));
    CHECK(desired_gap(20.0, 5.0, params) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(desired_gap(20.0, 5.0, params) == doctest::Approx(79.28).epsilon(1e-4));
  }

  SUBCASE("floored at s0 when the leader pulls away fast") {
    CHECK(desired_gap(5.0, -40.0, params) == doctest::Approx(2.0));
  }

  SUBCASE("monotone in v for non-negative dv") {
    double prev = desired_gap(0.0, 2.0, params);
    for (double v = 0.5; v < 30.0; v += 0.5) {
      const double cur = desired_gap(v, 2.0, params);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("interaction_accel") {
  const IdmParams params;

  SUBCASE("gap equal to desired gap brakes at -a") {
    const double gap = desired_gap(10.0, 0.0, params);
    CHECK(interaction_accel(10.0, 0.0, gap, params) == doctest::Approx(-0.73));
  }

  SUBCASE("double gap brakes at -a/4") {
    const double gap = desired_gap(10.0, 0.0, params);
    CHECK(interaction_accel(10.0, 0.0, 2.0 * gap, params) == doctest::Approx(-0.73 / 4.0));
  }

  SUBCASE("paper parameters at 20 m/s and 34 m gap") {
    CHECK(interaction_accel(20.0, 0.0, 34.0, params) == doctest::Approx(-0.73).epsilon(1e-12));
  }

  SUBCASE("always negative") {
    for (double v = 0.0; v <= 30.0; v += 3.0) {
      for (double dv = -10.0; dv <= 10.0; dv += 2.5) {
        for (double gap = 0.5; gap <= 200.0; gap *= 2.0) {
          CHECK(interaction_accel(v, dv, gap, params) < 0.0);
        }
      }
    }
  }

  SUBCASE("monotonically non-decreasing in gap") {
    for (double v : {0.0, 5.0, 15.0}) {
      for (double dv : {-3.0, 0.0, 4.0}) {
        double prev = interaction_accel(v, dv, 0.5, params);
        for (double gap = 1.0; gap < 300.0; gap *= 1.5) {
          const double cur = interaction_accel(v, dv, gap, params);
          CHECK(cur >= prev);
          prev = cur;
        }
      }
    }
  }

  SUBCASE("invalid gap throws") {
    CHECK_THROWS_AS(interaction_accel(10.0, 0.0, 0.0, params), std::invalid_argument);
    CHECK_THROWS_AS(interaction_accel(10.0, 0.0, -3.0, params), std::invalid_argument);
  }
}

TEST_CASE("idm_accel equilibrium") {
  const IdmParams params;
  // At equilibrium the free term balances the interaction term:
  // gap = s*(v,0) / sqrt(1 - (v/v0)^4).
  const double v = 10.0, v0 = 20.0;
  const double gap = desired_gap(v, 0.0, params) / std::sqrt(1.0 - std::pow(v / v0, 4.0));
  CHECK(idm_accel(v, v0, 0.0, gap, params) == doctest::Approx(0.0).epsilon(1e-9));
}
