#pragma once

namespace lmbtrack {

/// Intelligent Driver Model parameters. Defaults: time gap, acceleration
/// and comfortable deceleration as used by the tracker; minimum gap 2 m
/// from the model's source literature.
struct IdmParams {
  double min_gap = 2.0;         // s0 [m]
  double time_gap = 1.6;        // T [s]
  double max_accel = 0.73;      // a [m/s^2]
  double comfort_decel = 1.67;  // b [m/s^2]
};

/// Desired gap s*(v, dv) = s0 + v*T + v*dv / (2*sqrt(a*b)), floored at s0.
/// dv = v_follower - v_leader.
double desired_gap(double v, double dv, const IdmParams& params);

/// Interaction deceleration -a * (s*(v,dv) / gap)^2; always negative.
/// Throws std::invalid_argument for gap <= 0 (follower has passed leader).
double interaction_accel(double v, double dv, double gap, const IdmParams& params);

/// Full IDM acceleration with free term a*(1 - (v/v_desired)^4); used by
/// the simulator's follow behavior, never by the filter.
double idm_accel(double v, double v_desired, double dv, double gap, const IdmParams& params);

}  // namespace lmbtrack
