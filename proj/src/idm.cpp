#include "lmbtrack/idm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lmbtrack {

double desired_gap(double v, double dv, const IdmParams& params) {
  const double dynamic =
      params.min_gap + v * params.time_gap +
      v * dv / (2.0 * std::sqrt(params.max_accel * params.comfort_decel));
  // A leader pulling away fast can drive the raw expression negative;
  // the minimum gap is the physical floor.
  return std::max(params.min_gap, dynamic);
}

double interaction_accel(double v, double dv, double gap, const IdmParams& params) {
  if (!(gap > 0.0)) {
    throw std::invalid_argument("interaction_accel: gap must be positive");
  }
  const double ratio = desired_gap(v, dv, params) / gap;
  return -params.max_accel * ratio * ratio;
}

double idm_accel(double v, double v_desired, double dv, double gap, const IdmParams& params) {
  const double free = v_desired > 0.0
                          ? params.max_accel * (1.0 - std::pow(v / v_desired, 4.0))
                          : 0.0;
  return free + interaction_accel(v, dv, gap, params);
}

}  // namespace lmbtrack
