#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lmbtrack/gaussian.hpp"
#include "lmbtrack/idm.hpp"
#include "lmbtrack/lmb.hpp"
#include "lmbtrack/road_map.hpp"

namespace lmbtrack {

/// Augmented dimension: 5 state components plus velocity and turn-rate
/// noise.
inline constexpr int kAugDim = 7;
using VecAug = Eigen::Matrix<double, kAugDim, 1>;
using MatAug = Eigen::Matrix<double, kAugDim, kAugDim>;

/// Process noise standard deviations, normalized per unit time:
/// sigma_v in m/s^2, sigma_omega in rad/s^2.
struct ProcessNoise {
  double sigma_v = 5.0;
  double sigma_omega = 0.1;
};

/// 2n+1 augmented sigma points with their weights; point 0 is the mean.
struct SigmaPointSet {
  std::vector<VecAug> points;
  std::vector<double> weights;
  double kappa = 2.0;
};

/// Tunables of the adapted prediction.
struct PredictionSettings {
  double kappa = 2.0;
  bool enable_interaction = false;
  bool enable_map = false;
  double v_min = 0.5;            // below this, turn-rate correction is skipped
  double s_min = 0.5;            // floor on distance-to-exit
  double omega_clamp = 1.0;      // |omega| bound after adaptation [rad/s]
  double max_decel = 9.81;       // cap on IDM braking magnitude [m/s^2]
  int max_lookahead = 3;         // successor hops in the leader search
  double leader_existence_threshold = 0.5;
  double gap_cutoff = 100.0;     // leaders beyond this are ignored [m]
  std::size_t component_cap = 12;
  double merge_threshold = 0.1;  // squared Mahalanobis merge distance
};

/// Mean state and existence of another track at the previous step.
struct TrackSnapshot {
  Label label;
  StateVector mean;
  double existence = 0.0;
};

/// Counters for adaptations skipped on degenerate geometry.
struct PredictionStats {
  std::int64_t velocity_skips = 0;
  std::int64_t turn_rate_skips = 0;
  std::int64_t splits = 0;
};

/// Everything a per-component prediction needs besides the component:
/// the map, a frozen snapshot of all other tracks, and the tunables.
/// Immutable during prediction, so components may be predicted in parallel.
struct PredictionContext {
  const RoadMap* road_map = nullptr;
  std::vector<TrackSnapshot> others;
  IdmParams idm;
  ProcessNoise noise;
  double sample_time = 0.1;
  PredictionSettings settings;
  PredictionStats* stats = nullptr;
};

struct LeaderInfo {
  StateVector state;
  double gap = 0.0;
};

// The four sigma-point kernels are noinline so the baseline and adapted
// prediction paths execute the same machine code and stay bit-identical
// when the adaptations are switched off.

/// Constant turn rate and velocity transition over `T` seconds. Uses the
/// straight-line limit for |omega| below 1e-4 rad/s; heading is wrapped,
/// v and omega are preserved.
[[gnu::noinline]] StateVector ctrv_transition(const StateVector& state, double T);

/// Augmented sigma points for N(mean, cov) with process noise Q =
/// diag(sigma_v^2, sigma_omega^2). Weights: W0 = kappa/(n+kappa),
/// Wi = 1/(2(n+kappa)). Requires n + kappa > 0. The matrix square root is
/// the lower Cholesky factor of (n+kappa)(Sigma + 1e-9 I); throws
/// NumericalError if that factorization fails.
[[gnu::noinline]] SigmaPointSet generate_sigma_points(const StateVector& mean, const Mat5& cov,
                                    const ProcessNoise& noise, double kappa);

/// Adds the noise partition to the state: v += nv*T, omega += nw*T.
[[gnu::noinline]] StateVector apply_process_noise(const VecAug& point, double T);

/// Weighted mean and covariance of transformed sigma points. The heading
/// mean is accumulated relative to the first point's heading (wrapped
/// residuals), which is exact for linear transformations and still
/// resolves sets straddling +-pi. The covariance is symmetrized.
[[gnu::noinline]] std::pair<StateVector, Mat5> recombine(const std::vector<StateVector>& states,
                                       const std::vector<double>& weights);

/// Nearest snapshot track ahead of `point` (positive projection onto its
/// heading) located in one of `rects` or within `max_lookahead` successor
/// hops of the canonical rectangle. Existence-thresholded and cut off at
/// `gap_cutoff`. `rects` must be the rectangles containing the point's
/// position; when the context has no map, the rectangle constraint is
/// dropped.
std::optional<LeaderInfo> find_leader(const StateVector& point, const std::vector<int>& rects,
                                      const PredictionContext& ctx);

/// IDM velocity adaptation: v <- max(0, v + accel*T) with the braking
/// magnitude capped at `max_decel`. A non-positive gap skips the
/// adaptation (counted in stats by the caller).
StateVector adapt_velocity(StateVector point, const LeaderInfo& leader, const IdmParams& idm,
                           double T, double max_decel);

/// Road-map turn-rate adaptation: omega <- clamp(dphi * v / s) with
/// dphi = wrap(phi_R - phi) and s the distance to the rectangle's
/// downstream edge (floored at s_min). Skipped below v_min.
StateVector adapt_turn_rate(StateVector point, const Rectangle& rect,
                            const PredictionSettings& settings);

/// Plain UKF-CTRV prediction of one component (the standard filter path).
GaussianComponent ukf_ctrv_predict(const GaussianComponent& component,
                                   const PredictionContext& ctx);

/// Adapted prediction of one component. Splits the component over
/// overlapping rectangles at intersections (weights divided evenly, sum
/// preserved exactly), then per sigma point: process noise, IDM velocity
/// adaptation against the nearest leader, turn-rate adaptation against the
/// copy's rectangle chain, CTRV transition, recombination.
std::vector<GaussianComponent> predict_component(const GaussianComponent& component,
                                                 const PredictionContext& ctx);

}  // namespace lmbtrack
