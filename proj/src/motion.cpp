#include "lmbtrack/motion.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "lmbtrack/errors.hpp"

namespace lmbtrack {

namespace {

constexpr double kOmegaStraightLimit = 1e-4;  // rad/s
constexpr double kCovJitter = 1e-9;

// Turn-rate adaptation wants the remaining along-lane distance even for
// points slightly outside the rectangle (off-map fallback), so this is the
// permissive sibling of Rectangle::distance_to_exit.
double remaining_distance(const Rectangle& rect, const Vec2& position, double s_min) {
  const double u = rect.local_coordinates(position)(0);
  return std::max(s_min, 0.5 * rect.length - u);
}

// The rectangle a sigma point is adapted against: the copy's assigned
// rectangle if the point is still inside it, otherwise the nearest chain
// successor containing the point, otherwise any containing rectangle with
// the closest orientation, otherwise the assigned rectangle itself.
const Rectangle* resolve_rectangle(const RoadMap& map, int assigned_id, const Vec2& position,
                                   double heading, int max_hops) {
  const Rectangle& assigned = map.rectangle(assigned_id);
  if (assigned.contains(position)) return &assigned;

  std::set<int> seen{assigned_id};
  std::deque<std::pair<int, int>> frontier{{assigned_id, 0}};
  int found_hop = -1;
  const Rectangle* found = nullptr;
  double found_diff = std::numeric_limits<double>::max();
  while (!frontier.empty()) {
    auto [id, hops] = frontier.front();
    frontier.pop_front();
    if (found_hop >= 0 && hops > found_hop) break;
    if (hops > 0) {
      const Rectangle& r = map.rectangle(id);
      if (r.contains(position)) {
        const double diff = std::abs(wrap_angle(r.orientation - heading));
        if (found_hop < 0 || diff < found_diff) {
          found = &r;
          found_hop = hops;
          found_diff = diff;
        }
      }
    }
    if (hops < max_hops && found_hop < 0) {
      for (int next : map.rectangle(id).successors) {
        if (seen.insert(next).second) frontier.emplace_back(next, hops + 1);
      }
    }
  }
  if (found) return found;
  if (const Rectangle* any = map.canonical_rectangle(position, heading)) return any;
  return &assigned;
}

}  // namespace

StateVector ctrv_transition(const StateVector& state, double T) {
  StateVector out = state;
  if (std::abs(state.omega) < kOmegaStraightLimit) {
    out.x += state.v * T * std::cos(state.phi);
    out.y += state.v * T * std::sin(state.phi);
  } else {
    const double r = state.v / state.omega;
    out.x += r * (std::sin(state.phi + state.omega * T) - std::sin(state.phi));
    out.y += r * (std::cos(state.phi) - std::cos(state.phi + state.omega * T));
  }
  out.phi = wrap_angle(state.phi + state.omega * T);
  return out;
}

SigmaPointSet generate_sigma_points(const StateVector& mean, const Mat5& cov,
                                    const ProcessNoise& noise, double kappa) {
  const double scale = kAugDim + kappa;
  if (!(scale > 0.0)) {
    throw std::invalid_argument("generate_sigma_points: require n + kappa > 0");
  }

  VecAug mu = VecAug::Zero();
  mu.head<kStateDim>() = mean.to_vector();

  MatAug sigma = MatAug::Zero();
  sigma.topLeftCorner<kStateDim, kStateDim>() = symmetrize(cov);
  sigma(5, 5) = noise.sigma_v * noise.sigma_v;
  sigma(6, 6) = noise.sigma_omega * noise.sigma_omega;

  const MatAug scaled = scale * (sigma + kCovJitter * MatAug::Identity());
  Eigen::LLT<MatAug> llt(scaled);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("generate_sigma_points: covariance factorization failed");
  }
  const MatAug root = llt.matrixL();

  SigmaPointSet set;
  set.kappa = kappa;
  set.points.reserve(2 * kAugDim + 1);
  set.weights.reserve(2 * kAugDim + 1);
  set.points.push_back(mu);
  set.weights.push_back(kappa / scale);
  for (int i = 0; i < kAugDim; ++i) {
    set.points.push_back(mu + root.col(i));
    set.weights.push_back(0.5 / scale);
  }
  for (int i = 0; i < kAugDim; ++i) {
    set.points.push_back(mu - root.col(i));
    set.weights.push_back(0.5 / scale);
  }
  return set;
}

StateVector apply_process_noise(const VecAug& point, double T) {
  StateVector s = StateVector::from_vector(point.head<kStateDim>());
  s.v += point(5) * T;
  s.omega += point(6) * T;
  return s;
}

std::pair<StateVector, Mat5> recombine(const std::vector<StateVector>& states,
                                       const std::vector<double>& weights) {
  if (states.empty() || states.size() != weights.size()) {
    throw std::invalid_argument("recombine: mismatched or empty sigma point set");
  }
  const double heading_ref = states.front().phi;
  Vec5 mean = Vec5::Zero();
  for (std::size_t i = 0; i < states.size(); ++i) {
    Vec5 s = states[i].to_vector();
    s(3) = heading_ref + wrap_angle(s(3) - heading_ref);
    mean += weights[i] * s;
  }
  mean(3) = wrap_angle(mean(3));

  Mat5 cov = Mat5::Zero();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Vec5 d = state_residual(states[i].to_vector(), mean);
    cov += weights[i] * (d * d.transpose());
  }
  return {StateVector::from_vector(mean), symmetrize(cov)};
}

std::optional<LeaderInfo> find_leader(const StateVector& point, const std::vector<int>& rects,
                                      const PredictionContext& ctx) {
  std::vector<int> candidate_rects;
  if (ctx.road_map != nullptr) {
    if (rects.empty()) return std::nullopt;
    candidate_rects = rects;
    if (const Rectangle* canonical = ctx.road_map->canonical_rectangle(point.position(), point.phi)) {
      const std::vector<int> reach =
          ctx.road_map->reachable(canonical->id, ctx.settings.max_lookahead);
      candidate_rects.insert(candidate_rects.end(), reach.begin(), reach.end());
    }
    std::sort(candidate_rects.begin(), candidate_rects.end());
    candidate_rects.erase(std::unique(candidate_rects.begin(), candidate_rects.end()),
                          candidate_rects.end());
  }

  const Vec2 heading_dir{std::cos(point.phi), std::sin(point.phi)};
  std::optional<LeaderInfo> best;
  for (const TrackSnapshot& other : ctx.others) {
    if (other.existence < ctx.settings.leader_existence_threshold) continue;
    const Vec2 offset = other.mean.position() - point.position();
    if (offset.dot(heading_dir) <= 0.0) continue;  // must be ahead
    const double gap = offset.norm();
    if (gap > ctx.settings.gap_cutoff) continue;
    if (ctx.road_map != nullptr) {
      const std::vector<int> other_rects = ctx.road_map->rectangles_containing(other.mean.position());
      const bool shared = std::any_of(other_rects.begin(), other_rects.end(), [&](int id) {
        return std::binary_search(candidate_rects.begin(), candidate_rects.end(), id);
      });
      if (!shared) continue;
    }
    if (!best || gap < best->gap) best = LeaderInfo{other.mean, gap};
  }
  return best;
}

StateVector adapt_velocity(StateVector point, const LeaderInfo& leader, const IdmParams& idm,
                           double T, double max_decel) {
  if (!(leader.gap > 0.0)) return point;
  const double dv = point.v - leader.state.v;
  double accel = interaction_accel(point.v, dv, leader.gap, idm);
  accel = std::max(accel, -max_decel);
  point.v = std::max(0.0, point.v + accel * T);
  return point;
}

StateVector adapt_turn_rate(StateVector point, const Rectangle& rect,
                            const PredictionSettings& settings) {
  if (point.v <= settings.v_min) return point;
  const double dphi = wrap_angle(rect.orientation - point.phi);
  const double s = remaining_distance(rect, point.position(), settings.s_min);
  const double omega = dphi * point.v / s;
  point.omega = std::clamp(omega, -settings.omega_clamp, settings.omega_clamp);
  return point;
}

GaussianComponent ukf_ctrv_predict(const GaussianComponent& component,
                                   const PredictionContext& ctx) {
  const SigmaPointSet sigma =
      generate_sigma_points(component.mean, component.cov, ctx.noise, ctx.settings.kappa);
  std::vector<StateVector> transformed;
  transformed.reserve(sigma.points.size());
  for (const VecAug& pt : sigma.points) {
    transformed.push_back(ctrv_transition(apply_process_noise(pt, ctx.sample_time), ctx.sample_time));
  }
  auto [mean, cov] = recombine(transformed, sigma.weights);
  return {component.weight, mean, cov};
}

std::vector<GaussianComponent> predict_component(const GaussianComponent& component,
                                                 const PredictionContext& ctx) {
  const bool use_map = ctx.settings.enable_map && ctx.road_map != nullptr;
  const bool use_interaction = ctx.settings.enable_interaction;

  // An intersection (component inside several rectangles) splits the
  // component into one copy per rectangle, each following its own chain.
  std::vector<int> assigned;
  if (use_map) {
    const std::vector<int> at_mean = ctx.road_map->rectangles_containing(component.mean.position());
    if (at_mean.empty()) {
      assigned.push_back(-1);
    } else {
      assigned = at_mean;
      if (assigned.size() > 1 && ctx.stats) ++ctx.stats->splits;
    }
  } else {
    assigned.push_back(-1);
  }

  const std::size_t copies = assigned.size();
  std::vector<double> copy_weights(copies, component.weight / static_cast<double>(copies));
  if (copies > 1) {
    // Keep the weight sum exact: the last copy takes the residual.
    double partial = 0.0;
    for (std::size_t i = 0; i + 1 < copies; ++i) partial += copy_weights[i];
    copy_weights.back() = component.weight - partial;
  }

  std::vector<GaussianComponent> out;
  out.reserve(copies);
  for (std::size_t c = 0; c < copies; ++c) {
    const SigmaPointSet sigma =
        generate_sigma_points(component.mean, component.cov, ctx.noise, ctx.settings.kappa);
    std::vector<StateVector> transformed;
    transformed.reserve(sigma.points.size());
    for (const VecAug& pt : sigma.points) {
      StateVector s = apply_process_noise(pt, ctx.sample_time);
      if (use_interaction) {
        const std::vector<int> point_rects =
            ctx.road_map ? ctx.road_map->rectangles_containing(s.position()) : std::vector<int>{};
        if (const auto leader = find_leader(s, point_rects, ctx)) {
          if (leader->gap > 0.0) {
            s = adapt_velocity(s, *leader, ctx.idm, ctx.sample_time, ctx.settings.max_decel);
          } else if (ctx.stats) {
            ++ctx.stats->velocity_skips;
          }
        }
      }
      if (use_map && assigned[c] >= 0) {
        const Rectangle* rect = resolve_rectangle(*ctx.road_map, assigned[c], s.position(), s.phi,
                                                  ctx.settings.max_lookahead);
        if (s.v > ctx.settings.v_min) {
          s = adapt_turn_rate(s, *rect, ctx.settings);
        } else if (ctx.stats) {
          ++ctx.stats->turn_rate_skips;
        }
      }
      transformed.push_back(ctrv_transition(s, ctx.sample_time));
    }
    auto [mean, cov] = recombine(transformed, sigma.weights);
    out.push_back({copy_weights[c], mean, cov});
  }
  return out;
}

}  // namespace lmbtrack
