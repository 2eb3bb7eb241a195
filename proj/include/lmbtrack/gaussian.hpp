#pragma once

#include <cstddef>
#include <vector>

#include "lmbtrack/state.hpp"

namespace lmbtrack {

/// One weighted Gaussian hypothesis of a track's state.
struct GaussianComponent {
  double weight = 1.0;
  StateVector mean;
  Mat5 cov = Mat5::Identity();
};

/// Weighted sum of Gaussian components; weights of a live track sum to one.
struct GaussianMixture {
  std::vector<GaussianComponent> components;

  std::size_t size() const { return components.size(); }
  bool empty() const { return components.empty(); }
  double weight_sum() const;
};

/// Evaluates the mixture density at `state`. Heading residuals are wrapped
/// before the quadratic form. Near-singular covariances are jittered by
/// 1e-9 on the diagonal; throws NumericalError if that is not enough.
double evaluate_mixture(const GaussianMixture& mixture, const StateVector& state);

/// Scales weights to sum to one, preserving order.
/// Throws NumericalError on an all-zero-weight mixture.
GaussianMixture normalize_mixture(GaussianMixture mixture);

/// Moment-matching merge of components closer than `mahal_threshold` in
/// squared Mahalanobis distance (measured in the metric of the
/// highest-weight component of each cluster).
GaussianMixture merge_components(GaussianMixture mixture, double mahal_threshold);

/// Keeps the `max_components` highest-weight components and renormalizes.
GaussianMixture truncate_mixture(GaussianMixture mixture, std::size_t max_components);

/// Drops components with weight below `min_weight` and renormalizes.
/// Keeps at least the single best component.
GaussianMixture prune_mixture(GaussianMixture mixture, double min_weight);

/// Highest-weight component (first one on ties).
const GaussianComponent& best_component(const GaussianMixture& mixture);

/// (P + P^T)/2, guarding against drift from sigma-point arithmetic.
inline Mat5 symmetrize(const Mat5& p) { return 0.5 * (p + p.transpose()); }

}  // namespace lmbtrack
