#include "lmbtrack/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lmbtrack/errors.hpp"

namespace lmbtrack {

namespace {

constexpr double kJitter = 1e-9;

// log N(0; d, P) via LLT, jittering once if the factorization fails.
double gaussian_log_density(const Vec5& residual, const Mat5& cov) {
  Mat5 p = symmetrize(cov);
  Eigen::LLT<Mat5> llt(p);
  if (llt.info() != Eigen::Success) {
    p += kJitter * Mat5::Identity();
    llt.compute(p);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("singular covariance in mixture evaluation");
    }
  }
  const Mat5 l = llt.matrixL();
  double log_det = 0.0;
  for (int i = 0; i < kStateDim; ++i) log_det += 2.0 * std::log(l(i, i));
  const Vec5 z = llt.matrixL().solve(residual);
  const double quad = z.squaredNorm();
  return -0.5 * (kStateDim * std::log(2.0 * M_PI) + log_det + quad);
}

}  // namespace

double GaussianMixture::weight_sum() const {
  return std::accumulate(components.begin(), components.end(), 0.0,
                         [](double s, const GaussianComponent& c) { return s + c.weight; });
}

double evaluate_mixture(const GaussianMixture& mixture, const StateVector& state) {
  const Vec5 at = state.to_vector();
  double value = 0.0;
  for (const auto& c : mixture.components) {
    const Vec5 residual = state_residual(at, c.mean.to_vector());
    value += c.weight * std::exp(gaussian_log_density(residual, c.cov));
  }
  return value;
}

GaussianMixture normalize_mixture(GaussianMixture mixture) {
  const double sum = mixture.weight_sum();
  if (!(sum > 0.0)) {
    throw NumericalError("cannot normalize mixture with zero total weight");
  }
  for (auto& c : mixture.components) c.weight /= sum;
  return mixture;
}

const GaussianComponent& best_component(const GaussianMixture& mixture) {
  if (mixture.empty()) throw NumericalError("empty mixture has no best component");
  return *std::max_element(
      mixture.components.begin(), mixture.components.end(),
      [](const GaussianComponent& a, const GaussianComponent& b) { return a.weight < b.weight; });
}

GaussianMixture merge_components(GaussianMixture mixture, double mahal_threshold) {
  if (mixture.size() < 2) return mixture;

  std::vector<GaussianComponent> in = std::move(mixture.components);
  std::vector<bool> used(in.size(), false);
  std::vector<GaussianComponent> out;
  out.reserve(in.size());

  while (true) {
    int pivot = -1;
    double best_w = -1.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (!used[i] && in[i].weight > best_w) {
        best_w = in[i].weight;
        pivot = static_cast<int>(i);
      }
    }
    if (pivot < 0) break;

    const Vec5 pivot_mean = in[pivot].mean.to_vector();
    Eigen::LLT<Mat5> llt(symmetrize(in[pivot].cov) + 1e-9 * Mat5::Identity());
    std::vector<std::size_t> cluster;
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (used[i]) continue;
      if (static_cast<int>(i) == pivot) {
        cluster.push_back(i);
        continue;
      }
      if (llt.info() != Eigen::Success) continue;
      const Vec5 d = state_residual(in[i].mean.to_vector(), pivot_mean);
      const double mahal = llt.matrixL().solve(d).squaredNorm();
      if (mahal < mahal_threshold) cluster.push_back(i);
    }

    double w = 0.0;
    for (auto i : cluster) w += in[i].weight;
    // The merged heading is accumulated relative to the pivot so clusters
    // straddling +-pi average correctly.
    Vec5 mean = Vec5::Zero();
    for (auto i : cluster) {
      Vec5 m = in[i].mean.to_vector();
      m(3) = pivot_mean(3) + wrap_angle(m(3) - pivot_mean(3));
      mean += (in[i].weight / w) * m;
    }
    mean(3) = wrap_angle(mean(3));
    Mat5 cov = Mat5::Zero();
    for (auto i : cluster) {
      const Vec5 d = state_residual(in[i].mean.to_vector(), mean);
      cov += (in[i].weight / w) * (in[i].cov + d * d.transpose());
    }
    out.push_back({w, StateVector::from_vector(mean), symmetrize(cov)});
    for (auto i : cluster) used[i] = true;
  }

  mixture.components = std::move(out);
  return mixture;
}

GaussianMixture truncate_mixture(GaussianMixture mixture, std::size_t max_components) {
  if (mixture.size() <= max_components) return mixture;
  std::stable_sort(
      mixture.components.begin(), mixture.components.end(),
      [](const GaussianComponent& a, const GaussianComponent& b) { return a.weight > b.weight; });
  mixture.components.resize(max_components);
  return normalize_mixture(std::move(mixture));
}

GaussianMixture prune_mixture(GaussianMixture mixture, double min_weight) {
  if (mixture.empty()) return mixture;
  const GaussianComponent best = best_component(mixture);
  std::erase_if(mixture.components,
                [min_weight](const GaussianComponent& c) { return c.weight < min_weight; });
  if (mixture.empty()) mixture.components.push_back(best);
  return normalize_mixture(std::move(mixture));
}

}  // namespace lmbtrack
