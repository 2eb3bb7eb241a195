#pragma once

#include <compare>
#include <cstdint>
#include <vector>

#include "lmbtrack/gaussian.hpp"

namespace lmbtrack {

/// Track label: birth step plus ordinal within that step's birth set.
/// Pairs are unique over a whole run because the step counter only advances.
struct Label {
  std::int64_t birth_time = 0;
  std::int32_t birth_index = 0;

  friend auto operator<=>(const Label&, const Label&) = default;
};

/// One labeled Bernoulli track: existence probability plus spatial density.
struct BernoulliTrack {
  Label label;
  double existence = 0.0;
  GaussianMixture density;
};

/// Labeled multi-Bernoulli density: a set of tracks with distinct labels.
struct LmbDensity {
  std::vector<BernoulliTrack> tracks;
  std::int64_t timestamp = 0;

  const BernoulliTrack* find(const Label& label) const;
  BernoulliTrack* find(const Label& label);
  bool has_distinct_labels() const;
};

/// LMB set weight w(L): the probability that exactly the tracks in
/// `label_set` exist. Evaluated in the cancelled form
/// prod_{i not in L}(1-r_i) * prod_{l in L} r_l, which is exact for r = 1.
/// Labels absent from the density make the weight zero.
double lmb_set_weight(const LmbDensity& density, const std::vector<Label>& label_set);

}  // namespace lmbtrack
