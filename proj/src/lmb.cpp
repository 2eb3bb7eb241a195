#include "lmbtrack/lmb.hpp"

#include <algorithm>

namespace lmbtrack {

const BernoulliTrack* LmbDensity::find(const Label& label) const {
  auto it = std::find_if(tracks.begin(), tracks.end(),
                         [&](const BernoulliTrack& t) { return t.label == label; });
  return it == tracks.end() ? nullptr : &*it;
}

BernoulliTrack* LmbDensity::find(const Label& label) {
  auto it = std::find_if(tracks.begin(), tracks.end(),
                         [&](const BernoulliTrack& t) { return t.label == label; });
  return it == tracks.end() ? nullptr : &*it;
}

bool LmbDensity::has_distinct_labels() const {
  std::vector<Label> labels;
  labels.reserve(tracks.size());
  for (const auto& t : tracks) labels.push_back(t.label);
  std::sort(labels.begin(), labels.end());
  return std::adjacent_find(labels.begin(), labels.end()) == labels.end();
}

double lmb_set_weight(const LmbDensity& density, const std::vector<Label>& label_set) {
  for (const auto& l : label_set) {
    if (density.find(l) == nullptr) return 0.0;
  }
  double w = 1.0;
  for (const auto& t : density.tracks) {
    const bool in_set = std::find(label_set.begin(), label_set.end(), t.label) != label_set.end();
    w *= in_set ? t.existence : 1.0 - t.existence;
  }
  return w;
}

}  // namespace lmbtrack
