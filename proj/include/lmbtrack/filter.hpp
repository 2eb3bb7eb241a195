#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lmbtrack/motion.hpp"

namespace lmbtrack {

/// Sensor coverage: either the full plane or an axis-aligned box.
struct FieldOfView {
  bool bounded = false;
  Vec2 min{0.0, 0.0};
  Vec2 max{0.0, 0.0};

  bool contains(const Vec2& p) const {
    return !bounded ||
           (p(0) >= min(0) && p(0) <= max(0) && p(1) >= min(1) && p(1) <= max(1));
  }
  double area() const { return bounded ? (max(0) - min(0)) * (max(1) - min(1)) : 0.0; }
};

/// Position-measuring sensor: detection probability, uniform clutter
/// density over the field of view, and 2x2 measurement noise.
struct SensorModel {
  int id = 0;
  double detection_prob = 0.85;
  double clutter_intensity = 1e-5;  // expected clutter per m^2
  Mat2 measurement_noise = Mat2::Identity() * 0.25;
  FieldOfView fov;
  Vec2 position{0.0, 0.0};  // mount point; the simulator uses it for occlusion
};

/// Timestamped set of 2-D position detections from one sensor.
struct MeasurementScan {
  double time = 0.0;
  std::int64_t step = 0;
  SensorModel sensor;
  std::vector<Vec2> points;
};

struct BirthLocation {
  StateVector mean;
  Mat5 cov = Mat5::Identity();
  double existence = 0.05;
};

/// Birth density: fixed locations re-offered every step, or births spawned
/// at the previous scan's unassociated measurements with a broad prior on
/// speed, heading and turn rate.
struct BirthModel {
  enum class Mode { kStatic, kMeasurementDriven };
  Mode mode = Mode::kMeasurementDriven;
  std::vector<BirthLocation> locations;  // static mode
  double existence = 0.05;
  double position_sigma = 1.0;
  double speed_mean = 8.0;
  double speed_sigma = 5.0;
  double heading_mean = 0.0;
  double heading_sigma = 2.0;
  double omega_sigma = 0.3;

  BirthLocation location_at(const Vec2& position) const;
};

struct FilterConfig {
  double survival_prob = 0.99;
  /// Optional state-dependent survival probability; when set it replaces
  /// the constant `survival_prob` per track.
  std::function<double(const BernoulliTrack&)> survival_hook;
  double extraction_threshold = 0.2;
  double prune_threshold = 0.01;
  ProcessNoise process_noise;
  PredictionSettings prediction;
  IdmParams idm;
  double gate_chi2 = 13.8;        // ~0.999 quantile at 2 dof
  int hypothesis_cap = 100;       // per association group, ranked by weight
  double component_prune_weight = 1e-6;
  bool use_baseline_path = false; // plain UKF-CTRV prediction for every component
};

struct ExtractedTrack {
  Label label;
  double existence = 0.0;
  StateVector state;
  Mat5 cov = Mat5::Identity();
};

/// LMB prediction: survival existence scaling plus per-component motion
/// prediction (adapted or baseline path), mixture housekeeping, and the
/// given birth tracks appended. The leader snapshot for each track holds
/// all other tracks' highest-weight means at the previous step.
LmbDensity lmb_predict(const LmbDensity& density, const std::vector<BernoulliTrack>& births,
                       const FilterConfig& config, const RoadMap* map, double dt,
                       PredictionStats* stats = nullptr);

/// GM-LMB measurement update: chi-square gating, association groups over
/// shared gated measurements, exact hypothesis enumeration within groups
/// (capped and ranked by weight), per-component unscented measurement
/// update for h(x) = (x, y), and collapse back to LMB form per label.
/// Measurements gated by no track are reported through `unassociated`.
LmbDensity lmb_update(const LmbDensity& density, const MeasurementScan& scan,
                      const FilterConfig& config, std::vector<Vec2>* unassociated = nullptr);

/// Tracks with existence strictly above `threshold`, reported at their
/// highest-weight component.
std::vector<ExtractedTrack> lmb_extract(const LmbDensity& density, double threshold);

/// Removes tracks with existence strictly below `threshold`.
LmbDensity lmb_prune(LmbDensity density, double threshold);

nlohmann::json density_to_json(const LmbDensity& density);
LmbDensity density_from_json(const nlohmann::json& doc);

/// One predict/update pipeline over an LMB density. Externally
/// synchronized; feed scans in timestamp order.
class LmbFilter {
 public:
  LmbFilter(FilterConfig config, BirthModel birth, std::shared_ptr<const RoadMap> map = nullptr);

  /// Advances the density by `dt` seconds: prediction plus birth.
  void predict(double dt);

  /// Applies one scan (time must not precede the filter time), then prunes.
  void update(const MeasurementScan& scan);

  std::vector<ExtractedTrack> extract() const;
  const LmbDensity& density() const { return density_; }
  double time() const { return time_; }
  const PredictionStats& prediction_stats() const { return stats_; }
  const FilterConfig& config() const { return config_; }

  /// Full filter state as JSON (labels, existence, all components); stable
  /// field order, round-trip-exact doubles.
  nlohmann::json checkpoint() const;

 private:
  std::vector<BernoulliTrack> make_births();

  FilterConfig config_;
  BirthModel birth_;
  std::shared_ptr<const RoadMap> map_;
  LmbDensity density_;
  std::vector<Vec2> pending_births_;
  PredictionStats stats_;
  double time_ = 0.0;
  std::int32_t birth_counter_ = 0;  // ordinal within the current step's birth set
};

}  // namespace lmbtrack
