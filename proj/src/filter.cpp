#include "lmbtrack/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "lmbtrack/errors.hpp"

namespace lmbtrack {

namespace {

constexpr double kClutterFloor = 1e-12;
constexpr double kCovJitter = 1e-9;

// Per-component unscented measurement transform for h(x) = (x, y).
struct ComponentMeasModel {
  Vec2 z_pred;
  Mat2 innovation_cov;          // S = UT covariance + R
  Eigen::Matrix<double, 5, 2> cross_cov;
  Eigen::LLT<Mat2> chol;        // factorization of S
  double detection_prob = 0.0;  // p_D at the component mean
};

ComponentMeasModel measurement_transform(const GaussianComponent& comp, const SensorModel& sensor,
                                         double kappa) {
  const double scale = kStateDim + kappa;
  const Mat5 p = symmetrize(comp.cov) + kCovJitter * Mat5::Identity();
  Eigen::LLT<Mat5> llt(scale * p);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("measurement update: covariance factorization failed");
  }
  const Mat5 root = llt.matrixL();
  const Vec5 mean = comp.mean.to_vector();

  std::vector<Vec5> pts;
  std::vector<double> w;
  pts.reserve(2 * kStateDim + 1);
  pts.push_back(mean);
  w.push_back(kappa / scale);
  for (int i = 0; i < kStateDim; ++i) {
    pts.push_back(mean + root.col(i));
    w.push_back(0.5 / scale);
  }
  for (int i = 0; i < kStateDim; ++i) {
    pts.push_back(mean - root.col(i));
    w.push_back(0.5 / scale);
  }

  ComponentMeasModel out;
  Vec2 z_pred = Vec2::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) z_pred += w[i] * pts[i].head<2>();
  Mat2 s = Mat2::Zero();
  Eigen::Matrix<double, 5, 2> c = Eigen::Matrix<double, 5, 2>::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 dz = pts[i].head<2>() - z_pred;
    const Vec5 dx = state_residual(pts[i], mean);
    s += w[i] * (dz * dz.transpose());
    c += w[i] * (dx * dz.transpose());
  }
  out.z_pred = z_pred;
  out.innovation_cov = s + sensor.measurement_noise;
  out.cross_cov = c;
  out.chol.compute(out.innovation_cov);
  if (out.chol.info() != Eigen::Success) {
    throw NumericalError("measurement update: innovation covariance not positive definite");
  }
  out.detection_prob = sensor.fov.contains(comp.mean.position()) ? sensor.detection_prob : 0.0;
  return out;
}

double mahalanobis2(const ComponentMeasModel& model, const Vec2& z) {
  return model.chol.matrixL().solve(z - model.z_pred).squaredNorm();
}

double gaussian2_density(const ComponentMeasModel& model, const Vec2& z) {
  const Mat2 l = model.chol.matrixL();
  const double log_det = 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)));
  const double quad = mahalanobis2(model, z);
  return std::exp(-0.5 * (2.0 * std::log(2.0 * M_PI) + log_det + quad));
}

GaussianComponent kalman_update(const GaussianComponent& comp, const ComponentMeasModel& model,
                                const Vec2& z) {
  const Eigen::Matrix<double, 5, 2> gain =
      model.chol.solve(model.cross_cov.transpose()).transpose();
  Vec5 mean = comp.mean.to_vector() + gain * (z - model.z_pred);
  mean(3) = wrap_angle(mean(3));
  const Mat5 cov = comp.cov - gain * model.innovation_cov * gain.transpose();
  GaussianComponent out;
  out.weight = comp.weight;
  out.mean = StateVector::from_vector(mean);
  out.cov = symmetrize(cov);
  return out;
}

// Detection and missed-detection factors plus conditional posteriors for
// one track against one scan.
struct TrackUpdateCache {
  std::vector<int> gated;                    // measurement indices
  std::vector<double> detection_factor;      // sum_j w_j pD_j q_j(z) / clutter
  std::vector<GaussianMixture> detection_posterior;
  double miss_factor = 1.0;                  // sum_j w_j (1 - pD_j)
  GaussianMixture miss_posterior;
};

TrackUpdateCache build_track_cache(const BernoulliTrack& track, const MeasurementScan& scan,
                                   const FilterConfig& config) {
  const double clutter = std::max(scan.sensor.clutter_intensity, kClutterFloor);
  TrackUpdateCache cache;

  std::vector<ComponentMeasModel> models;
  models.reserve(track.density.size());
  for (const auto& comp : track.density.components) {
    models.push_back(measurement_transform(comp, scan.sensor, config.prediction.kappa));
  }

  cache.miss_factor = 0.0;
  for (std::size_t j = 0; j < models.size(); ++j) {
    const auto& comp = track.density.components[j];
    const double w_miss = comp.weight * (1.0 - models[j].detection_prob);
    cache.miss_factor += w_miss;
    GaussianComponent c = comp;
    c.weight = w_miss;
    cache.miss_posterior.components.push_back(std::move(c));
  }
  if (cache.miss_factor > 0.0) {
    cache.miss_posterior = normalize_mixture(std::move(cache.miss_posterior));
  } else {
    cache.miss_posterior = track.density;  // p_D = 1 everywhere; only kept as a placeholder
  }

  for (int m = 0; m < static_cast<int>(scan.points.size()); ++m) {
    const Vec2& z = scan.points[m];
    bool in_gate = false;
    for (const auto& model : models) {
      if (model.detection_prob > 0.0 && mahalanobis2(model, z) <= config.gate_chi2) {
        in_gate = true;
        break;
      }
    }
    if (!in_gate) continue;

    double factor = 0.0;
    GaussianMixture posterior;
    for (std::size_t j = 0; j < models.size(); ++j) {
      const auto& comp = track.density.components[j];
      if (models[j].detection_prob <= 0.0) continue;
      const double q = gaussian2_density(models[j], z);
      const double w = comp.weight * models[j].detection_prob * q / clutter;
      if (!(w > 0.0)) continue;
      GaussianComponent c = kalman_update(comp, models[j], z);
      c.weight = w;
      factor += w;
      posterior.components.push_back(std::move(c));
    }
    if (!(factor > 0.0)) continue;
    cache.gated.push_back(m);
    cache.detection_factor.push_back(factor);
    cache.detection_posterior.push_back(normalize_mixture(std::move(posterior)));
  }
  return cache;
}

// One association hypothesis inside a group: per track, -2 = does not
// exist, -1 = exists but missed, >= 0 = index into that track's gated list.
struct Hypothesis {
  double log_weight = 0.0;
  std::vector<int> assignment;
};

void enumerate_hypotheses(const std::vector<const BernoulliTrack*>& tracks,
                          const std::vector<const TrackUpdateCache*>& caches, std::size_t index,
                          std::vector<int>& assignment, std::vector<bool>& meas_taken,
                          double log_weight, std::vector<Hypothesis>& out) {
  if (index == tracks.size()) {
    out.push_back({log_weight, assignment});
    return;
  }
  const double r = tracks[index]->existence;
  const TrackUpdateCache& cache = *caches[index];

  if (1.0 - r > 0.0) {
    assignment[index] = -2;
    enumerate_hypotheses(tracks, caches, index + 1, assignment, meas_taken,
                         log_weight + std::log(1.0 - r), out);
  }
  if (r > 0.0 && cache.miss_factor > 0.0) {
    assignment[index] = -1;
    enumerate_hypotheses(tracks, caches, index + 1, assignment, meas_taken,
                         log_weight + std::log(r) + std::log(cache.miss_factor), out);
  }
  if (r > 0.0) {
    for (std::size_t g = 0; g < cache.gated.size(); ++g) {
      const int m = cache.gated[g];
      if (meas_taken[m]) continue;
      meas_taken[m] = true;
      assignment[index] = static_cast<int>(g);
      enumerate_hypotheses(tracks, caches, index + 1, assignment, meas_taken,
                           log_weight + std::log(r) + std::log(cache.detection_factor[g]), out);
      meas_taken[m] = false;
    }
  }
}

// Beam fallback for association groups too large to enumerate: expand
// track by track, keeping the `width` best partial hypotheses by weight.
std::vector<Hypothesis> beam_hypotheses(const std::vector<const BernoulliTrack*>& tracks,
                                        const std::vector<const TrackUpdateCache*>& caches,
                                        std::size_t n_meas, std::size_t width) {
  struct Partial {
    double log_weight;
    std::vector<int> assignment;
    std::vector<bool> taken;
  };
  std::vector<Partial> beam{{0.0, {}, std::vector<bool>(n_meas, false)}};
  for (std::size_t index = 0; index < tracks.size(); ++index) {
    const double r = tracks[index]->existence;
    const TrackUpdateCache& cache = *caches[index];
    std::vector<Partial> next;
    next.reserve(beam.size() * (2 + cache.gated.size()));
    for (const auto& partial : beam) {
      auto extend = [&](int choice, double log_factor) {
        Partial p = partial;
        p.log_weight += log_factor;
        p.assignment.push_back(choice);
        if (choice >= 0) p.taken[cache.gated[choice]] = true;
        next.push_back(std::move(p));
      };
      if (1.0 - r > 0.0) extend(-2, std::log(1.0 - r));
      if (r > 0.0 && cache.miss_factor > 0.0) {
        extend(-1, std::log(r) + std::log(cache.miss_factor));
      }
      if (r > 0.0) {
        for (std::size_t g = 0; g < cache.gated.size(); ++g) {
          if (partial.taken[cache.gated[g]]) continue;
          extend(static_cast<int>(g), std::log(r) + std::log(cache.detection_factor[g]));
        }
      }
    }
    if (next.size() > width) {
      std::nth_element(next.begin(), next.begin() + width, next.end(),
                       [](const Partial& a, const Partial& b) {
                         return a.log_weight > b.log_weight;
                       });
      next.resize(width);
    }
    beam = std::move(next);
  }
  std::vector<Hypothesis> out;
  out.reserve(beam.size());
  for (auto& p : beam) out.push_back({p.log_weight, std::move(p.assignment)});
  return out;
}

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

BirthLocation BirthModel::location_at(const Vec2& position) const {
  BirthLocation loc;
  loc.existence = existence;
  loc.mean = StateVector{position(0), position(1), speed_mean, heading_mean, 0.0};
  Vec5 diag;
  diag << position_sigma * position_sigma, position_sigma * position_sigma,
      speed_sigma * speed_sigma, heading_sigma * heading_sigma, omega_sigma * omega_sigma;
  loc.cov = diag.asDiagonal();
  return loc;
}

LmbDensity lmb_predict(const LmbDensity& density, const std::vector<BernoulliTrack>& births,
                       const FilterConfig& config, const RoadMap* map, double dt,
                       PredictionStats* stats) {
  std::vector<TrackSnapshot> snapshot;
  snapshot.reserve(density.tracks.size());
  for (const auto& track : density.tracks) {
    if (track.density.empty()) continue;
    snapshot.push_back({track.label, best_component(track.density).mean, track.existence});
  }

  LmbDensity out;
  out.timestamp = density.timestamp + 1;
  out.tracks.reserve(density.tracks.size() + births.size());

  for (const auto& track : density.tracks) {
    PredictionContext ctx;
    ctx.road_map = map;
    ctx.idm = config.idm;
    ctx.noise = config.process_noise;
    ctx.sample_time = dt;
    ctx.settings = config.prediction;
    ctx.stats = stats;
    ctx.others.reserve(snapshot.size());
    for (const auto& s : snapshot) {
      if (!(s.label == track.label)) ctx.others.push_back(s);
    }

    GaussianMixture predicted;
    for (const auto& comp : track.density.components) {
      if (config.use_baseline_path) {
        predicted.components.push_back(ukf_ctrv_predict(comp, ctx));
      } else {
        auto parts = predict_component(comp, ctx);
        predicted.components.insert(predicted.components.end(),
                                    std::make_move_iterator(parts.begin()),
                                    std::make_move_iterator(parts.end()));
      }
    }
    predicted = merge_components(std::move(predicted), config.prediction.merge_threshold);
    predicted = truncate_mixture(std::move(predicted), config.prediction.component_cap);
    predicted = normalize_mixture(std::move(predicted));

    const double survival =
        config.survival_hook ? config.survival_hook(track) : config.survival_prob;
    out.tracks.push_back({track.label, survival * track.existence, std::move(predicted)});
  }

  for (const auto& birth : births) out.tracks.push_back(birth);
  return out;
}

LmbDensity lmb_update(const LmbDensity& density, const MeasurementScan& scan,
                      const FilterConfig& config, std::vector<Vec2>* unassociated) {
  const int n_tracks = static_cast<int>(density.tracks.size());
  const int n_meas = static_cast<int>(scan.points.size());

  std::vector<TrackUpdateCache> caches;
  caches.reserve(n_tracks);
  for (const auto& track : density.tracks) {
    caches.push_back(build_track_cache(track, scan, config));
  }

  // Association groups: tracks sharing a gated measurement, joined through
  // the measurements.
  DisjointSet ds(n_tracks + n_meas);
  std::vector<bool> meas_gated(n_meas, false);
  for (int t = 0; t < n_tracks; ++t) {
    for (int m : caches[t].gated) {
      ds.unite(t, n_tracks + m);
      meas_gated[m] = true;
    }
  }
  if (unassociated) {
    for (int m = 0; m < n_meas; ++m) {
      if (!meas_gated[m]) unassociated->push_back(scan.points[m]);
    }
  }

  std::vector<std::vector<int>> group_tracks;
  {
    std::vector<int> root_to_group(n_tracks + n_meas, -1);
    for (int t = 0; t < n_tracks; ++t) {
      const int root = ds.find(t);
      if (root_to_group[root] < 0) {
        root_to_group[root] = static_cast<int>(group_tracks.size());
        group_tracks.emplace_back();
      }
      group_tracks[root_to_group[root]].push_back(t);
    }
  }

  LmbDensity out;
  out.timestamp = density.timestamp;
  out.tracks = density.tracks;  // updated in place below

  for (const auto& members : group_tracks) {
    std::vector<const BernoulliTrack*> tracks;
    std::vector<const TrackUpdateCache*> group_caches;
    for (int t : members) {
      tracks.push_back(&density.tracks[t]);
      group_caches.push_back(&caches[t]);
    }

    // Exact enumeration while the group stays small; beam otherwise.
    double projected = 1.0;
    for (const auto* cache : group_caches) {
      projected *= 2.0 + static_cast<double>(cache->gated.size());
    }
    std::vector<Hypothesis> hypotheses;
    if (projected <= 2e5) {
      std::vector<int> assignment(tracks.size(), -2);
      std::vector<bool> taken(n_meas, false);
      enumerate_hypotheses(tracks, group_caches, 0, assignment, taken, 0.0, hypotheses);
    } else {
      hypotheses = beam_hypotheses(tracks, group_caches, n_meas,
                                   std::max<std::size_t>(1000, 10 * config.hypothesis_cap));
    }
    if (hypotheses.empty()) {
      // Only reachable for r = 1 with p_D = 1 and nothing in the gate: the
      // contradiction resolves to non-existence.
      for (int t : members) out.tracks[t].existence = 0.0;
      continue;
    }

    std::stable_sort(hypotheses.begin(), hypotheses.end(),
                     [](const Hypothesis& a, const Hypothesis& b) {
                       return a.log_weight > b.log_weight;
                     });
    if (static_cast<int>(hypotheses.size()) > config.hypothesis_cap) {
      hypotheses.resize(config.hypothesis_cap);
    }

    const double max_log = hypotheses.front().log_weight;
    double norm = 0.0;
    for (auto& h : hypotheses) norm += std::exp(h.log_weight - max_log);

    for (std::size_t i = 0; i < tracks.size(); ++i) {
      double r_post = 0.0;
      GaussianMixture mixture;
      for (const auto& h : hypotheses) {
        const int a = h.assignment[i];
        if (a == -2) continue;
        const double w = std::exp(h.log_weight - max_log) / norm;
        r_post += w;
        const GaussianMixture& part =
            a == -1 ? group_caches[i]->miss_posterior : group_caches[i]->detection_posterior[a];
        for (const auto& comp : part.components) {
          GaussianComponent c = comp;
          c.weight *= w;
          mixture.components.push_back(std::move(c));
        }
      }

      BernoulliTrack& updated = out.tracks[members[i]];
      if (r_post > 0.0 && !mixture.empty()) {
        mixture = normalize_mixture(std::move(mixture));
        mixture = prune_mixture(std::move(mixture), config.component_prune_weight);
        mixture = merge_components(std::move(mixture), config.prediction.merge_threshold);
        mixture = truncate_mixture(std::move(mixture), config.prediction.component_cap);
        updated.density = std::move(mixture);
      }
      updated.existence = std::clamp(r_post, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<ExtractedTrack> lmb_extract(const LmbDensity& density, double threshold) {
  std::vector<ExtractedTrack> out;
  for (const auto& track : density.tracks) {
    if (track.existence > threshold && !track.density.empty()) {
      const GaussianComponent& best = best_component(track.density);
      out.push_back({track.label, track.existence, best.mean, best.cov});
    }
  }
  return out;
}

LmbDensity lmb_prune(LmbDensity density, double threshold) {
  std::erase_if(density.tracks,
                [threshold](const BernoulliTrack& t) { return t.existence < threshold; });
  return density;
}

nlohmann::json density_to_json(const LmbDensity& density) {
  nlohmann::json tracks = nlohmann::json::array();
  for (const auto& t : density.tracks) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : t.density.components) {
      std::vector<double> cov(c.cov.data(), c.cov.data() + 25);
      comps.push_back({{"weight", c.weight},
                       {"mean", {c.mean.x, c.mean.y, c.mean.v, c.mean.phi, c.mean.omega}},
                       {"cov", cov}});
    }
    tracks.push_back({{"label", {t.label.birth_time, t.label.birth_index}},
                      {"existence", t.existence},
                      {"components", comps}});
  }
  return {{"timestamp", density.timestamp}, {"tracks", tracks}};
}

LmbDensity density_from_json(const nlohmann::json& doc) {
  LmbDensity density;
  try {
    density.timestamp = doc.at("timestamp").get<std::int64_t>();
    for (const auto& t : doc.at("tracks")) {
      BernoulliTrack track;
      track.label = {t.at("label").at(0).get<std::int64_t>(),
                     t.at("label").at(1).get<std::int32_t>()};
      track.existence = t.at("existence").get<double>();
      for (const auto& c : t.at("components")) {
        GaussianComponent comp;
        comp.weight = c.at("weight").get<double>();
        const auto& m = c.at("mean");
        comp.mean = {m.at(0).get<double>(), m.at(1).get<double>(), m.at(2).get<double>(),
                     m.at(3).get<double>(), m.at(4).get<double>()};
        const auto cov = c.at("cov").get<std::vector<double>>();
        if (cov.size() != 25) throw ConfigError("checkpoint: covariance must have 25 entries");
        comp.cov = Eigen::Map<const Mat5>(cov.data());
        track.density.components.push_back(std::move(comp));
      }
      density.tracks.push_back(std::move(track));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint document: ") + e.what());
  }
  return density;
}

LmbFilter::LmbFilter(FilterConfig config, BirthModel birth, std::shared_ptr<const RoadMap> map)
    : config_(std::move(config)), birth_(std::move(birth)), map_(std::move(map)) {}

std::vector<BernoulliTrack> LmbFilter::make_births() {
  std::vector<BernoulliTrack> births;
  birth_counter_ = 0;
  const std::int64_t birth_time = density_.timestamp + 1;

  auto add = [&](const BirthLocation& loc) {
    BernoulliTrack track;
    track.label = {birth_time, birth_counter_++};
    track.existence = loc.existence;
    track.density.components.push_back({1.0, loc.mean, loc.cov});
    births.push_back(std::move(track));
  };

  if (birth_.mode == BirthModel::Mode::kStatic) {
    for (const auto& loc : birth_.locations) add(loc);
  } else {
    for (const auto& position : pending_births_) add(birth_.location_at(position));
  }
  pending_births_.clear();
  return births;
}

void LmbFilter::predict(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be positive");
  density_ = lmb_predict(density_, make_births(), config_, map_.get(), dt, &stats_);
  time_ += dt;
}

void LmbFilter::update(const MeasurementScan& scan) {
  if (scan.time < time_ - 1e-9) {
    throw std::invalid_argument("update: scan precedes filter time");
  }
  std::vector<Vec2> unassociated;
  density_ = lmb_update(density_, scan, config_, &unassociated);
  density_ = lmb_prune(std::move(density_), config_.prune_threshold);

  // Deduplicate birth candidates within 2 m so two sensors seeing the same
  // new object spawn one track.
  for (const auto& p : unassociated) {
    const bool duplicate = std::any_of(pending_births_.begin(), pending_births_.end(),
                                       [&](const Vec2& q) { return (p - q).norm() < 2.0; });
    if (!duplicate) pending_births_.push_back(p);
  }
}

std::vector<ExtractedTrack> LmbFilter::extract() const {
  return lmb_extract(density_, config_.extraction_threshold);
}

nlohmann::json LmbFilter::checkpoint() const {
  nlohmann::json doc = density_to_json(density_);
  doc["time"] = time_;
  return doc;
}

}  // namespace lmbtrack
