#include "covplan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "covplan/errors.hpp"

namespace covplan {

const char* maneuver_name(Maneuver m) {
  switch (m) {
    case Maneuver::kKeepLane: return "keep_lane";
    case Maneuver::kBrake: return "brake";
    case Maneuver::kAccelerate: return "accelerate";
    case Maneuver::kLeftChange: return "left_change";
    case Maneuver::kRightChange: return "right_change";
  }
  return "unknown";
}

void BehaviorPolicy::validate() const {
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ContractError("BehaviorPolicy: negative mixture weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ContractError("BehaviorPolicy: mixture weights must sum to 1");
  if (brake_decel <= 0.0 || accel_rate <= 0.0)
    throw ContractError("BehaviorPolicy: maneuver rates must be positive");
}

Scene sample_scene(const ScenarioSamplerConfig& cfg, Rng& rng) {
  Scene scene;
  scene.lanes = LaneGeometry::uniform(cfg.lane_count, cfg.lane_width);

  const int ego_lane = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.lane_count)));
  scene.ego.id = 0;
  scene.ego.X = 0.0;
  scene.ego.Y = scene.lanes.centers[static_cast<std::size_t>(ego_lane)];
  scene.ego.v = rng.uniform(cfg.speed_min, cfg.speed_max);
  scene.ego.psi = 0.0;
  scene.ego.length = cfg.ego_length;
  scene.ego.width = cfg.ego_width;

  const int n = cfg.n_others_min +
                static_cast<int>(rng.below(
                    static_cast<std::uint64_t>(cfg.n_others_max - cfg.n_others_min + 1)));

  // Per-lane cursors walk outward from the ego so it sits mid-pack; gaps are
  // center-to-center and always exceed the vehicle lengths.
  std::vector<double> ahead(static_cast<std::size_t>(cfg.lane_count), 0.0);
  std::vector<double> behind(static_cast<std::size_t>(cfg.lane_count), 0.0);
  for (int i = 0; i < n; ++i) {
    VehicleState veh;
    veh.id = i + 1;
    const int lane = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.lane_count)));
    veh.Y = scene.lanes.centers[static_cast<std::size_t>(lane)];
    const bool front = rng.uniform() < 0.5;
    const double gap = rng.uniform(cfg.gap_min, cfg.gap_max);
    if (front) {
      ahead[static_cast<std::size_t>(lane)] += gap;
      veh.X = ahead[static_cast<std::size_t>(lane)];
    } else {
      behind[static_cast<std::size_t>(lane)] -= gap;
      veh.X = behind[static_cast<std::size_t>(lane)];
    }
    veh.v = rng.uniform(cfg.speed_min, cfg.speed_max);
    veh.psi = 0.0;
    veh.length = rng.uniform(cfg.length_min, cfg.length_max);
    veh.width = rng.uniform(cfg.width_min, cfg.width_max);
    scene.others.push_back(veh);
  }
  return scene;
}

std::array<double, kManeuverCount> gated_weights(const BehaviorPolicy& policy,
                                                 const Scene& scene) {
  const Affordance a = extract_affordance(scene);
  const int ego_lane = scene.lanes.lane_index(scene.ego.Y);

  std::array<double, kManeuverCount> w = policy.weights;
  auto blocked_side = [&](int iy_front_x, int iy_rear_x) {
    // occupied target-lane gap: any neighbor with |dX| clearance below the
    // minimum (defaults mean "absent", far above any sensible minimum)
    return a[iy_front_x] < policy.change_gap_min || a[iy_rear_x] < policy.change_gap_min;
  };
  if (ego_lane + 1 >= scene.lanes.lane_count() ||
      blocked_side(kLeftFrontXClearance, kLeftRearXClearance))
    w[static_cast<std::size_t>(Maneuver::kLeftChange)] = 0.0;
  if (ego_lane - 1 < 0 || blocked_side(kRightFrontXClearance, kRightRearXClearance))
    w[static_cast<std::size_t>(Maneuver::kRightChange)] = 0.0;
  if (a[kForwardClearance] < policy.accel_clearance_min)
    w[static_cast<std::size_t>(Maneuver::kAccelerate)] = 0.0;

  double sum = 0.0;
  for (double x : w) sum += x;
  for (double& x : w) x /= sum;  // keep-lane and brake are never gated out
  return w;
}

Maneuver draw_maneuver(const std::array<double, kManeuverCount>& weights, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < kManeuverCount; ++i) {
    acc += weights[static_cast<std::size_t>(i)];
    if (u < acc) return static_cast<Maneuver>(i);
  }
  return static_cast<Maneuver>(kManeuverCount - 1);
}

namespace {

inline double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }

}  // namespace

Trajectory realize_maneuver(Maneuver m, const BehaviorPolicy& policy,
                            const GeometryConfig& geo, double v0, double lane_width,
                            Rng& rng) {
  Trajectory dev;
  dev.v0 = v0;
  dev.source_id = maneuver_name(m);
  dev.samples.resize(static_cast<std::size_t>(geo.steps));

  const double horizon = (geo.steps - 1) * geo.dt;
  const double cx = rng.uniform(-1.0, 1.0);  // per-draw jitter phase
  const double cy = rng.uniform(-1.0, 1.0);

  for (int k = 0; k < geo.steps; ++k) {
    const double t = k * geo.dt;
    const double u = horizon > 0.0 ? t / horizon : 0.0;
    double dx = policy.jitter_x * cx * std::sin(M_PI * u);
    double dy = policy.jitter_y * cy * std::sin(M_PI * u);
    switch (m) {
      case Maneuver::kKeepLane:
        break;
      case Maneuver::kBrake: {
        // speed floors at zero; past t_stop the vehicle holds position while
        // the constant-velocity reference keeps moving
        const double t_stop = v0 / policy.brake_decel;
        const double tc = std::min(t, t_stop);
        dx += -0.5 * policy.brake_decel * tc * tc - v0 * std::max(0.0, t - t_stop);
        break;
      }
      case Maneuver::kAccelerate:
        dx += 0.5 * policy.accel_rate * t * t;
        break;
      case Maneuver::kLeftChange:
        dy += lane_width * smoothstep(u);
        break;
      case Maneuver::kRightChange:
        dy += -lane_width * smoothstep(u);
        break;
    }
    dev.samples[static_cast<std::size_t>(k)] = {dx, dy};
  }
  // sample 0 is the origin by construction (sin(0) = 0, templates start at 0)
  return dev;
}

std::vector<SyntheticDraw> generate_synthetic(const BehaviorPolicy& policy,
                                              const ScenarioSamplerConfig& sampler,
                                              const GeometryConfig& geo, std::size_t n,
                                              std::uint64_t seed) {
  policy.validate();
  std::vector<SyntheticDraw> draws;
  draws.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));  // independent stream per draw
    SyntheticDraw d;
    d.scene = sample_scene(sampler, rng);
    d.maneuver = draw_maneuver(gated_weights(policy, d.scene), rng);
    Trajectory dev = realize_maneuver(d.maneuver, policy, geo, d.scene.ego.v,
                                      sampler.lane_width, rng);
    d.observed = deviation_decode(dev, d.scene.ego.v, geo.dt);
    d.observed.source_id = "syn:" + std::to_string(i) + ":" + maneuver_name(d.maneuver);
    draws.push_back(std::move(d));
  }
  return draws;
}

std::vector<std::pair<Scene, Trajectory>> encode_draws(const std::vector<SyntheticDraw>& draws,
                                                       double dt) {
  std::vector<std::pair<Scene, Trajectory>> out;
  out.reserve(draws.size());
  for (const SyntheticDraw& d : draws)
    out.emplace_back(d.scene, deviation_encode(d.observed, d.observed.v0, dt));
  return out;
}

}  // namespace covplan
