#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "covplan/basis.hpp"
#include "covplan/rng.hpp"
#include "covplan/scene.hpp"

namespace covplan {

enum class Maneuver : int {
  kKeepLane = 0,
  kBrake = 1,
  kAccelerate = 2,
  kLeftChange = 3,
  kRightChange = 4,
};

inline constexpr int kManeuverCount = 5;
const char* maneuver_name(Maneuver m);

// Scenario-gated mixture over the five maneuver templates. Gating zeroes a
// maneuver when the scene forbids it (no target lane, occupied gap, short
// forward clearance); the remaining weights are renormalized.
struct BehaviorPolicy {
  std::array<double, kManeuverCount> weights = {0.40, 0.20, 0.15, 0.125, 0.125};
  double brake_decel = 3.0;        // [m/s^2]
  double accel_rate = 1.5;         // [m/s^2]
  double jitter_x = 0.25;          // longitudinal jitter amplitude [m]
  double jitter_y = 0.12;          // lateral jitter amplitude [m]
  double change_gap_min = 12.0;    // required |dX| gap in the target lane [m]
  double accel_clearance_min = 30.0;

  void validate() const;
};

struct ScenarioSamplerConfig {
  int lane_count = 3;
  double lane_width = 3.7;
  int n_others_min = 3;
  int n_others_max = 7;
  double speed_min = 20.0;
  double speed_max = 32.0;
  double gap_min = 15.0;
  double gap_max = 50.0;
  double length_min = 4.2;
  double length_max = 5.4;
  double width_min = 1.7;
  double width_max = 1.9;
  double ego_length = 5.0;
  double ego_width = 1.8;
};

// Random mid-pack highway scene: ego at the origin of a random lane,
// others spread over the lanes with per-lane longitudinal gaps drawn from
// [gap_min, gap_max]. Footprints never overlap.
Scene sample_scene(const ScenarioSamplerConfig& cfg, Rng& rng);

// Per-scene gated and renormalized maneuver weights.
std::array<double, kManeuverCount> gated_weights(const BehaviorPolicy& policy,
                                                 const Scene& scene);

Maneuver draw_maneuver(const std::array<double, kManeuverCount>& weights, Rng& rng);

// Deviation-encoded trajectory for the maneuver: smooth kinematic template
// plus a low-amplitude smooth jitter. Sample 0 is always the origin.
Trajectory realize_maneuver(Maneuver m, const BehaviorPolicy& policy,
                            const GeometryConfig& geo, double v0, double lane_width,
                            Rng& rng);

struct SyntheticDraw {
  Scene scene;
  Trajectory observed;  // raw (relative to the ego start pose), v0 = ego speed
  Maneuver maneuver;
};

// n i.i.d. draws: fresh scene, gated maneuver, realized trajectory.
std::vector<SyntheticDraw> generate_synthetic(const BehaviorPolicy& policy,
                                              const ScenarioSamplerConfig& sampler,
                                              const GeometryConfig& geo, std::size_t n,
                                              std::uint64_t seed);

// Deviation-encodes the observed trajectories of a draw batch.
std::vector<std::pair<Scene, Trajectory>> encode_draws(const std::vector<SyntheticDraw>& draws,
                                                       double dt);

}  // namespace covplan
