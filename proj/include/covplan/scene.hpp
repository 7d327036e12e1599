#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "covplan/basis.hpp"

namespace covplan {

struct VehicleState {
  int id = 0;
  double X = 0.0;       // longitudinal position [m]
  double Y = 0.0;       // lateral position [m]
  double v = 0.0;       // speed [m/s]
  double psi = 0.0;     // heading [rad]
  double length = 5.0;  // [m]
  double width = 1.8;   // [m]
};

// Straight multi-lane road. Lane 0 is centered at Y = 0; "left" means +Y.
struct LaneGeometry {
  double lane_width = 3.7;
  std::vector<double> centers;
  double y_min = 0.0;
  double y_max = 0.0;

  static LaneGeometry uniform(int lane_count, double width);
  int lane_count() const { return static_cast<int>(centers.size()); }
  bool on_road(double y) const { return y >= y_min && y <= y_max; }
  // Nearest lane center; call only for on-road y.
  int lane_index(double y) const;
};

struct Scene {
  VehicleState ego;
  std::vector<VehicleState> others;
  LaneGeometry lanes;
};

inline constexpr int kAffordanceSize = 21;

// Entry order fixed by the feature table.
enum AffordanceIndex : int {
  kForwardVelocity = 0,
  kLaneCenterOffset = 1,
  kForwardClearance = 2,
  kForwardVehicleVelocity = 3,
  kLeftFrontYClearance = 4,
  kLeftFrontVelocity = 5,
  kLeftFrontXClearance = 6,
  kLeftRearYClearance = 7,
  kLeftRearXClearance = 8,
  kLeftRearVelocity = 9,
  kRightFrontYClearance = 10,
  kRightFrontVelocity = 11,
  kRightFrontXClearance = 12,
  kRightRearYClearance = 13,
  kRightRearXClearance = 14,
  kRightRearVelocity = 15,
  kLeftFrontLength = 16,
  kLeftRearLength = 17,
  kRightFrontLength = 18,
  kRightRearLength = 19,
  kEgoLength = 20,
};

struct Affordance {
  std::array<double, kAffordanceSize> values{};
  double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
  friend bool operator==(const Affordance&, const Affordance&) = default;
};

// Column names for the dataset CSV, in entry order.
const std::array<const char*, kAffordanceSize>& affordance_column_names();

inline constexpr double kDefaultClearance = 200.0;  // absent-neighbor default [m]

// Fills the 21 scene features for the scene's ego vehicle. Neighbor slots
// take the nearest vehicle by |dX| in the lane-relative region; absent
// slots hold the defaults (clearance 200 m, velocity = ego speed, length 0).
// Output is independent of the ordering of `others` (ties by vehicle id).
// Throws DataError when the ego is off-road.
Affordance extract_affordance(const Scene& scene);

// First step k (0-based) at which the candidate's absolute footprint
// overlaps another vehicle's footprint advanced at constant velocity;
// nullopt when collision-free over the sampled horizon.
// `candidate` is deviation-encoded for the scene's ego-role vehicle.
std::optional<int> first_collision_step(const Scene& scene, const Trajectory& candidate,
                                        double dt);

// True iff the candidate collides at any sampled instant.
bool collision_check(const Scene& scene, const Trajectory& candidate, double dt);

enum class Flag : std::uint8_t {
  kNegSafe = 0,       // base not observed, collision-free
  kPositive = 1,      // base nearest to the observed trajectory
  kNegColliding = 2,  // base not observed, leads to a collision
};

struct LabeledSample {
  Affordance affordance;
  std::vector<Flag> flags;  // length = basis size, exactly one kPositive
};

struct Dataset {
  std::vector<LabeledSample> samples;
  int basis_size = 0;
  long count_positive = 0;
  long count_neg_safe = 0;
  long count_neg_colliding = 0;

  std::size_t size() const { return samples.size(); }
  void tally(const LabeledSample& s);
};

// Labels one (scene, observed) pair against the basis. The observed
// trajectory must be deviation-encoded. Throws CoverageError when it is
// farther than epsilon from every base.
LabeledSample label_sample(const Scene& scene, const Trajectory& observed,
                           const TrajectoryBasis& basis, double dt);

// Order-preserving batch labeling; propagates per-sample errors with the
// offending index in the message.
Dataset dataset_build(const std::vector<std::pair<Scene, Trajectory>>& stream,
                      const TrajectoryBasis& basis, double dt);

}  // namespace covplan
