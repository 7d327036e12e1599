#include "covplan/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "covplan/errors.hpp"

namespace covplan {

LaneGeometry LaneGeometry::uniform(int lane_count, double width) {
  if (lane_count < 1 || width <= 0.0)
    throw ContractError("LaneGeometry::uniform: lane_count >= 1 and width > 0 required");
  LaneGeometry g;
  g.lane_width = width;
  g.centers.resize(static_cast<std::size_t>(lane_count));
  for (int i = 0; i < lane_count; ++i) g.centers[static_cast<std::size_t>(i)] = i * width;
  g.y_min = -0.5 * width;
  g.y_max = (lane_count - 0.5) * width;
  return g;
}

int LaneGeometry::lane_index(double y) const {
  int best = 0;
  double best_d = std::abs(y - centers[0]);
  for (int i = 1; i < lane_count(); ++i) {
    const double d = std::abs(y - centers[static_cast<std::size_t>(i)]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

const std::array<const char*, kAffordanceSize>& affordance_column_names() {
  static const std::array<const char*, kAffordanceSize> names = {
      "forward_velocity",
      "lane_center_offset",
      "forward_clearance",
      "forward_vehicle_velocity",
      "left_front_y_clearance",
      "left_front_velocity",
      "left_front_x_clearance",
      "left_rear_y_clearance",
      "left_rear_x_clearance",
      "left_rear_velocity",
      "right_front_y_clearance",
      "right_front_velocity",
      "right_front_x_clearance",
      "right_rear_y_clearance",
      "right_rear_x_clearance",
      "right_rear_velocity",
      "left_front_length",
      "left_rear_length",
      "right_front_length",
      "right_rear_length",
      "ego_length",
  };
  return names;
}

namespace {

// A neighbor slot holds the nearest vehicle by |dX| within its region.
// Ties break on the smaller vehicle id so the result cannot depend on the
// ordering of Scene::others.
struct SlotPick {
  const VehicleState* vehicle = nullptr;
  double abs_dx = std::numeric_limits<double>::infinity();

  void offer(const VehicleState& v, double adx) {
    if (adx < abs_dx || (adx == abs_dx && vehicle && v.id < vehicle->id)) {
      vehicle = &v;
      abs_dx = adx;
    }
  }
};

double x_clearance(const VehicleState& ego, const VehicleState& other) {
  return std::abs(other.X - ego.X) - 0.5 * (ego.length + other.length);
}

double y_clearance(const VehicleState& ego, const VehicleState& other) {
  return std::abs(other.Y - ego.Y) - 0.5 * (ego.width + other.width);
}

}  // namespace

Affordance extract_affordance(const Scene& scene) {
  const VehicleState& ego = scene.ego;
  if (!scene.lanes.on_road(ego.Y))
    throw DataError("extract_affordance: ego vehicle is off-road (Y = " +
                    std::to_string(ego.Y) + ")");
  const int ego_lane = scene.lanes.lane_index(ego.Y);

  SlotPick forward, left_front, left_rear, right_front, right_rear;
  for (const VehicleState& other : scene.others) {
    if (!scene.lanes.on_road(other.Y)) continue;
    const int lane = scene.lanes.lane_index(other.Y);
    const double dx = other.X - ego.X;
    const double adx = std::abs(dx);
    if (lane == ego_lane) {
      if (dx >= 0.0 && other.id != ego.id) forward.offer(other, adx);
    } else if (lane == ego_lane + 1) {  // left = +Y
      (dx >= 0.0 ? left_front : left_rear).offer(other, adx);
    } else if (lane == ego_lane - 1) {
      (dx >= 0.0 ? right_front : right_rear).offer(other, adx);
    }
  }

  Affordance a;
  auto& v = a.values;
  v[kForwardVelocity] = ego.v;
  v[kLaneCenterOffset] = ego.Y - scene.lanes.centers[static_cast<std::size_t>(ego_lane)];
  v[kEgoLength] = ego.length;

  v[kForwardClearance] = forward.vehicle ? x_clearance(ego, *forward.vehicle) : kDefaultClearance;
  v[kForwardVehicleVelocity] = forward.vehicle ? forward.vehicle->v : ego.v;

  auto fill_side = [&](const SlotPick& pick, int iy, int ivel, int ix, int ilen) {
    if (pick.vehicle) {
      v[static_cast<std::size_t>(iy)] = y_clearance(ego, *pick.vehicle);
      v[static_cast<std::size_t>(ivel)] = pick.vehicle->v;
      v[static_cast<std::size_t>(ix)] = x_clearance(ego, *pick.vehicle);
      v[static_cast<std::size_t>(ilen)] = pick.vehicle->length;
    } else {
      v[static_cast<std::size_t>(iy)] = kDefaultClearance;
      v[static_cast<std::size_t>(ivel)] = ego.v;
      v[static_cast<std::size_t>(ix)] = kDefaultClearance;
      v[static_cast<std::size_t>(ilen)] = 0.0;
    }
  };
  fill_side(left_front, kLeftFrontYClearance, kLeftFrontVelocity, kLeftFrontXClearance,
            kLeftFrontLength);
  fill_side(left_rear, kLeftRearYClearance, kLeftRearVelocity, kLeftRearXClearance,
            kLeftRearLength);
  fill_side(right_front, kRightFrontYClearance, kRightFrontVelocity, kRightFrontXClearance,
            kRightFrontLength);
  fill_side(right_rear, kRightRearYClearance, kRightRearVelocity, kRightRearXClearance,
            kRightRearLength);
  return a;
}

namespace {

// Axis-aligned footprints; overlap requires strict interpenetration on both
// axes, so touching bumpers do not count.
bool rectangles_overlap(double ax, double ay, double alen, double awid, double bx, double by,
                        double blen, double bwid) {
  return std::abs(ax - bx) < 0.5 * (alen + blen) && std::abs(ay - by) < 0.5 * (awid + bwid);
}

}  // namespace

std::optional<int> first_collision_step(const Scene& scene, const Trajectory& candidate,
                                        double dt) {
  const VehicleState& ego = scene.ego;
  const int steps = candidate.steps();
  for (int k = 0; k < steps; ++k) {
    const Vec2 p = reconstruct_position(candidate, k, dt, ego.X, ego.Y, ego.v);
    const double t = k * dt;
    for (const VehicleState& other : scene.others) {
      if (other.id == ego.id) continue;
      const double ox = other.X + other.v * std::cos(other.psi) * t;
      const double oy = other.Y + other.v * std::sin(other.psi) * t;
      if (rectangles_overlap(p.x, p.y, ego.length, ego.width, ox, oy, other.length,
                             other.width))
        return k;
    }
  }
  return std::nullopt;
}

bool collision_check(const Scene& scene, const Trajectory& candidate, double dt) {
  return first_collision_step(scene, candidate, dt).has_value();
}

void Dataset::tally(const LabeledSample& s) {
  for (Flag f : s.flags) {
    switch (f) {
      case Flag::kPositive: ++count_positive; break;
      case Flag::kNegSafe: ++count_neg_safe; break;
      case Flag::kNegColliding: ++count_neg_colliding; break;
    }
  }
}

LabeledSample label_sample(const Scene& scene, const Trajectory& observed,
                           const TrajectoryBasis& basis, double dt) {
  const auto [pos, dist] = nearest_base(observed, basis);
  if (dist > basis.epsilon)
    throw CoverageError("label_sample: observed trajectory is " + std::to_string(dist) +
                        " atomic-norm units from the nearest base (epsilon = " +
                        std::to_string(basis.epsilon) + ")");
  LabeledSample out;
  out.affordance = extract_affordance(scene);
  out.flags.resize(basis.bases.size(), Flag::kNegSafe);
  out.flags[static_cast<std::size_t>(pos)] = Flag::kPositive;
  for (int i = 0; i < basis.size(); ++i) {
    if (i == pos) continue;
    if (collision_check(scene, basis.bases[static_cast<std::size_t>(i)], dt))
      out.flags[static_cast<std::size_t>(i)] = Flag::kNegColliding;
  }
  return out;
}

Dataset dataset_build(const std::vector<std::pair<Scene, Trajectory>>& stream,
                      const TrajectoryBasis& basis, double dt) {
  Dataset ds;
  ds.basis_size = basis.size();
  ds.samples.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) {
    try {
      ds.samples.push_back(label_sample(stream[i].first, stream[i].second, basis, dt));
    } catch (const DataError& e) {
      throw DataError("dataset_build: sample " + std::to_string(i) + ": " + e.what());
    }
    ds.tally(ds.samples.back());
  }
  return ds;
}

}  // namespace covplan
