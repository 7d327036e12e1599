#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "covplan/calibration.hpp"
#include "covplan/planner.hpp"
#include "covplan/rng.hpp"
#include "covplan/scene.hpp"
#include "covplan/synthetic.hpp"

namespace covplan {

struct TrialConfig {
  int n_uncontrolled = 3;
  double duration = 20.0;
  double dt = 0.1;
  double replan_period = 1.0;  // uncontrolled re-commitment period [s]
  bool rear_ignore = true;
  std::uint64_t seed = 1;
  ScenarioSamplerConfig sampler;
  MpcConfig mpc;
  double prediction_inflation = -1.0;  // < 0: use basis.epsilon
  // lane selection heuristic for the controlled vehicle
  double lane_change_clearance = 40.0;
  double lane_change_margin = 20.0;
  double lane_change_gap = 12.0;
  double lane_change_hysteresis = 2.0;
  // boxed-in detection thresholds (bumper gaps)
  double trap_longitudinal_gap = 25.0;
  double trap_side_gap = 15.0;
  bool record_trace = false;
};

enum class CollisionClass { kFrontalSide, kRearEnd };
const char* collision_class_name(CollisionClass c);

struct CollisionEvent {
  double t = 0.0;
  int id_a = 0;  // id 0 is the controlled vehicle
  int id_b = 0;
  CollisionClass type = CollisionClass::kFrontalSide;
  bool trapped = false;  // controlled vehicle was boxed on all sides
};

struct TraceRow {
  double t;
  int id;
  double X, Y, v, psi;
  int committed_base;  // >=0 base index, -1 straight-hold, -2 controlled
};

struct TrialOutcome {
  std::uint64_t seed = 0;
  int n_uncontrolled = 0;
  bool completed = false;
  std::string failure;  // diagnostics when !completed
  double min_scaled_clearance = std::numeric_limits<double>::infinity();
  std::vector<CollisionEvent> events;
  std::vector<TraceRow> trace;
};

// An uncontrolled agent follows its committed absolute trajectory until the
// next replan instant.
struct UncontrolledAgent {
  VehicleState state;
  std::vector<Vec2> committed;  // absolute positions, one per dt from commit
  int committed_base = -1;      // -1 = straight hold (no basis commitment)
  int phase = 0;                // steps advanced since commitment
};

struct World {
  double t = 0.0;
  TrialConfig cfg;
  VehicleState controlled;  // id 0
  std::vector<UncontrolledAgent> agents;
  LaneGeometry lanes;
  Rng rng;
  const TrajectoryBasis* basis = nullptr;
  const CalibratedPredictor* predictor = nullptr;
  MpcController controller;
  double controlled_y_ref = 0.0;
  double last_lane_decision = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<int, int>> overlapping;  // pairs currently in contact
  double min_scaled_clearance = std::numeric_limits<double>::infinity();
  PlanResult last_plan;

  World(TrialConfig c, const TrajectoryBasis& b, const CalibratedPredictor& p,
        std::uint64_t seed)
      : cfg(c), rng(seed), basis(&b), predictor(&p), controller(c.mpc) {}
};

// Scene as seen from one uncontrolled agent (the controlled vehicle is one
// of the others) or from the controlled vehicle.
Scene agent_scene(const World& world, int agent_index);
Scene controlled_scene(const World& world);

// Recommits agent_index: predicted candidate set, collision filtering
// against the other agents' commitments and (when directly ahead) the
// constant-velocity controlled vehicle, uniform choice among survivors.
// Returns the committed base index (-1 for the straight hold fallback).
int uncontrolled_policy(World& world, int agent_index);

// One dt of closed-loop time: replans due agents, plans and applies the
// MPC input, advances everyone, and appends newly started collisions.
std::vector<CollisionEvent> step_world(World& world);

// Rectangle-overlap scan over all vehicle pairs at the current instant.
// Entries in `already` (pairs still in contact from the previous step) are
// not re-reported.
std::vector<CollisionEvent> detect_collisions(const World& world,
                                              std::vector<std::pair<int, int>>& already);

World make_world(const TrialConfig& cfg, const TrajectoryBasis& basis,
                 const CalibratedPredictor& predictor);

TrialOutcome run_trial(const TrialConfig& cfg, const TrajectoryBasis& basis,
                       const CalibratedPredictor& predictor);

// Independent trials with per-trial derived seeds, parallelized across
// workers; the outcome order is by trial index regardless of scheduling.
std::vector<TrialOutcome> run_trials(const TrialConfig& cfg, int n_trials,
                                     const TrajectoryBasis& basis,
                                     const CalibratedPredictor& predictor);

struct ClassCounts {
  long frontal_side = 0;
  long rear_end = 0;
};

struct WilsonInterval {
  double rate = 0.0;
  double low = 0.0;
  double high = 0.0;
};

WilsonInterval wilson_interval(long successes, long trials, double z = 1.96);

struct StatsReport {
  long trials = 0;
  long incomplete = 0;
  ClassCounts all_events;
  ClassCounts controlled_events;  // events involving the controlled vehicle
  std::map<int, ClassCounts> events_by_n;  // keyed by n_uncontrolled
  std::map<int, long> trials_by_n;
  long trapped_collisions = 0;
  WilsonInterval controlled_any;
  WilsonInterval controlled_frontal_side;
  WilsonInterval controlled_rear_end;
  double min_scaled_clearance = std::numeric_limits<double>::infinity();
};

StatsReport aggregate(std::span<const TrialOutcome> outcomes);

}  // namespace covplan
