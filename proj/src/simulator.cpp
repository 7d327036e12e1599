#include "covplan/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "covplan/errors.hpp"
#include "covplan/parallel.hpp"

namespace covplan {

const char* collision_class_name(CollisionClass c) {
  return c == CollisionClass::kRearEnd ? "rear_end" : "frontal_side";
}

Scene agent_scene(const World& world, int agent_index) {
  Scene s;
  s.lanes = world.lanes;
  s.ego = world.agents[static_cast<std::size_t>(agent_index)].state;
  for (std::size_t i = 0; i < world.agents.size(); ++i)
    if (static_cast<int>(i) != agent_index) s.others.push_back(world.agents[i].state);
  s.others.push_back(world.controlled);
  return s;
}

Scene controlled_scene(const World& world) {
  Scene s;
  s.lanes = world.lanes;
  s.ego = world.controlled;
  for (const auto& a : world.agents) s.others.push_back(a.state);
  return s;
}

namespace {

// Committed absolute position at an integer step offset from the commit
// instant; extrapolates at constant velocity past the last sample.
Vec2 committed_position(const UncontrolledAgent& agent, int step) {
  const auto& c = agent.committed;
  const int last = static_cast<int>(c.size()) - 1;
  if (step <= last) return c[static_cast<std::size_t>(step)];
  const Vec2 end = c[static_cast<std::size_t>(last)];
  const Vec2 prev = c[static_cast<std::size_t>(std::max(0, last - 1))];
  const double extra = static_cast<double>(step - last);
  return {end.x + (end.x - prev.x) * extra, end.y + (end.y - prev.y) * extra};
}

bool rect_overlap(double ax, double ay, double al, double aw, double bx, double by, double bl,
                  double bw) {
  return std::abs(ax - bx) < 0.5 * (al + bl) && std::abs(ay - by) < 0.5 * (aw + bw);
}

// First step at which the candidate base (committed from `self` now) hits
// another agent's commitment or, when the controlled vehicle is directly
// ahead, its constant-velocity footprint. -1 when clear over the horizon.
int candidate_collision_onset(const World& world, int agent_index, const Trajectory& base) {
  const UncontrolledAgent& self = world.agents[static_cast<std::size_t>(agent_index)];
  const double dt = world.basis->dt;
  const int steps = base.steps();

  const bool self_on_road = world.lanes.on_road(self.state.Y);
  const bool controlled_ahead =
      self_on_road && world.lanes.on_road(world.controlled.Y) &&
      world.lanes.lane_index(world.controlled.Y) == world.lanes.lane_index(self.state.Y) &&
      world.controlled.X > self.state.X;

  for (int k = 0; k < steps; ++k) {
    const Vec2 p = reconstruct_position(base, k, dt, self.state.X, self.state.Y, self.state.v);
    for (std::size_t j = 0; j < world.agents.size(); ++j) {
      if (static_cast<int>(j) == agent_index) continue;
      const UncontrolledAgent& other = world.agents[j];
      const Vec2 q = committed_position(other, other.phase + k);
      if (rect_overlap(p.x, p.y, self.state.length, self.state.width, q.x, q.y,
                       other.state.length, other.state.width))
        return k;
    }
    if (controlled_ahead) {
      const double t = k * dt;
      const double cx = world.controlled.X + world.controlled.v * std::cos(world.controlled.psi) * t;
      const double cy = world.controlled.Y + world.controlled.v * std::sin(world.controlled.psi) * t;
      if (rect_overlap(p.x, p.y, self.state.length, self.state.width, cx, cy,
                       world.controlled.length, world.controlled.width))
        return k;
    }
  }
  return -1;
}

Trajectory straight_hold_base(int steps) {
  Trajectory t;
  t.samples.assign(static_cast<std::size_t>(steps), Vec2{0.0, 0.0});
  t.source_id = "straight_hold";
  return t;
}

void commit(World& world, int agent_index, const Trajectory& base, int base_index) {
  UncontrolledAgent& agent = world.agents[static_cast<std::size_t>(agent_index)];
  const double dt = world.basis->dt;
  agent.committed.resize(static_cast<std::size_t>(base.steps()));
  for (int k = 0; k < base.steps(); ++k)
    agent.committed[static_cast<std::size_t>(k)] =
        reconstruct_position(base, k, dt, agent.state.X, agent.state.Y, agent.state.v);
  agent.committed_base = base_index;
  agent.phase = 0;
}

}  // namespace

int uncontrolled_policy(World& world, int agent_index) {
  UncontrolledAgent& agent = world.agents[static_cast<std::size_t>(agent_index)];
  const Scene scene = agent_scene(world, agent_index);
  const Affordance aff = extract_affordance(scene);
  const std::vector<int> candidates =
      predict_set(world.predictor->net, world.predictor->thresholds, aff);

  if (candidates.empty()) {
    commit(world, agent_index, straight_hold_base(world.basis->steps()), -1);
    return -1;
  }

  std::vector<int> survivors;
  std::vector<std::pair<int, int>> onsets;  // (candidate, first collision step)
  for (int j : candidates) {
    const int onset =
        candidate_collision_onset(world, agent_index, world.basis->bases[static_cast<std::size_t>(j)]);
    if (onset < 0)
      survivors.push_back(j);
    else
      onsets.emplace_back(j, onset);
  }

  if (!survivors.empty()) {
    const int pick = survivors[static_cast<std::size_t>(
        world.rng.below(static_cast<std::uint64_t>(survivors.size())))];
    commit(world, agent_index, world.basis->bases[static_cast<std::size_t>(pick)], pick);
    return pick;
  }

  // Everything collides: take the candidate that survives longest; if even
  // that fails immediately, hold the current speed straight.
  int best = -1, best_onset = -1;
  for (const auto& [j, onset] : onsets) {
    if (onset > best_onset) {
      best = j;
      best_onset = onset;
    }
  }
  if (best_onset <= 1) {
    commit(world, agent_index, straight_hold_base(world.basis->steps()), -1);
    return -1;
  }
  commit(world, agent_index, world.basis->bases[static_cast<std::size_t>(best)], best);
  return best;
}

namespace {

void update_lane_reference(World& world) {
  const TrialConfig& cfg = world.cfg;
  if (world.t - world.last_lane_decision < cfg.lane_change_hysteresis) return;
  if (!world.lanes.on_road(world.controlled.Y)) return;
  world.last_lane_decision = world.t;

  const Affordance a = extract_affordance(controlled_scene(world));
  const double forward = a[kForwardClearance];
  if (forward >= cfg.lane_change_clearance) {
    // plenty of room: track the current lane center
    world.controlled_y_ref =
        world.lanes.centers[static_cast<std::size_t>(world.lanes.lane_index(world.controlled.Y))];
    return;
  }
  const int lane = world.lanes.lane_index(world.controlled.Y);
  double best_room = forward;
  int target = lane;
  if (lane + 1 < world.lanes.lane_count() && a[kLeftFrontXClearance] >= cfg.lane_change_gap &&
      a[kLeftRearXClearance] >= cfg.lane_change_gap &&
      a[kLeftFrontXClearance] > best_room + cfg.lane_change_margin) {
    best_room = a[kLeftFrontXClearance];
    target = lane + 1;
  }
  if (lane - 1 >= 0 && a[kRightFrontXClearance] >= cfg.lane_change_gap &&
      a[kRightRearXClearance] >= cfg.lane_change_gap &&
      a[kRightFrontXClearance] > best_room + cfg.lane_change_margin) {
    target = lane - 1;
  }
  world.controlled_y_ref = world.lanes.centers[static_cast<std::size_t>(target)];
}

bool controlled_is_trapped(const World& world) {
  const TrialConfig& cfg = world.cfg;
  if (!world.lanes.on_road(world.controlled.Y)) return false;
  const int lane = world.lanes.lane_index(world.controlled.Y);
  double front = std::numeric_limits<double>::infinity();
  double rear = std::numeric_limits<double>::infinity();
  std::vector<double> side(static_cast<std::size_t>(world.lanes.lane_count()),
                           std::numeric_limits<double>::infinity());
  for (const auto& agent : world.agents) {
    const VehicleState& v = agent.state;
    if (!world.lanes.on_road(v.Y)) continue;
    const int vl = world.lanes.lane_index(v.Y);
    const double gap =
        std::abs(v.X - world.controlled.X) - 0.5 * (v.length + world.controlled.length);
    if (vl == lane) {
      if (v.X >= world.controlled.X)
        front = std::min(front, gap);
      else
        rear = std::min(rear, gap);
    } else if (std::abs(vl - lane) == 1) {
      side[static_cast<std::size_t>(vl)] = std::min(side[static_cast<std::size_t>(vl)], gap);
    }
  }
  if (front >= cfg.trap_longitudinal_gap || rear >= cfg.trap_longitudinal_gap) return false;
  const bool left_blocked = lane + 1 >= world.lanes.lane_count() ||
                            side[static_cast<std::size_t>(lane + 1)] < cfg.trap_side_gap;
  const bool right_blocked =
      lane - 1 < 0 || side[static_cast<std::size_t>(lane - 1)] < cfg.trap_side_gap;
  return left_blocked && right_blocked;
}

struct Footprint {
  int id;
  double X, Y, v, length, width;
};

std::vector<Footprint> footprints(const World& world) {
  std::vector<Footprint> f;
  f.push_back({world.controlled.id, world.controlled.X, world.controlled.Y, world.controlled.v,
               world.controlled.length, world.controlled.width});
  for (const auto& a : world.agents)
    f.push_back({a.state.id, a.state.X, a.state.Y, a.state.v, a.state.length, a.state.width});
  return f;
}

}  // namespace

std::vector<CollisionEvent> detect_collisions(const World& world,
                                              std::vector<std::pair<int, int>>& already) {
  const auto f = footprints(world);
  std::vector<CollisionEvent> events;
  std::vector<std::pair<int, int>> now_overlapping;
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (std::size_t j = i + 1; j < f.size(); ++j) {
      if (!rect_overlap(f[i].X, f[i].Y, f[i].length, f[i].width, f[j].X, f[j].Y, f[j].length,
                        f[j].width))
        continue;
      const std::pair<int, int> key{std::min(f[i].id, f[j].id), std::max(f[i].id, f[j].id)};
      now_overlapping.push_back(key);
      if (std::find(already.begin(), already.end(), key) != already.end()) continue;

      // Contact normal: the axis with the smaller penetration depth.
      const double depth_x = 0.5 * (f[i].length + f[j].length) - std::abs(f[i].X - f[j].X);
      const double depth_y = 0.5 * (f[i].width + f[j].width) - std::abs(f[i].Y - f[j].Y);
      const Footprint& rear_veh = f[i].X <= f[j].X ? f[i] : f[j];
      const Footprint& front_veh = f[i].X <= f[j].X ? f[j] : f[i];

      CollisionEvent ev;
      ev.t = world.t;
      ev.id_a = key.first;
      ev.id_b = key.second;
      ev.type = (depth_x <= depth_y && rear_veh.v > front_veh.v) ? CollisionClass::kRearEnd
                                                                 : CollisionClass::kFrontalSide;
      ev.trapped = (key.first == 0) && controlled_is_trapped(world);
      events.push_back(ev);
    }
  }
  already = std::move(now_overlapping);
  return events;
}

std::vector<CollisionEvent> step_world(World& world) {
  const TrialConfig& cfg = world.cfg;
  const int replan_steps =
      std::max(1, static_cast<int>(std::lround(cfg.replan_period / cfg.dt)));

  // 1. Recommit due agents, in index order.
  for (std::size_t i = 0; i < world.agents.size(); ++i) {
    UncontrolledAgent& agent = world.agents[i];
    if (agent.committed.empty() || agent.phase >= replan_steps)
      uncontrolled_policy(world, static_cast<int>(i));
  }

  // 2. Controlled vehicle: lane reference, predicted sets, obstacle field, MPC.
  update_lane_reference(world);
  std::vector<VehicleState> vehicles;
  std::vector<std::vector<int>> sets;
  std::vector<int> full(static_cast<std::size_t>(world.basis->size()));
  for (int i = 0; i < world.basis->size(); ++i) full[static_cast<std::size_t>(i)] = i;
  for (std::size_t i = 0; i < world.agents.size(); ++i) {
    vehicles.push_back(world.agents[i].state);
    const Affordance aff = extract_affordance(agent_scene(world, static_cast<int>(i)));
    std::vector<int> s = predict_set(world.predictor->net, world.predictor->thresholds, aff);
    if (s.empty()) s = full;  // conservative substitution
    sets.push_back(std::move(s));
  }
  const double inflation =
      cfg.prediction_inflation < 0.0 ? world.basis->epsilon : cfg.prediction_inflation;
  const ObstacleField field =
      build_obstacle_field(vehicles, sets, *world.basis, cfg.mpc.horizon, cfg.mpc.dt, inflation,
                           world.controlled, world.lanes, cfg.rear_ignore);

  world.controller.config().y_ref = world.controlled_y_ref;
  EgoState ego{world.controlled.X, world.controlled.Y, world.controlled.v,
               world.controlled.psi};
  world.last_plan = world.controller.plan(ego, field);
  ControlInput u = world.last_plan.inputs.front();
  // actuation keeps speed nonnegative
  if (world.controlled.v + u.a * cfg.dt < 0.0) u.a = -world.controlled.v / cfg.dt;

  // 3. Advance everyone from the same pre-step snapshot.
  const EgoState next = dubins_step(ego, u, cfg.dt);
  world.controlled.X = next.X;
  world.controlled.Y = next.Y;
  world.controlled.v = next.v;
  world.controlled.psi = next.psi;

  for (auto& agent : world.agents) {
    const Vec2 prev = committed_position(agent, agent.phase);
    agent.phase += 1;
    const Vec2 pos = committed_position(agent, agent.phase);
    agent.state.X = pos.x;
    agent.state.Y = pos.y;
    agent.state.v = std::max(0.0, (pos.x - prev.x) / cfg.dt);
    agent.state.psi = (pos.x == prev.x && pos.y == prev.y)
                          ? 0.0
                          : std::atan2(pos.y - prev.y, pos.x - prev.x);
  }

  world.t += cfg.dt;

  // 4. Clearance bookkeeping and collision scan.
  const auto f = footprints(world);
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double rx = std::abs(f[0].X - f[i].X) / (0.5 * (f[0].length + f[i].length));
    const double ry = std::abs(f[0].Y - f[i].Y) / (0.5 * (f[0].width + f[i].width));
    world.min_scaled_clearance = std::min(world.min_scaled_clearance, std::max(rx, ry));
  }
  return detect_collisions(world, world.overlapping);
}

World make_world(const TrialConfig& cfg, const TrajectoryBasis& basis,
                 const CalibratedPredictor& predictor) {
  World world(cfg, basis, predictor, derive_seed(cfg.seed, "trial"));

  ScenarioSamplerConfig sampler = cfg.sampler;
  sampler.n_others_min = cfg.n_uncontrolled;
  sampler.n_others_max = cfg.n_uncontrolled;
  Rng init_rng(derive_seed(cfg.seed, "init"));
  const Scene scene = sample_scene(sampler, init_rng);

  world.lanes = scene.lanes;
  world.controlled = scene.ego;
  world.controlled.id = 0;
  world.controlled_y_ref = scene.ego.Y;
  world.agents.resize(scene.others.size());
  for (std::size_t i = 0; i < scene.others.size(); ++i) world.agents[i].state = scene.others[i];
  world.controller.config().dt = cfg.dt;
  return world;
}

TrialOutcome run_trial(const TrialConfig& cfg, const TrajectoryBasis& basis,
                       const CalibratedPredictor& predictor) {
  TrialOutcome outcome;
  outcome.seed = cfg.seed;
  outcome.n_uncontrolled = cfg.n_uncontrolled;

  World world = make_world(cfg, basis, predictor);
  const int steps = static_cast<int>(std::lround(cfg.duration / cfg.dt));

  auto record = [&](const World& w) {
    if (!cfg.record_trace) return;
    outcome.trace.push_back({w.t, 0, w.controlled.X, w.controlled.Y, w.controlled.v,
                             w.controlled.psi, -2});
    for (const auto& a : w.agents)
      outcome.trace.push_back({w.t, a.state.id, a.state.X, a.state.Y, a.state.v, a.state.psi,
                               a.committed_base});
  };

  record(world);
  try {
    for (int k = 0; k < steps; ++k) {
      const auto events = step_world(world);
      record(world);
      bool controlled_hit = false;
      for (const auto& ev : events) {
        outcome.events.push_back(ev);
        controlled_hit = controlled_hit || ev.id_a == 0 || ev.id_b == 0;
      }
      if (controlled_hit) break;  // first collision involving the controlled vehicle
    }
    outcome.completed = true;
  } catch (const std::exception& e) {
    outcome.completed = false;
    outcome.failure = e.what();
  }
  outcome.min_scaled_clearance = world.min_scaled_clearance;
  return outcome;
}

std::vector<TrialOutcome> run_trials(const TrialConfig& cfg, int n_trials,
                                     const TrajectoryBasis& basis,
                                     const CalibratedPredictor& predictor) {
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(n_trials));
  parallel_for(static_cast<std::size_t>(n_trials), [&](std::size_t i) {
    TrialConfig trial = cfg;
    trial.seed = derive_seed(cfg.seed, i);
    outcomes[i] = run_trial(trial, basis, predictor);
  });
  return outcomes;
}

WilsonInterval wilson_interval(long successes, long trials, double z) {
  WilsonInterval w;
  if (trials <= 0) return w;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = p + z2 / (2.0 * n);
  const double spread = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  w.rate = p;
  w.low = std::max(0.0, (center - spread) / denom);
  w.high = std::min(1.0, (center + spread) / denom);
  return w;
}

StatsReport aggregate(std::span<const TrialOutcome> outcomes) {
  if (outcomes.empty()) throw ContractError("aggregate: no outcomes");
  StatsReport r;
  r.trials = static_cast<long>(outcomes.size());
  long trials_with_controlled = 0, trials_with_cfs = 0, trials_with_cre = 0;
  for (const TrialOutcome& o : outcomes) {
    if (!o.completed) ++r.incomplete;
    ++r.trials_by_n[o.n_uncontrolled];
    r.min_scaled_clearance = std::min(r.min_scaled_clearance, o.min_scaled_clearance);
    bool any_c = false, any_fs = false, any_re = false;
    for (const CollisionEvent& ev : o.events) {
      auto& by_n = r.events_by_n[o.n_uncontrolled];
      if (ev.type == CollisionClass::kFrontalSide) {
        ++r.all_events.frontal_side;
        ++by_n.frontal_side;
      } else {
        ++r.all_events.rear_end;
        ++by_n.rear_end;
      }
      const bool involves_controlled = ev.id_a == 0 || ev.id_b == 0;
      if (involves_controlled) {
        any_c = true;
        if (ev.type == CollisionClass::kFrontalSide) {
          ++r.controlled_events.frontal_side;
          any_fs = true;
        } else {
          ++r.controlled_events.rear_end;
          any_re = true;
        }
        if (ev.trapped) ++r.trapped_collisions;
      }
    }
    trials_with_controlled += any_c ? 1 : 0;
    trials_with_cfs += any_fs ? 1 : 0;
    trials_with_cre += any_re ? 1 : 0;
  }
  r.controlled_any = wilson_interval(trials_with_controlled, r.trials);
  r.controlled_frontal_side = wilson_interval(trials_with_cfs, r.trials);
  r.controlled_rear_end = wilson_interval(trials_with_cre, r.trials);
  return r;
}

}  // namespace covplan
