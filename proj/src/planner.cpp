#include "covplan/planner.hpp"

#include <algorithm>
#include <cmath>

#include "covplan/errors.hpp"

namespace covplan {

EgoState dubins_step(const EgoState& x, const ControlInput& u, double dt) {
  if (dt <= 0.0) throw ContractError("dubins_step: dt must be positive");
  EgoState n;
  n.X = x.X + x.v * std::cos(x.psi) * dt;
  n.Y = x.Y + x.v * std::sin(x.psi) * dt;
  n.v = x.v + u.a * dt;
  n.psi = x.psi + u.r * dt;
  return n;
}

ObstacleField build_obstacle_field(const std::vector<VehicleState>& vehicles,
                                   const std::vector<std::vector<int>>& predicted_sets,
                                   const TrajectoryBasis& basis, int horizon, double dt,
                                   double inflation, const VehicleState& ego,
                                   const LaneGeometry& lanes, bool ignore_rear) {
  if (vehicles.size() != predicted_sets.size())
    throw ContractError("build_obstacle_field: one predicted set per vehicle required");
  ObstacleField field;
  field.ego_semi_a = 0.5 * ego.length;
  field.ego_semi_b = 0.5 * ego.width;

  const bool ego_on_road = lanes.on_road(ego.Y);
  const int ego_lane = ego_on_road ? lanes.lane_index(ego.Y) : -1;
  const double atom_a = basis.atoms.max_a();
  const double atom_b = basis.atoms.max_b();

  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const VehicleState& veh = vehicles[i];
    if (ignore_rear && ego_on_road && lanes.on_road(veh.Y) &&
        lanes.lane_index(veh.Y) == ego_lane && veh.X < ego.X)
      continue;  // rear vehicle's responsibility
    if (predicted_sets[i].empty())
      throw ContractError("build_obstacle_field: empty predicted set for vehicle " +
                          std::to_string(veh.id));
    for (int j : predicted_sets[i]) {
      const Trajectory& base = basis.bases[static_cast<std::size_t>(j)];
      ObstacleTube tube;
      tube.vehicle_id = veh.id;
      tube.base_index = j;
      tube.semi_a = 0.5 * veh.length + inflation * atom_a;
      tube.semi_b = 0.5 * veh.width + inflation * atom_b;
      tube.centers.resize(static_cast<std::size_t>(horizon) + 1);
      for (int k = 0; k <= horizon; ++k)
        tube.centers[static_cast<std::size_t>(k)] =
            reconstruct_position(base, k, dt, veh.X, veh.Y, veh.v);
      field.tubes.push_back(std::move(tube));
    }
  }
  return field;
}

namespace {

struct SlackInfo {
  double gamma = 0.0;   // max(0, 1 - lhs) of the worst tube
  int tube = -1;        // argmin tube (first on ties)
  double inv_sa2 = 0.0; // 1/(semi_a + ego_a)^2 of that tube
  double inv_sb2 = 0.0;
  double dx = 0.0;      // X - center_x
  double dy = 0.0;
};

// Shared-slack evaluation at step k: worst (minimum) scaled distance over
// all tubes.
SlackInfo step_slack(const ObstacleField& field, int k, double X, double Y) {
  SlackInfo info;
  double min_lhs = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < field.tubes.size(); ++t) {
    const ObstacleTube& tube = field.tubes[t];
    const Vec2& c = tube.centers[static_cast<std::size_t>(k)];
    const double sa = tube.semi_a + field.ego_semi_a;
    const double sb = tube.semi_b + field.ego_semi_b;
    const double dx = X - c.x;
    const double dy = Y - c.y;
    const double lhs = (dx * dx) / (sa * sa) + (dy * dy) / (sb * sb);
    if (lhs < min_lhs) {
      min_lhs = lhs;
      info.tube = static_cast<int>(t);
      info.inv_sa2 = 1.0 / (sa * sa);
      info.inv_sb2 = 1.0 / (sb * sb);
      info.dx = dx;
      info.dy = dy;
    }
  }
  if (info.tube >= 0) info.gamma = std::max(0.0, 1.0 - min_lhs);
  return info;
}

// Per-constraint slack: every violated tube contributes its own gamma.
double step_slack_per_constraint(const ObstacleField& field, int k, double X, double Y,
                                 double c_k, double* grad_x, double* grad_y) {
  double penalty = 0.0;
  for (const ObstacleTube& tube : field.tubes) {
    const Vec2& c = tube.centers[static_cast<std::size_t>(k)];
    const double sa = tube.semi_a + field.ego_semi_a;
    const double sb = tube.semi_b + field.ego_semi_b;
    const double dx = X - c.x;
    const double dy = Y - c.y;
    const double lhs = (dx * dx) / (sa * sa) + (dy * dy) / (sb * sb);
    const double gamma = std::max(0.0, 1.0 - lhs);
    if (gamma > 0.0) {
      penalty += c_k * gamma * gamma;
      if (grad_x) {
        *grad_x += c_k * 2.0 * gamma * (-2.0 * dx / (sa * sa));
        *grad_y += c_k * 2.0 * gamma * (-2.0 * dy / (sb * sb));
      }
    }
  }
  return penalty;
}

struct Evaluation {
  double cost = 0.0;
  std::vector<EgoState> states;
  std::vector<double> slack;
};

Evaluation rollout(const EgoState& x0, std::span<const ControlInput> inputs,
                   const ObstacleField& field, const MpcConfig& cfg) {
  const int n = cfg.horizon;
  Evaluation ev;
  ev.states.resize(static_cast<std::size_t>(n) + 1);
  ev.slack.assign(static_cast<std::size_t>(n) + 1, 0.0);
  ev.states[0] = x0;
  for (int k = 0; k < n; ++k)
    ev.states[static_cast<std::size_t>(k) + 1] =
        dubins_step(ev.states[static_cast<std::size_t>(k)], inputs[static_cast<std::size_t>(k)],
                    cfg.dt);

  double cost = 0.0;
  for (int k = 0; k <= n; ++k) {
    const EgoState& x = ev.states[static_cast<std::size_t>(k)];
    const double dv = x.v - cfg.v_ref;
    const double dy = x.Y - cfg.y_ref;
    cost += cfg.w_v * dv * dv + cfg.w_y * dy * dy + cfg.w_psi * x.psi * x.psi;
    if (k < n) {
      const ControlInput& u = inputs[static_cast<std::size_t>(k)];
      cost += cfg.w_a * u.a * u.a + cfg.w_r * u.r * u.r;
    }
    if (!field.tubes.empty()) {
      if (cfg.per_constraint_slack) {
        cost += step_slack_per_constraint(field, k, x.X, x.Y, cfg.slack_weight, nullptr,
                                          nullptr);
        // recorded slack stays the shared (worst-tube) value for diagnostics
        ev.slack[static_cast<std::size_t>(k)] = step_slack(field, k, x.X, x.Y).gamma;
      } else {
        const SlackInfo s = step_slack(field, k, x.X, x.Y);
        ev.slack[static_cast<std::size_t>(k)] = s.gamma;
        cost += cfg.slack_weight * s.gamma * s.gamma;
      }
    }
  }
  ev.cost = cost;
  return ev;
}

// Gradient of the rollout cost w.r.t. the flattened inputs, via the adjoint
// recursion through the dynamics.
void cost_gradient(const Evaluation& ev, std::span<const ControlInput> inputs,
                   const ObstacleField& field, const MpcConfig& cfg, std::vector<double>& g) {
  const int n = cfg.horizon;
  g.assign(static_cast<std::size_t>(2 * n), 0.0);

  auto stage_state_grad = [&](int k, double* gx) {
    const EgoState& x = ev.states[static_cast<std::size_t>(k)];
    gx[0] = 0.0;
    gx[1] = 2.0 * cfg.w_y * (x.Y - cfg.y_ref);
    gx[2] = 2.0 * cfg.w_v * (x.v - cfg.v_ref);
    gx[3] = 2.0 * cfg.w_psi * x.psi;
    if (field.tubes.empty()) return;
    if (cfg.per_constraint_slack) {
      step_slack_per_constraint(field, k, x.X, x.Y, cfg.slack_weight, &gx[0], &gx[1]);
    } else {
      const SlackInfo s = step_slack(field, k, x.X, x.Y);
      if (s.gamma > 0.0) {
        gx[0] += cfg.slack_weight * 2.0 * s.gamma * (-2.0 * s.dx * s.inv_sa2);
        gx[1] += cfg.slack_weight * 2.0 * s.gamma * (-2.0 * s.dy * s.inv_sb2);
      }
    }
  };

  double lambda[4];
  stage_state_grad(n, lambda);
  for (int k = n - 1; k >= 0; --k) {
    const EgoState& x = ev.states[static_cast<std::size_t>(k)];
    const ControlInput& u = inputs[static_cast<std::size_t>(k)];
    // dJ/du_k = dh/du + (df/du)^T lambda_{k+1}
    g[static_cast<std::size_t>(2 * k)] = 2.0 * cfg.w_a * u.a + cfg.dt * lambda[2];
    g[static_cast<std::size_t>(2 * k) + 1] = 2.0 * cfg.w_r * u.r + cfg.dt * lambda[3];
    // lambda_k = dh/dx + (df/dx)^T lambda_{k+1}
    const double c = std::cos(x.psi), s = std::sin(x.psi);
    double gx[4];
    stage_state_grad(k, gx);
    const double lX = lambda[0], lY = lambda[1], lv = lambda[2], lp = lambda[3];
    lambda[0] = gx[0] + lX;
    lambda[1] = gx[1] + lY;
    lambda[2] = gx[2] + c * cfg.dt * lX + s * cfg.dt * lY + lv;
    lambda[3] = gx[3] - x.v * s * cfg.dt * lX + x.v * c * cfg.dt * lY + lp;
  }
}

void project(std::vector<double>& u, const InputBounds& b) {
  for (std::size_t k = 0; k + 1 < u.size(); k += 2) {
    u[k] = std::clamp(u[k], b.a_min, b.a_max);
    u[k + 1] = std::clamp(u[k + 1], b.r_min, b.r_max);
  }
}

std::vector<ControlInput> unflatten(std::span<const double> u) {
  std::vector<ControlInput> out(u.size() / 2);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {u[2 * k], u[2 * k + 1]};
  return out;
}

struct DescentResult {
  std::vector<double> u;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

DescentResult descend(const EgoState& x0, std::vector<double> u, const ObstacleField& field,
                      const MpcConfig& cfg) {
  project(u, cfg.bounds);
  auto eval_cost = [&](const std::vector<double>& flat) {
    const auto inputs = unflatten(flat);
    return rollout(x0, inputs, field, cfg).cost;
  };

  DescentResult res;
  auto inputs = unflatten(u);
  Evaluation ev = rollout(x0, inputs, field, cfg);
  double cost = ev.cost;
  res.history.push_back(cost);

  std::vector<double> g;
  double step = 1e-2;
  constexpr double kArmijo = 1e-4;

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    cost_gradient(ev, inputs, field, cfg, g);

    // Projected-gradient optimality measure at unit step.
    std::vector<double> probe = u;
    for (std::size_t i = 0; i < probe.size(); ++i) probe[i] -= g[i];
    project(probe, cfg.bounds);
    double opt = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
      const double d = probe[i] - u[i];
      opt += d * d;
    }
    if (std::sqrt(opt) <= cfg.grad_tol) {
      res.converged = true;
      break;
    }

    // Backtracking line search on the projected step.
    bool accepted = false;
    double t = std::min(step * 4.0, 1e3);
    for (int bt = 0; bt < 60; ++bt) {
      std::vector<double> cand = u;
      for (std::size_t i = 0; i < cand.size(); ++i) cand[i] -= t * g[i];
      project(cand, cfg.bounds);
      double move2 = 0.0;
      for (std::size_t i = 0; i < cand.size(); ++i) {
        const double d = cand[i] - u[i];
        move2 += d * d;
      }
      if (move2 == 0.0) break;  // fully blocked at the bounds
      const double cand_cost = eval_cost(cand);
      if (cand_cost <= cost - kArmijo / t * move2) {
        u = std::move(cand);
        inputs = unflatten(u);
        ev = rollout(x0, inputs, field, cfg);
        cost = ev.cost;
        res.history.push_back(cost);
        step = t;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no descent direction at line-search resolution
  }

  res.u = std::move(u);
  res.cost = cost;
  res.iterations = it;
  return res;
}

}  // namespace

double mpc_cost(std::span<const EgoState> states, std::span<const ControlInput> inputs,
                const ObstacleField& field, const MpcConfig& cfg) {
  if (states.size() != inputs.size() + 1)
    throw ContractError("mpc_cost: need one more state than inputs");
  if (static_cast<int>(inputs.size()) != cfg.horizon)
    throw ContractError("mpc_cost: input length must equal the horizon");
  return rollout(states[0], inputs, field, cfg).cost;
}

PlanResult solve_mpc(const EgoState& x0, const ObstacleField& field, const MpcConfig& cfg,
                     const std::vector<ControlInput>* warm_start) {
  if (cfg.horizon < 1) throw ContractError("solve_mpc: horizon must be >= 1");
  for (const ObstacleTube& t : field.tubes)
    if (static_cast<int>(t.centers.size()) != cfg.horizon + 1)
      throw ContractError("solve_mpc: tube length must equal horizon + 1");

  const std::size_t dim = static_cast<std::size_t>(2 * cfg.horizon);
  std::vector<std::vector<double>> starts;

  if (warm_start && static_cast<int>(warm_start->size()) == cfg.horizon) {
    std::vector<double> w(dim);
    for (int k = 0; k < cfg.horizon; ++k) {
      w[static_cast<std::size_t>(2 * k)] = (*warm_start)[static_cast<std::size_t>(k)].a;
      w[static_cast<std::size_t>(2 * k) + 1] = (*warm_start)[static_cast<std::size_t>(k)].r;
    }
    bool finite = true;
    for (double v : w) finite = finite && std::isfinite(v);
    if (finite) starts.push_back(std::move(w));  // else fall through to the zero start
  }
  starts.emplace_back(dim, 0.0);
  {
    std::vector<double> brake(dim, 0.0);
    for (int k = 0; k < cfg.horizon; ++k) brake[static_cast<std::size_t>(2 * k)] = cfg.bounds.a_min;
    starts.push_back(std::move(brake));
    // Swerve templates: steer out for the first half, back for the second,
    // so descent can escape the symmetric dead-ahead stall.
    for (const double sign : {1.0, -1.0}) {
      std::vector<double> swerve(dim, 0.0);
      const double r = 0.5 * (sign > 0 ? cfg.bounds.r_max : cfg.bounds.r_min);
      for (int k = 0; k < cfg.horizon; ++k)
        swerve[static_cast<std::size_t>(2 * k) + 1] = (k < cfg.horizon / 2) ? r : -r;
      starts.push_back(std::move(swerve));
    }
  }

  DescentResult best;
  best.cost = std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  for (const auto& s : starts) {
    DescentResult r = descend(x0, s, field, cfg);
    total_iterations += r.iterations;
    if (r.cost < best.cost) best = std::move(r);
    // A converged, penetration-free solution ends the search.
    if (best.converged) {
      const Evaluation ev = rollout(x0, unflatten(best.u), field, cfg);
      if (*std::max_element(ev.slack.begin(), ev.slack.end()) <= 0.02) break;
    }
  }

  const auto inputs = unflatten(best.u);
  Evaluation ev = rollout(x0, inputs, field, cfg);
  PlanResult plan;
  plan.states = std::move(ev.states);
  plan.inputs = inputs;
  plan.slack = std::move(ev.slack);
  plan.objective = ev.cost;
  plan.iterations = total_iterations;
  plan.converged = best.converged;
  plan.objective_history = std::move(best.history);
  return plan;
}

PlanResult MpcController::plan(const EgoState& x, const ObstacleField& field) {
  PlanResult result = solve_mpc(x, field, cfg_, warm_ ? &*warm_ : nullptr);
  // Shift one step for the next call; repeat the last input.
  std::vector<ControlInput> shifted(result.inputs.begin() + 1, result.inputs.end());
  if (!result.inputs.empty()) shifted.push_back(result.inputs.back());
  warm_ = std::move(shifted);
  return result;
}

}  // namespace covplan
