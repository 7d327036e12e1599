#pragma once

#include <optional>
#include <vector>

#include "covplan/basis.hpp"
#include "covplan/scene.hpp"

namespace covplan {

struct EgoState {
  double X = 0.0;
  double Y = 0.0;
  double v = 0.0;
  double psi = 0.0;
};

struct ControlInput {
  double a = 0.0;  // acceleration [m/s^2]
  double r = 0.0;  // yaw rate [rad/s]
};

struct InputBounds {
  double a_min = -6.0;
  double a_max = 3.0;
  double r_min = -0.3;
  double r_max = 0.3;
};

// One predicted trajectory tube: ellipse centers per MPC step (0..N) with
// constant semi-axes for the vehicle it belongs to.
struct ObstacleTube {
  std::vector<Vec2> centers;
  double semi_a = 0.0;
  double semi_b = 0.0;
  int vehicle_id = -1;
  int base_index = -1;
};

struct ObstacleField {
  std::vector<ObstacleTube> tubes;
  double ego_semi_a = 2.5;  // ego half-length
  double ego_semi_b = 0.9;  // ego half-width
};

struct MpcConfig {
  int horizon = 30;
  double dt = 0.1;
  double w_v = 1.0;
  double w_y = 2.0;
  double w_psi = 10.0;
  double w_a = 0.1;
  double w_r = 1.0;
  double slack_weight = 100.0;  // c_k, constant over k
  InputBounds bounds;
  double v_ref = 28.0;
  double y_ref = 0.0;
  double grad_tol = 1e-6;
  int max_iters = 200;
  bool per_constraint_slack = false;  // one slack shared per step by default
};

struct PlanResult {
  std::vector<EgoState> states;        // x_0..x_N
  std::vector<ControlInput> inputs;    // u_0..u_{N-1}, inside the box exactly
  std::vector<double> slack;           // gamma_k for k = 0..N (max over tubes)
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;  // accepted iterates, non-increasing
};

// Euler-discretized planar vehicle model.
EgoState dubins_step(const EgoState& x, const ControlInput& u, double dt);

// Predicted basis trajectories of the surrounding vehicles as ellipse
// tubes. Semi-axes: half-dimension + inflation * atom semi-axis. With
// ignore_rear, vehicles in the ego's lane strictly behind it are dropped.
// predicted_sets[i] lists base indices for vehicles[i]; it must be
// non-empty (callers substitute the full basis beforehand if needed).
ObstacleField build_obstacle_field(const std::vector<VehicleState>& vehicles,
                                   const std::vector<std::vector<int>>& predicted_sets,
                                   const TrajectoryBasis& basis, int horizon, double dt,
                                   double inflation, const VehicleState& ego,
                                   const LaneGeometry& lanes, bool ignore_rear);

// Quadratic tracking cost plus the analytic slack penalty
// gamma_k = max(0, 1 - min over tubes of the scaled ellipse distance^2).
double mpc_cost(std::span<const EgoState> states, std::span<const ControlInput> inputs,
                const ObstacleField& field, const MpcConfig& cfg);

// Single-shooting projected-gradient descent with backtracking line search
// and a small deterministic set of start candidates. Returns the best
// iterate found; converged is set iff the gradient tolerance was met.
PlanResult solve_mpc(const EgoState& x0, const ObstacleField& field, const MpcConfig& cfg,
                     const std::vector<ControlInput>* warm_start = nullptr);

// Receding-horizon wrapper: plans, returns the full result, and keeps the
// one-step-shifted solution as the next warm start. One controller instance
// per agent loop.
class MpcController {
 public:
  explicit MpcController(MpcConfig cfg) : cfg_(cfg) {}

  PlanResult plan(const EgoState& x, const ObstacleField& field);
  const MpcConfig& config() const { return cfg_; }
  MpcConfig& config() { return cfg_; }

 private:
  MpcConfig cfg_;
  std::optional<std::vector<ControlInput>> warm_;
};

}  // namespace covplan
