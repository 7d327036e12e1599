#pragma once

#include <string>
#include <utility>
#include <vector>

namespace covplan {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

// Fixed-horizon sampled 2D path. Positions are either raw (relative to the
// subject's pose at step 0) or deviation-encoded (offset from the constant
// current-speed straight path); which one is a property of the use site.
struct Trajectory {
  std::vector<Vec2> samples;
  std::string source_id;
  double v0 = 0.0;  // speed at step 0 [m/s]

  int steps() const { return static_cast<int>(samples.size()); }
};

// Per-timestep uncertainty ellipse semi-axes defining the trajectory norm.
struct AtomSet {
  std::vector<double> a;  // longitudinal semi-axes [m]
  std::vector<double> b;  // lateral semi-axes [m]

  static AtomSet constant(int steps, double a_val, double b_val);
  int steps() const { return static_cast<int>(a.size()); }
  double max_a() const;
  double max_b() const;
};

struct GeometryConfig {
  double dt = 0.1;       // sample period [s]
  int steps = 30;        // samples per trajectory (3 s horizon)
  double atom_a = 2.0;   // longitudinal ellipse semi-axis [m]
  double atom_b = 0.5;   // lateral ellipse semi-axis [m]
  double epsilon = 1.0;  // cover radius in atomic-norm units

  AtomSet atoms() const { return AtomSet::constant(steps, atom_a, atom_b); }
};

// An epsilon-covering set of deviation-encoded base trajectories.
struct TrajectoryBasis {
  std::vector<Trajectory> bases;
  double epsilon = 1.0;
  AtomSet atoms;
  double dt = 0.1;

  int size() const { return static_cast<int>(bases.size()); }
  int steps() const { return atoms.steps(); }
};

// Subtracts the constant-velocity ramp (v0*t*dt, 0) from each sample.
// Throws DataError on non-finite input.
Trajectory deviation_encode(const Trajectory& raw, double v0, double dt);

// Inverse of deviation_encode (exact up to floating-point addition).
Trajectory deviation_decode(const Trajectory& dev, double v0, double dt);

// max over t of sqrt(((px-qx)/a_t)^2 + ((py-qy)/b_t)^2).
// Throws ContractError when lengths mismatch.
double atomic_distance(const Trajectory& p, const Trajectory& q, const AtomSet& atoms);

// Early-exit variant of atomic_distance(p, q) <= epsilon.
bool within_distance(const Trajectory& p, const Trajectory& q, const AtomSet& atoms,
                     double epsilon);

// Node i adjacent to j iff atomic_distance <= epsilon; self-loops included.
std::vector<std::vector<int>> cover_graph(const std::vector<Trajectory>& corpus,
                                          double epsilon, const AtomSet& atoms);

// Greedy minimum set cover over the cover graph: repeatedly pick the node
// covering the most uncovered nodes, ties broken by lowest corpus index.
TrajectoryBasis greedy_sparsify(const std::vector<Trajectory>& corpus, double epsilon,
                                const AtomSet& atoms, double dt);

// argmin over bases of atomic_distance; ties broken by lowest base index.
std::pair<int, double> nearest_base(const Trajectory& traj, const TrajectoryBasis& basis);

// Absolute position of a deviation-encoded trajectory at step k, for a
// subject currently at (x0, y0) moving at speed v. Steps beyond the last
// sample clamp the deviation while the constant-velocity ramp continues.
Vec2 reconstruct_position(const Trajectory& dev, int k, double dt, double x0, double y0,
                          double v);

}  // namespace covplan
