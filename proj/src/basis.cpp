#include "covplan/basis.hpp"

#include <algorithm>
#include <cmath>

#include "covplan/errors.hpp"

namespace covplan {

AtomSet AtomSet::constant(int steps, double a_val, double b_val) {
  if (steps < 1 || a_val <= 0.0 || b_val <= 0.0)
    throw ContractError("AtomSet::constant: steps >= 1 and positive semi-axes required");
  AtomSet s;
  s.a.assign(static_cast<std::size_t>(steps), a_val);
  s.b.assign(static_cast<std::size_t>(steps), b_val);
  return s;
}

double AtomSet::max_a() const { return *std::max_element(a.begin(), a.end()); }
double AtomSet::max_b() const { return *std::max_element(b.begin(), b.end()); }

Trajectory deviation_encode(const Trajectory& raw, double v0, double dt) {
  if (v0 < 0.0) throw ContractError("deviation_encode: v0 must be nonnegative");
  Trajectory out;
  out.samples.resize(raw.samples.size());
  out.source_id = raw.source_id;
  out.v0 = v0;
  for (std::size_t t = 0; t < raw.samples.size(); ++t) {
    const Vec2& s = raw.samples[t];
    if (!std::isfinite(s.x) || !std::isfinite(s.y))
      throw DataError("deviation_encode: non-finite sample at step " + std::to_string(t));
    out.samples[t] = {s.x - v0 * static_cast<double>(t) * dt, s.y};
  }
  return out;
}

Trajectory deviation_decode(const Trajectory& dev, double v0, double dt) {
  Trajectory out = dev;
  out.v0 = v0;
  for (std::size_t t = 0; t < out.samples.size(); ++t)
    out.samples[t].x += v0 * static_cast<double>(t) * dt;
  return out;
}

double atomic_distance(const Trajectory& p, const Trajectory& q, const AtomSet& atoms) {
  if (p.samples.size() != q.samples.size())
    throw ContractError("atomic_distance: trajectories have different lengths");
  if (static_cast<int>(p.samples.size()) != atoms.steps())
    throw ContractError("atomic_distance: atom set length does not match trajectories");
  double worst = 0.0;
  for (std::size_t t = 0; t < p.samples.size(); ++t) {
    const double dx = (p.samples[t].x - q.samples[t].x) / atoms.a[t];
    const double dy = (p.samples[t].y - q.samples[t].y) / atoms.b[t];
    worst = std::max(worst, dx * dx + dy * dy);
  }
  return std::sqrt(worst);
}

bool within_distance(const Trajectory& p, const Trajectory& q, const AtomSet& atoms,
                     double epsilon) {
  if (p.samples.size() != q.samples.size())
    throw ContractError("within_distance: trajectories have different lengths");
  const double eps2 = epsilon * epsilon;
  for (std::size_t t = 0; t < p.samples.size(); ++t) {
    const double dx = (p.samples[t].x - q.samples[t].x) / atoms.a[t];
    const double dy = (p.samples[t].y - q.samples[t].y) / atoms.b[t];
    if (dx * dx + dy * dy > eps2) return false;
  }
  return true;
}

std::vector<std::vector<int>> cover_graph(const std::vector<Trajectory>& corpus,
                                          double epsilon, const AtomSet& atoms) {
  if (corpus.empty()) throw ContractError("cover_graph: empty corpus");
  const int n = static_cast<int>(corpus.size());
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) adj[i].push_back(i);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (within_distance(corpus[i], corpus[j], atoms, epsilon)) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  return adj;
}

TrajectoryBasis greedy_sparsify(const std::vector<Trajectory>& corpus, double epsilon,
                                const AtomSet& atoms, double dt) {
  if (corpus.empty()) throw ContractError("greedy_sparsify: empty corpus");
  if (epsilon <= 0.0) throw ContractError("greedy_sparsify: epsilon must be positive");
  const auto adj = cover_graph(corpus, epsilon, atoms);
  const int n = static_cast<int>(corpus.size());

  std::vector<char> covered(static_cast<std::size_t>(n), 0);
  std::vector<int> chosen;
  int remaining = n;
  while (remaining > 0) {
    int best = -1;
    int best_gain = 0;
    for (int i = 0; i < n; ++i) {
      int gain = 0;
      for (int j : adj[i]) gain += covered[j] ? 0 : 1;
      if (gain > best_gain) {  // strict: ties keep the lowest index
        best_gain = gain;
        best = i;
      }
    }
    chosen.push_back(best);
    for (int j : adj[best]) {
      if (!covered[j]) {
        covered[j] = 1;
        --remaining;
      }
    }
  }

  TrajectoryBasis basis;
  basis.epsilon = epsilon;
  basis.atoms = atoms;
  basis.dt = dt;
  basis.bases.reserve(chosen.size());
  for (int i : chosen) basis.bases.push_back(corpus[static_cast<std::size_t>(i)]);
  return basis;
}

std::pair<int, double> nearest_base(const Trajectory& traj, const TrajectoryBasis& basis) {
  if (basis.bases.empty()) throw ContractError("nearest_base: empty basis");
  int best = 0;
  double best_dist = atomic_distance(traj, basis.bases[0], basis.atoms);
  for (int i = 1; i < basis.size(); ++i) {
    const double d = atomic_distance(traj, basis.bases[static_cast<std::size_t>(i)], basis.atoms);
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return {best, best_dist};
}

Vec2 reconstruct_position(const Trajectory& dev, int k, double dt, double x0, double y0,
                          double v) {
  const int last = dev.steps() - 1;
  const int idx = std::min(k, last);
  return {x0 + v * static_cast<double>(k) * dt + dev.samples[static_cast<std::size_t>(idx)].x,
          y0 + dev.samples[static_cast<std::size_t>(idx)].y};
}

}  // namespace covplan
