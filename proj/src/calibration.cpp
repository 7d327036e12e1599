#include "covplan/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "covplan/errors.hpp"

namespace covplan {

double binom_cdf(double epsilon, long k, long n) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw ContractError("binom_cdf: epsilon outside [0, 1]");
  if (k < 0 || n < 0 || k > n) throw ContractError("binom_cdf: require 0 <= k <= N");
  if (epsilon == 0.0) return 1.0;
  if (k == n) return 1.0;
  if (epsilon == 1.0) return 0.0;  // k < n: the all-successes term is excluded

  const double log_eps = std::log(epsilon);
  const double log_1m = std::log1p(-epsilon);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);

  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(k) + 1);
  for (long j = 0; j <= k; ++j) {
    const double jd = static_cast<double>(j);
    const double log_term = lg_n1 - std::lgamma(jd + 1.0) -
                            std::lgamma(static_cast<double>(n - j) + 1.0) + jd * log_eps +
                            (static_cast<double>(n - j)) * log_1m;
    terms.push_back(log_term);
  }
  const double m = *std::max_element(terms.begin(), terms.end());
  for (double& t : terms) t = std::exp(t - m);
  // Sorted compensated (Neumaier) summation of the scaled terms.
  std::sort(terms.begin(), terms.end());
  double sum = 0.0, comp = 0.0;
  for (double t : terms) {
    const double s = sum + t;
    comp += (std::abs(sum) >= std::abs(t)) ? (sum - s) + t : (t - s) + sum;
    sum = s;
  }
  const double value = std::exp(m) * (sum + comp);
  return std::clamp(value, 0.0, 1.0);
}

RcpBound rcp_epsilon(double confidence, int basis_size, long n2) {
  if (confidence <= 0.0 || confidence >= 1.0)
    throw ContractError("rcp_epsilon: confidence must lie in (0, 1)");
  const long helly = static_cast<long>(basis_size) + 1;
  if (n2 <= helly)
    throw InfeasibleError("rcp_epsilon: calibration size " + std::to_string(n2) +
                          " must exceed the Helly dimension " + std::to_string(helly));
  const double target = 1.0 - confidence;

  // Phi is continuous and strictly decreasing in epsilon for 0 < k < N,
  // from 1 at 0 down to 0 at 1; bisect for the crossing.
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    if (binom_cdf(mid, helly, n2) <= target)
      hi = mid;
    else
      lo = mid;
  }

  RcpBound bound;
  bound.epsilon = hi;
  bound.confidence = confidence;
  bound.n2 = n2;
  bound.helly = helly;
  return bound;
}

PostBloatThresholds post_bloat(const NetworkParams& scorer, const Dataset& calibration,
                               double gamma1) {
  if (calibration.samples.empty()) throw ContractError("post_bloat: empty calibration set");
  const std::size_t m = static_cast<std::size_t>(calibration.basis_size);

  PostBloatThresholds out;
  out.c.assign(m, gamma1);
  out.positive_counts.assign(m, 0);
  std::vector<bool> seen(m, false);
  for (const LabeledSample& s : calibration.samples) {
    const auto y = forward(scorer, s.affordance);
    for (std::size_t i = 0; i < m; ++i) {
      if (s.flags[i] != Flag::kPositive) continue;
      ++out.positive_counts[i];
      if (!seen[i] || y[i] < out.c[i]) out.c[i] = y[i];
      seen[i] = true;
    }
  }
  for (std::size_t i = 0; i < m; ++i)
    if (!seen[i]) out.defaulted.push_back(static_cast<int>(i));
  return out;
}

double conformal_range(std::vector<double> residuals, double epsilon) {
  if (epsilon <= 0.0 || epsilon >= 1.0)
    throw ContractError("conformal_range: epsilon must lie in (0, 1)");
  if (residuals.empty()) throw ContractError("conformal_range: no residuals");
  const std::size_t n = residuals.size();
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil((static_cast<double>(n) + 1.0) * (1.0 - epsilon)));
  if (rank > n)
    throw InfeasibleError("conformal_range: rank " + std::to_string(rank) + " exceeds " +
                          std::to_string(n) + " residuals; epsilon too small");
  std::nth_element(residuals.begin(), residuals.begin() + static_cast<long>(rank - 1),
                   residuals.end());
  return residuals[rank - 1];
}

ConformalCalibration conformal_calibrate(const NetworkParams& scorer,
                                         const Dataset& calibration, double epsilon) {
  if (calibration.samples.empty())
    throw ContractError("conformal_calibrate: empty calibration set");
  const std::size_t m = static_cast<std::size_t>(calibration.basis_size);
  const std::size_t n = calibration.samples.size();

  std::vector<std::vector<double>> residuals(m);
  for (auto& r : residuals) r.reserve(n);
  std::vector<long> positives(m, 0);
  for (const LabeledSample& s : calibration.samples) {
    const auto y = forward(scorer, s.affordance);
    for (std::size_t i = 0; i < m; ++i) {
      const double target = (s.flags[i] == Flag::kPositive) ? 1.0 : 0.0;
      residuals[i].push_back(std::abs(target - y[i]));
      if (s.flags[i] == Flag::kPositive) ++positives[i];
    }
  }

  ConformalCalibration cal;
  cal.epsilon = epsilon;
  cal.n_calibration = n;
  cal.d.resize(m);
  cal.class_fractions.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    cal.d[i] = conformal_range(residuals[i], epsilon);
    cal.class_fractions[i] = static_cast<double>(positives[i]) / static_cast<double>(n);
    cal.weighted_d += cal.class_fractions[i] * cal.d[i];
  }
  return cal;
}

std::vector<double> conformal_thresholds(const ConformalCalibration& cal) {
  std::vector<double> t(cal.d.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 1.0 - cal.d[i];
  return t;
}

double evaluate_fnr(const NetworkParams& scorer, std::span<const double> thresholds,
                    const Dataset& heldout) {
  if (heldout.samples.empty()) throw ContractError("evaluate_fnr: empty dataset");
  long misses = 0;
  for (const LabeledSample& s : heldout.samples) {
    const auto y = forward(scorer, s.affordance);
    for (std::size_t i = 0; i < s.flags.size(); ++i) {
      if (s.flags[i] == Flag::kPositive && y[i] < thresholds[i]) {
        ++misses;
        break;
      }
    }
  }
  return static_cast<double>(misses) / static_cast<double>(heldout.samples.size());
}

}  // namespace covplan
