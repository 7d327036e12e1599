#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "covplan/predictor.hpp"

namespace covplan {

// Binomial CDF Phi(epsilon, k, N) = sum_{j=0..k} C(N,j) eps^j (1-eps)^(N-j),
// computed in log space with compensated summation. Absolute error below
// 1e-12 for N up to 1e6.
double binom_cdf(double epsilon, long k, long n);

// Certified false-negative bound: the miscoverage level epsilon together
// with the confidence it holds at, for a calibration set of size n2.
struct RcpBound {
  double epsilon = 0.0;
  double confidence = 0.0;
  long n2 = 0;
  long helly = 0;  // M + 1
};

// Smallest epsilon with Phi(epsilon, M+1, n2) <= 1 - confidence, bisected to
// 1e-7 absolute. Throws InfeasibleError when n2 <= M+1.
RcpBound rcp_epsilon(double confidence, int basis_size, long n2);

// Per-basis score floors taken over the calibration positives.
struct PostBloatThresholds {
  std::vector<double> c;
  std::vector<long> positive_counts;
  std::vector<int> defaulted;  // base indices that had no positives
};

// c_i = min over calibration positives of [f(x)]_i; bases with no positives
// fall back to gamma1 (recorded in `defaulted`). Throws on an empty set.
PostBloatThresholds post_bloat(const NetworkParams& scorer, const Dataset& calibration,
                               double gamma1);

struct ConformalCalibration {
  std::vector<double> d;                // per-basis confidence range
  double epsilon = 0.0;                 // target miscoverage
  std::size_t n_calibration = 0;        // |I2|
  std::vector<double> class_fractions;  // p_i = share of positives per base
  double weighted_d = 0.0;              // sum p_i d_i
};

// The ceil((n+1)(1-epsilon))-th smallest residual. Throws InfeasibleError
// when the rank exceeds the residual count.
double conformal_range(std::vector<double> residuals, double epsilon);

// Split-conformal ranges per output coordinate with binary targets
// (1 for the positive base, 0 otherwise).
ConformalCalibration conformal_calibrate(const NetworkParams& scorer,
                                         const Dataset& calibration, double epsilon);

// Base i is possible iff 1 lies in [f(x)_i - d_i, f(x)_i + d_i], i.e.
// f(x)_i >= 1 - d_i; expressed as thresholds for predict_set.
std::vector<double> conformal_thresholds(const ConformalCalibration& cal);

// Fraction of samples whose positive base is excluded from the predicted
// set (any missed positive coordinate counts the sample once).
double evaluate_fnr(const NetworkParams& scorer, std::span<const double> thresholds,
                    const Dataset& heldout);

// Scorer plus thresholds plus the certified guarantee, as consumed by the
// simulator and the CLI. The (epsilon, confidence, n2) triple is a property
// of the calibration draw, not a per-scene probability.
struct CalibratedPredictor {
  NetworkParams net;
  std::vector<double> thresholds;
  std::string method;  // "post_bloat" | "conformal"
  double epsilon_bound = 0.0;
  double confidence = 0.0;
  long n_calibration = 0;
};

}  // namespace covplan
