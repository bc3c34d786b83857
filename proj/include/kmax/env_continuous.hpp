#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kmax/common.hpp"

// Continuous K-Max environments: arms with bi-Lipschitz CDFs on [0,1],
// inverse-CDF sampling, value-index feedback, and two ground-truth oracles
// for the expected maximum of a subset (quadrature and Monte Carlo).

namespace kmax {

// One arm's outcome law on [0,1]. The CDF must satisfy
//   (u - v) / L <= F(u) - F(v) <= L * (u - v)   for 0 <= v < u <= 1,
// with L = lipschitz_upper; equivalently the density stays in [1/L, L].
struct ContinuousArm {
  std::function<double(double)> cdf;
  std::function<double(double)> inverse_cdf;
  double lipschitz_upper = 1.0;
  int label = 0;
};

struct ContinuousEnv {
  std::vector<ContinuousArm> arms;
  int k = 1;
  std::uint64_t rng_seed = 0;
};

// Feedback after playing a set: the maximum outcome and the winning arm.
// `bin` is filled later by the discretization layer (-1 = not assigned).
struct ValueIndexFeedback {
  double reward = 0.0;
  int winner = -1;
  int bin = -1;
};

// Advisory validation report for user-supplied arms (builtins are validated
// at construction and throw instead).
struct ArmValidation {
  bool ok = true;
  std::vector<std::string> issues;
  // Worst observed envelope ratios on the check grid; both should be <= 1.
  double worst_upper_ratio = 0.0;  // max of (F(u)-F(v)) / (L * (u-v))
  double worst_lower_ratio = 0.0;  // max of ((u-v)/L) / (F(u)-F(v))
};

// Checks cdf(0)=0, cdf(1)=1, monotonicity, the bi-Lipschitz envelope on a
// grid of `grid_points` points, and inverse_cdf(cdf(x)) round-trips.
ArmValidation validate_arm(const ContinuousArm& arm, int grid_points = 1000);

// One outcome per arm of s (in sorted order), each via the inverse-CDF
// transform of an independent uniform draw from rng.
std::vector<double> sample_outcomes(const ContinuousEnv& env, const ActionSet& s, Rng& rng);

// reward = max(outcomes), winner = arm attaining it; ties go to the lowest
// arm index (measure-zero under continuous laws, fixed for determinism).
ValueIndexFeedback value_index_feedback(const std::vector<double>& outcomes, const ActionSet& s);

// r*(S) = E[max_{i in S} X_i] = integral_0^1 (1 - prod_i F_i(x)) dx by
// composite Simpson quadrature. quad_points is the node count (rounded up
// to the next odd number >= 3); absolute error is below 1e-8 at 1e4 nodes
// for Lipschitz integrands.
double expected_max_exact(const std::vector<ContinuousArm>& arms, const ActionSet& s,
                          int quad_points);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

// Plain Monte Carlo mean of the max over n_samples outcome vectors.
McEstimate expected_max_mc(const ContinuousEnv& env, const ActionSet& s,
                           std::int64_t n_samples, Rng& rng);

// Builtin arms. Each returns an arm with an analytic CDF, a bisection
// inverse (|inverse_cdf(u) - F^{-1}(u)| <= 1e-12) and a certified
// lipschitz_upper = max(sup density, 1 / inf density) over [0,1].
// Parameters whose density vanishes (or blows up) somewhere in [0,1]
// violate the bi-Lipschitz assumption and throw std::invalid_argument.
ContinuousArm truncated_gaussian_arm(double mu, double sigma, int label = 0);
ContinuousArm uniform_mixture_arm(const std::vector<double>& weights,
                                  const std::vector<std::pair<double, double>>& intervals,
                                  int label = 0);
ContinuousArm beta_arm(double a, double b, int label = 0);

}  // namespace kmax
