#pragma once

#include <vector>

#include "kmax/common.hpp"
#include "kmax/env_continuous.hpp"

// Continuous-to-discrete conversion machinery. A BinGrid splits [0,1] into
// M half-open bins of width epsilon; each bin is represented by its left
// endpoint. Discrete arms are described either by per-bin probabilities
// (P-mode) or by the equivalent conditional "binary arm" probabilities
// (Q-mode):
//
//   q[i][b] = p[i][b] / sum_{b' <= b} p[i][b'],
//   p[i][b] = q[i][b] * prod_{b' > b} (1 - q[i][b']).
//
// Bins are 0-based throughout: bin b covers [b*eps, (b+1)*eps) with value
// b*eps. Formulas whose denominators rank bins from one (the confidence
// bias term) use (b + 1).

namespace kmax {

struct BinGrid {
  double epsilon = 0.5;
  int m = 0;                   // number of bins
  std::vector<double> values;  // values[b] = b * epsilon, strictly increasing

  // M = ceil(1/eps), bumped by one when 1/eps is an integer so that
  // M * eps > 1 holds strictly and the top bin is half-open past 1.
  static BinGrid from_epsilon(double epsilon);
};

// 0-based index of the bin containing r, i.e. the largest b with
// values[b] <= r; r = 1 lands in the top bin. Requires r in [0,1].
int bin_of(double r, const BinGrid& grid);

enum class GridMode { P, Q };

struct ProbGrid {
  GridMode mode = GridMode::P;
  BinGrid grid;
  Table<double> entries;  // arms x bins

  int arms() const { return entries.rows(); }
  int bins() const { return entries.cols(); }
  double at(int i, int b) const { return entries.at(i, b); }
  double& at(int i, int b) { return entries.at(i, b); }
};

ProbGrid make_prob_grid(GridMode mode, const BinGrid& grid, Table<double> entries);

// Throws std::invalid_argument when grid invariants fail: P-mode rows must
// sum to 1 within 1e-12, Q-mode entries must lie in [0,1].
void validate_grid(const ProbGrid& grid);

// P-mode grid of  p[i][b] = F_i(right edge of bin b, capped at 1) - F_i(b*eps).
// Rows are renormalized to sum exactly to 1; a row off by more than 1e-12
// (broken CDF endpoints) throws.
ProbGrid cdf_to_p(const std::vector<ContinuousArm>& arms, const BinGrid& grid);

// P -> Q. Rows with a zero prefix sum at bin b get the convention value
// q = 1 at b = 0 and q = 0 elsewhere; reconstruction is unaffected.
ProbGrid p_to_q(const ProbGrid& p);

// Q -> P. If a row reconstructs to total mass s < 1 (possible when
// q[i][0] < 1, as optimistic estimates produce), the deficit 1 - s is
// assigned to bin 0, whose value is 0, so rewards are unchanged.
ProbGrid q_to_p(const ProbGrid& q);

// Expected maximum of the discrete arms in s under a P-mode grid:
//   sum_b v[b] * (G_b - G_{b-1}),  G_b = prod_{i in s} sum_{b' <= b} p[i][b'].
// O(K*M) time.
double discrete_reward(const ActionSet& s, const ProbGrid& p);

// Same expectation through the binary-arm parameterization:
//   sum_b v[b] * (Q_b - Q_{b-1}),  Q_b = prod_{i in s, b' > b} (1 - q[i][b']).
// Equals discrete_reward on the converted grid.
double binary_reward(const ActionSet& s, const ProbGrid& q);

// Independent oracle: enumerates all 2^(K*M) joint realizations of the
// binary arms. Requires K*M <= 20 (throws CapacityError above that).
double binary_reward_bruteforce(const ActionSet& s, const ProbGrid& q);

}  // namespace kmax
