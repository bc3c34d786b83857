#pragma once

#include <span>
#include <utility>

#include "kmax/common.hpp"
#include "kmax/discretize.hpp"
#include "kmax/oracle.hpp"

// DCK-UCB: discretized continuous K-Max bandits with upper confidence
// bonuses. Per round:
//
//   q_bar[i][b] = min(q_hat[i][b] + bonus[i][b] + (K-1) * L^4 / (b+1)^2, 1)
//
// is converted to a P-mode grid and handed to the offline oracle; the
// value-index feedback (winner i_t, bin b_t) then updates two counters,
//
//   c[i][b]  += 1  iff i == i_t and b == b_t,
//   sc[i][b] += 1  iff i in S_t and b >= b_t,
//
// and the estimator q_hat = c / sc. The estimator is biased (the winner
// under-counts bin hits shared with other selected arms); the (K-1)L^4
// term compensates for that bias.

namespace kmax {

struct CounterState {
  Table<std::int64_t> c;   // winner hits
  Table<std::int64_t> sc;  // rounds with i selected and bin >= feedback bin
  std::int64_t t = 0;      // completed rounds
};

enum class BonusLogArg {
  NMT,  // log(N*M*T): constant over rounds, matches the concentration proof
  NMt,  // log(N*M*t): the main-text radius
};

struct DckConfig {
  double epsilon = 0.1;
  double lipschitz = 1.0;  // the L the bias term is computed with
  std::int64_t horizon = 1;
  int n = 1;
  int k = 1;
  OracleChoice oracle_choice = OracleChoice::exact;
  BonusLogArg bonus_log_arg = BonusLogArg::NMT;
  double enumeration_cap = 1e6;
};

// Granularity from the theory's tuning, clamped to [1e-3, 0.5]:
//   c0 * L^-2 * K^(-3/4) * N^(1/4) * T^(-1/4).
double default_epsilon(int n, int k, double lipschitz, std::int64_t horizon, double c0 = 1.0);

struct DckState {
  CounterState counters;
  BinGrid grid;
  Table<double> q_hat;
  ActionSet last_action;

  static DckState init(const DckConfig& config);
};

// sqrt(8 * log(N*M*A) / sc[i][b]) with A = T or the current round t per
// config; +infinity while sc[i][b] == 0 (forces q_bar = 1, the same
// optimistic initialization the algorithm starts from).
double bonus(const DckState& state, const DckConfig& config, int i, int b);

double bias_term(const DckConfig& config, int b);

// The optimistic Q-mode grid q_bar.
ProbGrid optimistic_grid(const DckState& state, const DckConfig& config);

// q_bar -> p_bar -> oracle. Records and returns the chosen subset.
ActionSet select_action(DckState& state, const DckConfig& config);

// Applies one round of feedback (requires fb.winner in s and fb.bin set).
void update(DckState& state, const ActionSet& s, const ValueIndexFeedback& fb);

// State as seen at the start of a round: q_hat and sc reflect all previous
// rounds, t is the 1-based index of the round about to be played.
struct DckSnapshot {
  Table<double> q_hat;
  Table<std::int64_t> sc;
  std::int64_t t = 1;
};

DckSnapshot snapshot(const DckState& state);

// Fraction of (t, i, b) triples with sc > 0 violating the concentration
// bound |q_hat - q_star| <= bonus + (K-1) L^4 / (b+1)^2.
double lemma4_violation_rate(std::span<const DckSnapshot> trace, const ProbGrid& q_star,
                             const DckConfig& config);

// Violations and population counted by one snapshot (building block of the
// rate above; usable as a streaming accumulator over long runs).
std::pair<std::int64_t, std::int64_t> lemma4_violations(const DckSnapshot& snap,
                                                        const ProbGrid& q_star,
                                                        const DckConfig& config);

// The two terms of the per-round estimation-error decomposition,
//   Bonus_t = 4 * sum_{i in s, b} Q*_b(s) * v[b] * beta[i][b],
//   Bias_t  = 4 * sum_{i in s, b} Q*_b(s) * v[b] * bias_coeff / (b+1)^2,
// where Q*_b(s) = prod_{k in s, b' > b} (1 - q_star[k][b']).
std::pair<double, double> decomposition_terms(const ProbGrid& q_star, const ActionSet& s,
                                              const Table<double>& beta, double bias_coeff);

// Bonus_t and Bias_t for the current state (simulation-only; needs the true
// q_star). Entries with sc = 0 carry an infinite bonus; terms multiplied by
// a zero weight are dropped, so a finite value is returned whenever every
// positively-weighted cell has been observed.
std::pair<double, double> bonus_bias_diagnostics(const DckState& state, const ActionSet& s,
                                                 const ProbGrid& q_star,
                                                 const DckConfig& config);

}  // namespace kmax
