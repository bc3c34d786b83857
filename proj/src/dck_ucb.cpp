#include "kmax/dck_ucb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kmax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_shapes(const DckState& state, const DckConfig& config) {
  if (state.q_hat.rows() != config.n || state.q_hat.cols() != state.grid.m)
    throw std::invalid_argument("dck_ucb: state and config disagree on N or M");
}

double bonus_from_sc(std::int64_t sc, std::int64_t log_arg_rounds, int n, int m) {
  if (sc <= 0) return kInf;
  double log_arg = static_cast<double>(n) * m * static_cast<double>(log_arg_rounds);
  return std::sqrt(8.0 * std::log(log_arg) / static_cast<double>(sc));
}

}  // namespace

double default_epsilon(int n, int k, double lipschitz, std::int64_t horizon, double c0) {
  if (n < 1 || k < 1 || !(lipschitz > 0.0) || horizon < 1 || !(c0 > 0.0))
    throw std::invalid_argument("default_epsilon: all arguments must be positive");
  double eps = c0 * std::pow(lipschitz, -2.0) * std::pow(static_cast<double>(k), -0.75) *
               std::pow(static_cast<double>(n), 0.25) *
               std::pow(static_cast<double>(horizon), -0.25);
  return std::clamp(eps, 1e-3, 0.5);
}

DckState DckState::init(const DckConfig& config) {
  if (config.n < 1 || config.k < 1 || config.k > config.n)
    throw std::invalid_argument("DckState: need 1 <= K <= N");
  if (!(config.lipschitz >= 1.0)) throw std::invalid_argument("DckState: lipschitz must be >= 1");
  if (config.horizon < 1) throw std::invalid_argument("DckState: horizon must be >= 1");
  DckState state;
  state.grid = BinGrid::from_epsilon(config.epsilon);
  const int m = state.grid.m;
  state.counters.c = Table<std::int64_t>(config.n, m, 0);
  state.counters.sc = Table<std::int64_t>(config.n, m, 0);
  state.counters.t = 0;
  state.q_hat = Table<double>(config.n, m, 0.0);
  for (int i = 0; i < config.n; ++i) state.q_hat.at(i, 0) = 1.0;
  return state;
}

double bonus(const DckState& state, const DckConfig& config, int i, int b) {
  require_shapes(state, config);
  std::int64_t rounds = config.bonus_log_arg == BonusLogArg::NMT
                            ? config.horizon
                            : std::max<std::int64_t>(state.counters.t + 1, 1);
  return bonus_from_sc(state.counters.sc.at(i, b), rounds, config.n, state.grid.m);
}

double bias_term(const DckConfig& config, int b) {
  double l4 = std::pow(config.lipschitz, 4.0);
  double rank = static_cast<double>(b) + 1.0;
  return (config.k - 1) * l4 / (rank * rank);
}

ProbGrid optimistic_grid(const DckState& state, const DckConfig& config) {
  require_shapes(state, config);
  const int n = config.n, m = state.grid.m;
  Table<double> q_bar(n, m);
  for (int i = 0; i < n; ++i) {
    for (int b = 0; b < m; ++b) {
      double value = state.q_hat.at(i, b) + bonus(state, config, i, b) + bias_term(config, b);
      q_bar.at(i, b) = std::min(value, 1.0);
    }
  }
  return ProbGrid{GridMode::Q, state.grid, std::move(q_bar)};
}

ActionSet select_action(DckState& state, const DckConfig& config) {
  ProbGrid p_bar = q_to_p(optimistic_grid(state, config));
  OracleResult result = run_oracle(config.oracle_choice, p_bar, config.k, config.enumeration_cap);
  state.last_action = result.subset;
  return result.subset;
}

void update(DckState& state, const ActionSet& s, const ValueIndexFeedback& fb) {
  require_valid_action(s, state.q_hat.rows());
  if (!std::binary_search(s.begin(), s.end(), fb.winner))
    throw std::invalid_argument("dck update: feedback winner not in the played set");
  const int m = state.grid.m;
  if (fb.bin < 0 || fb.bin >= m)
    throw std::invalid_argument("dck update: feedback bin not assigned");

  state.counters.c.at(fb.winner, fb.bin) += 1;
  for (int i : s)
    for (int b = fb.bin; b < m; ++b) state.counters.sc.at(i, b) += 1;
  state.counters.t += 1;

  for (int i : s) {
    for (int b = 0; b < m; ++b) {
      std::int64_t sc = state.counters.sc.at(i, b);
      if (sc > 0)
        state.q_hat.at(i, b) =
            static_cast<double>(state.counters.c.at(i, b)) / static_cast<double>(sc);
    }
  }
}

DckSnapshot snapshot(const DckState& state) {
  return DckSnapshot{state.q_hat, state.counters.sc, state.counters.t + 1};
}

std::pair<std::int64_t, std::int64_t> lemma4_violations(const DckSnapshot& snap,
                                                        const ProbGrid& q_star,
                                                        const DckConfig& config) {
  if (snap.q_hat.rows() != q_star.arms() || snap.q_hat.cols() != q_star.bins())
    throw std::invalid_argument("lemma4_violations: shape mismatch with q_star");
  std::int64_t rounds = config.bonus_log_arg == BonusLogArg::NMT
                            ? config.horizon
                            : std::max<std::int64_t>(snap.t, 1);
  std::int64_t violations = 0, population = 0;
  const int n = snap.q_hat.rows(), m = snap.q_hat.cols();
  for (int i = 0; i < n; ++i) {
    for (int b = 0; b < m; ++b) {
      std::int64_t sc = snap.sc.at(i, b);
      if (sc <= 0) continue;
      ++population;
      double radius = bonus_from_sc(sc, rounds, n, m) + bias_term(config, b);
      if (std::abs(snap.q_hat.at(i, b) - q_star.at(i, b)) > radius) ++violations;
    }
  }
  return {violations, population};
}

double lemma4_violation_rate(std::span<const DckSnapshot> trace, const ProbGrid& q_star,
                             const DckConfig& config) {
  std::int64_t violations = 0, population = 0;
  for (const DckSnapshot& snap : trace) {
    auto [v, p] = lemma4_violations(snap, q_star, config);
    violations += v;
    population += p;
  }
  return population == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(population);
}

std::pair<double, double> decomposition_terms(const ProbGrid& q_star, const ActionSet& s,
                                              const Table<double>& beta, double bias_coeff) {
  require_valid_action(s, q_star.arms());
  if (beta.rows() != q_star.arms() || beta.cols() != q_star.bins())
    throw std::invalid_argument("decomposition_terms: beta and q_star shapes differ");
  const int m = q_star.bins();
  // Q*_b for the played set, from the top down (same recurrence as
  // binary_reward).
  std::vector<double> q_of_bin(m);
  double tail = 1.0;
  for (int b = m - 1; b >= 0; --b) {
    q_of_bin[b] = tail;
    double factor = 1.0;
    for (int k : s) factor *= 1.0 - q_star.at(k, b);
    tail *= factor;
  }
  double bonus_sum = 0.0, bias_sum = 0.0;
  for (int i : s) {
    for (int b = 0; b < m; ++b) {
      double weight = q_of_bin[b] * q_star.grid.values[b];
      if (weight == 0.0) continue;  // keeps 0 * inf out of the sums
      double rank = static_cast<double>(b) + 1.0;
      bonus_sum += weight * beta.at(i, b);
      bias_sum += weight * bias_coeff / (rank * rank);
    }
  }
  return {4.0 * bonus_sum, 4.0 * bias_sum};
}

std::pair<double, double> bonus_bias_diagnostics(const DckState& state, const ActionSet& s,
                                                 const ProbGrid& q_star,
                                                 const DckConfig& config) {
  require_shapes(state, config);
  Table<double> beta(config.n, state.grid.m);
  for (int i = 0; i < config.n; ++i)
    for (int b = 0; b < state.grid.m; ++b) beta.at(i, b) = bonus(state, config, i, b);
  double l4 = std::pow(config.lipschitz, 4.0);
  return decomposition_terms(q_star, s, beta, (config.k - 1) * l4);
}

}  // namespace kmax
