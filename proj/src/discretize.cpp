#include "kmax/discretize.hpp"

#include <algorithm>
#include <cmath>

namespace kmax {

namespace {

constexpr double kRowSumTol = 1e-12;

void require_mode(const ProbGrid& g, GridMode mode, const char* who) {
  if (g.mode != mode)
    throw std::invalid_argument(std::string(who) + ": grid has the wrong mode");
}

}  // namespace

BinGrid BinGrid::from_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 0.5))
    throw std::invalid_argument("BinGrid: epsilon must lie in (0, 1/2]");
  double ratio = 1.0 / epsilon;
  double nearest = std::round(ratio);
  int m;
  if (std::abs(ratio - nearest) < 1e-9) {
    m = static_cast<int>(nearest) + 1;  // keep M * eps > 1 strict
  } else {
    m = static_cast<int>(std::ceil(ratio));
  }
  BinGrid grid;
  grid.epsilon = epsilon;
  grid.m = m;
  grid.values.resize(m);
  for (int b = 0; b < m; ++b) grid.values[b] = b * epsilon;
  return grid;
}

int bin_of(double r, const BinGrid& grid) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("bin_of: r outside [0,1]");
  auto it = std::upper_bound(grid.values.begin(), grid.values.end(), r);
  int b = static_cast<int>(it - grid.values.begin()) - 1;
  return std::clamp(b, 0, grid.m - 1);
}

ProbGrid make_prob_grid(GridMode mode, const BinGrid& grid, Table<double> entries) {
  if (entries.cols() != grid.m)
    throw std::invalid_argument("make_prob_grid: entries and grid disagree on bin count");
  ProbGrid g{mode, grid, std::move(entries)};
  validate_grid(g);
  return g;
}

void validate_grid(const ProbGrid& grid) {
  const int n = grid.arms(), m = grid.bins();
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int b = 0; b < m; ++b) {
      double v = grid.at(i, b);
      if (!(v >= -kRowSumTol && v <= 1.0 + kRowSumTol))
        throw std::invalid_argument("ProbGrid: entry outside [0,1]");
      row_sum += v;
    }
    if (grid.mode == GridMode::P && std::abs(row_sum - 1.0) > kRowSumTol)
      throw std::invalid_argument("ProbGrid: P-mode row does not sum to 1");
  }
}

ProbGrid cdf_to_p(const std::vector<ContinuousArm>& arms, const BinGrid& grid) {
  const int n = static_cast<int>(arms.size()), m = grid.m;
  Table<double> entries(n, m);
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int b = 0; b < m; ++b) {
      double left = std::min(grid.values[b], 1.0);
      double right = (b + 1 < m) ? std::min(grid.values[b + 1], 1.0) : 1.0;
      double mass = arms[i].cdf(right) - arms[i].cdf(left);
      entries.at(i, b) = std::max(mass, 0.0);
      row_sum += entries.at(i, b);
    }
    if (std::abs(row_sum - 1.0) > kRowSumTol)
      throw std::invalid_argument("cdf_to_p: CDF does not span [0,1] (row mass != 1)");
    for (int b = 0; b < m; ++b) entries.at(i, b) /= row_sum;
  }
  return ProbGrid{GridMode::P, grid, std::move(entries)};
}

ProbGrid p_to_q(const ProbGrid& p) {
  require_mode(p, GridMode::P, "p_to_q");
  const int n = p.arms(), m = p.bins();
  Table<double> q(n, m);
  for (int i = 0; i < n; ++i) {
    double prefix = 0.0;
    for (int b = 0; b < m; ++b) {
      prefix += p.at(i, b);
      if (prefix > 0.0) {
        q.at(i, b) = std::min(p.at(i, b) / prefix, 1.0);
      } else {
        q.at(i, b) = (b == 0) ? 1.0 : 0.0;  // zero-denominator convention
      }
    }
  }
  return ProbGrid{GridMode::Q, p.grid, std::move(q)};
}

ProbGrid q_to_p(const ProbGrid& q) {
  require_mode(q, GridMode::Q, "q_to_p");
  const int n = q.arms(), m = q.bins();
  Table<double> p(n, m);
  for (int i = 0; i < n; ++i) {
    double tail = 1.0;  // prod over bins above the current one of (1 - q)
    double row_sum = 0.0;
    for (int b = m - 1; b >= 0; --b) {
      p.at(i, b) = q.at(i, b) * tail;
      row_sum += p.at(i, b);
      tail *= 1.0 - q.at(i, b);
    }
    if (row_sum < 1.0) p.at(i, 0) += 1.0 - row_sum;  // deficit carries value 0
  }
  return ProbGrid{GridMode::P, q.grid, std::move(p)};
}

double discrete_reward(const ActionSet& s, const ProbGrid& p) {
  require_mode(p, GridMode::P, "discrete_reward");
  require_valid_action(s, p.arms());
  const int m = p.bins();
  std::vector<double> prefix(s.size(), 0.0);
  double reward = 0.0, g_prev = 0.0;
  for (int b = 0; b < m; ++b) {
    double g = 1.0;
    for (std::size_t idx = 0; idx < s.size(); ++idx) {
      prefix[idx] += p.at(s[idx], b);
      g *= std::min(prefix[idx], 1.0);
    }
    reward += p.grid.values[b] * (g - g_prev);
    g_prev = g;
  }
  return reward;
}

double binary_reward(const ActionSet& s, const ProbGrid& q) {
  require_mode(q, GridMode::Q, "binary_reward");
  require_valid_action(s, q.arms());
  const int m = q.bins();
  // Q_b = prod_{k in s, b' > b} (1 - q[k][b']), accumulated from the top;
  // stored shifted by one so that q_of_bin[0] holds Q_{-1} (all arms zero).
  std::vector<double> q_of_bin(m + 1);
  double tail = 1.0;
  for (int b = m - 1; b >= 0; --b) {
    q_of_bin[b + 1] = tail;
    double factor = 1.0;
    for (int k : s) factor *= 1.0 - q.at(k, b);
    tail *= factor;
  }
  q_of_bin[0] = tail;  // probability that every binary arm stays at zero
  double reward = 0.0;
  for (int b = 0; b < m; ++b) reward += q.grid.values[b] * (q_of_bin[b + 1] - q_of_bin[b]);
  return reward;
}

double binary_reward_bruteforce(const ActionSet& s, const ProbGrid& q) {
  require_mode(q, GridMode::Q, "binary_reward_bruteforce");
  require_valid_action(s, q.arms());
  const int m = q.bins();
  const int cells = static_cast<int>(s.size()) * m;
  if (cells > 20)
    throw CapacityError("binary_reward_bruteforce: K*M > 20 (2^(K*M) enumeration too large)");
  double expectation = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << cells); ++mask) {
    double prob = 1.0, best = 0.0;
    int cell = 0;
    for (int k : s) {
      for (int b = 0; b < m; ++b, ++cell) {
        double qv = q.at(k, b);
        if (mask & (1u << cell)) {
          prob *= qv;
          best = std::max(best, q.grid.values[b]);
        } else {
          prob *= 1.0 - qv;
        }
      }
    }
    expectation += prob * best;
  }
  return expectation;
}

}  // namespace kmax
