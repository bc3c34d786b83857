#include <doctest.h>

#include <cmath>

#include "kmax/discretize.hpp"

using namespace kmax;

namespace {

BinGrid grid_m2() {  // two bins of width 1/2, for conversion-only examples
  return BinGrid{0.5, 2, {0.0, 0.5}};
}

ProbGrid p_grid(const BinGrid& grid, std::vector<std::vector<double>> rows) {
  Table<double> entries(static_cast<int>(rows.size()), grid.m);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int b = 0; b < grid.m; ++b) entries.at(static_cast<int>(i), b) = rows[i][b];
  return ProbGrid{GridMode::P, grid, std::move(entries)};
}

ProbGrid q_grid(const BinGrid& grid, std::vector<std::vector<double>> rows) {
  Table<double> entries(static_cast<int>(rows.size()), grid.m);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int b = 0; b < grid.m; ++b) entries.at(static_cast<int>(i), b) = rows[i][b];
  return ProbGrid{GridMode::Q, grid, std::move(entries)};
}

ProbGrid random_p(Rng& rng, int n, const BinGrid& grid) {
  Table<double> entries(n, grid.m);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int b = 0; b < grid.m; ++b) {
      entries.at(i, b) = -std::log(rng.uniform_open01());
      sum += entries.at(i, b);
    }
    for (int b = 0; b < grid.m; ++b) entries.at(i, b) /= sum;
  }
  return ProbGrid{GridMode::P, grid, std::move(entries)};
}

}  // namespace

TEST_SUITE_BEGIN("discretize");

TEST_CASE("bin count: integer 1/eps gains an extra top bin") {
  CHECK(BinGrid::from_epsilon(0.25).m == 5);  // ceil(1/0.25) = 4 would give M*eps = 1
  CHECK(BinGrid::from_epsilon(0.5).m == 3);
  CHECK(BinGrid::from_epsilon(0.1).m == 11);
  CHECK(BinGrid::from_epsilon(0.3).m == 4);  // ceil(10/3) = 4, 1.2 > 1 already
  BinGrid grid = BinGrid::from_epsilon(0.25);
  CHECK(grid.m * grid.epsilon > 1.0);
  CHECK(grid.values.front() == 0.0);
  for (int b = 1; b < grid.m; ++b) CHECK(grid.values[b] > grid.values[b - 1]);
}

TEST_CASE("epsilon outside (0, 1/2] is rejected") {
  CHECK_THROWS_AS(BinGrid::from_epsilon(0.6), std::invalid_argument);
  CHECK_THROWS_AS(BinGrid::from_epsilon(0.0), std::invalid_argument);
}

TEST_CASE("bin_of maps values to half-open bins") {
  BinGrid grid = BinGrid::from_epsilon(0.25);
  CHECK(bin_of(0.3, grid) == 1);           // [0.25, 0.5), second bin
  CHECK(bin_of(0.0, grid) == 0);           // left endpoint
  CHECK(bin_of(1.0, grid) == grid.m - 1);  // r = 1 lands in the top bin
  CHECK(bin_of(0.25, grid) == 1);          // left-closed boundary
  CHECK_THROWS_AS(bin_of(-0.1, grid), std::invalid_argument);
  CHECK_THROWS_AS(bin_of(1.1, grid), std::invalid_argument);
}

TEST_CASE("cdf_to_p of a uniform arm spreads mass evenly; extra top bin is empty") {
  ContinuousArm uniform = uniform_mixture_arm({1.0}, {{0.0, 1.0}});
  ProbGrid p = cdf_to_p({uniform}, BinGrid::from_epsilon(0.25));
  for (int b = 0; b < 4; ++b) CHECK(p.at(0, b) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p.at(0, 4) == doctest::Approx(0.0));

  ProbGrid p_half = cdf_to_p({uniform}, BinGrid::from_epsilon(0.5));
  CHECK(p_half.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p_half.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p_half.at(0, 2) == doctest::Approx(0.0));
}

TEST_CASE("cdf_to_p matches a sampling histogram for a truncated gaussian") {
  ContinuousArm arm = truncated_gaussian_arm(0.55, 0.3);
  BinGrid grid = BinGrid::from_epsilon(0.1);
  ProbGrid p = cdf_to_p({arm}, grid);
  const int n = 200000;
  std::vector<std::int64_t> counts(grid.m, 0);
  Rng rng(42);
  for (int i = 0; i < n; ++i) counts[bin_of(arm.inverse_cdf(rng.uniform01()), grid)]++;
  for (int b = 0; b < grid.m; ++b) {
    double expected = p.at(0, b);
    double se = std::sqrt(std::max(expected * (1 - expected), 1e-12) / n);
    CHECK(std::abs(counts[b] / static_cast<double>(n) - expected) <= 3.5 * se);
  }
}

TEST_CASE("p_to_q hand example") {
  BinGrid grid{0.35, 3, {0.0, 0.35, 0.7}};
  ProbGrid q = p_to_q(p_grid(grid, {{0.2, 0.3, 0.5}}));
  CHECK(q.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(q.at(0, 1) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(q.at(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("p_to_q with all mass in the first bin") {
  BinGrid grid{0.35, 3, {0.0, 0.35, 0.7}};
  ProbGrid q = p_to_q(p_grid(grid, {{1.0, 0.0, 0.0}}));
  CHECK(q.at(0, 0) == 1.0);
  CHECK(q.at(0, 1) == 0.0);
  CHECK(q.at(0, 2) == 0.0);
}

TEST_CASE("p_to_q zero-denominator convention") {
  ProbGrid q = p_to_q(p_grid(grid_m2(), {{0.0, 1.0}}));
  CHECK(q.at(0, 0) == 1.0);  // convention value, reconstruction unaffected
  CHECK(q.at(0, 1) == 1.0);
}

TEST_CASE("q_to_p inverts the hand example") {
  BinGrid grid{0.35, 3, {0.0, 0.35, 0.7}};
  ProbGrid p = q_to_p(q_grid(grid, {{1.0, 0.6, 0.5}}));
  CHECK(p.at(0, 0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(p.at(0, 1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(p.at(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("q_to_p assigns the deficit of an all-zero row to bin 0") {
  BinGrid grid{0.35, 3, {0.0, 0.35, 0.7}};
  ProbGrid p = q_to_p(q_grid(grid, {{0.0, 0.0, 0.0}}));
  CHECK(p.at(0, 0) == 1.0);
  CHECK(p.at(0, 1) == 0.0);
  CHECK(p.at(0, 2) == 0.0);
}

TEST_CASE("p -> q -> p roundtrips within 1e-12") {
  Rng rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    BinGrid grid = BinGrid::from_epsilon(0.07 + 0.43 * rng.uniform01());
    int n = 1 + rng.uniform_below(4);
    ProbGrid p = random_p(rng, n, grid);
    ProbGrid back = q_to_p(p_to_q(p));
    for (int i = 0; i < n; ++i)
      for (int b = 0; b < grid.m; ++b) CHECK(std::abs(back.at(i, b) - p.at(i, b)) <= 1e-12);
  }
}

TEST_CASE("discrete_reward of a single arm is its expectation") {
  BinGrid grid = BinGrid::from_epsilon(0.5);  // values 0, 0.5, 1
  ProbGrid p = p_grid(grid, {{0.4, 0.6, 0.0}});
  CHECK(discrete_reward({0}, p) == doctest::Approx(0.3).epsilon(1e-12));

  Rng rng(3);
  ProbGrid random = random_p(rng, 1, BinGrid::from_epsilon(0.2));
  double direct = 0.0;
  for (int b = 0; b < random.bins(); ++b) direct += random.grid.values[b] * random.at(0, b);
  CHECK(discrete_reward({0}, random) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("discrete_reward of two coin-like arms") {
  BinGrid grid = BinGrid::from_epsilon(0.5);
  ProbGrid p = p_grid(grid, {{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}});
  // enumeration over the four joint outcomes: 0.5 * (1 - 0.25)
  CHECK(discrete_reward({0, 1}, p) == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("binary_reward equals discrete_reward through the conversion") {
  BinGrid grid = BinGrid::from_epsilon(0.5);
  ProbGrid p = p_grid(grid, {{0.5, 0.5, 0.0}, {0.5, 0.5, 0.0}});
  CHECK(binary_reward({0, 1}, p_to_q(p)) == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("binary_reward edge grids") {
  BinGrid grid = BinGrid::from_epsilon(0.5);
  ProbGrid zeros = q_grid(grid, {{0.0, 0.0, 0.0}});
  CHECK(binary_reward({0}, zeros) == 0.0);

  ProbGrid top = q_grid(grid, {{0.2, 0.1, 1.0}, {0.3, 0.0, 0.0}});
  CHECK(binary_reward({0, 1}, top) == doctest::Approx(grid.values[2]).epsilon(1e-12));
}

TEST_CASE("bruteforce enumeration agrees with binary_reward on 500 small grids") {
  Rng rng(11);
  double worst = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    BinGrid grid = BinGrid::from_epsilon(0.26 + 0.24 * rng.uniform01());  // M in {3, 4}
    int n = 1 + rng.uniform_below(3);
    Table<double> entries(n, grid.m);
    for (int i = 0; i < n; ++i)
      for (int b = 0; b < grid.m; ++b) entries.at(i, b) = rng.uniform01();
    ProbGrid q{GridMode::Q, grid, std::move(entries)};
    ActionSet s;
    for (int i = 0; i < n; ++i) s.push_back(i);
    worst = std::max(worst, std::abs(binary_reward(s, q) - binary_reward_bruteforce(s, q)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("bruteforce hand values") {
  ProbGrid bern = q_grid(grid_m2(), {{0.0, 0.7}});
  CHECK(binary_reward_bruteforce({0}, bern) == doctest::Approx(0.35).epsilon(1e-12));

  BinGrid grid = BinGrid::from_epsilon(0.5);
  ProbGrid ones = q_grid(grid, {{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}});
  CHECK(binary_reward_bruteforce({0, 1}, ones) ==
        doctest::Approx(grid.values[2]).epsilon(1e-12));
}

TEST_CASE("bruteforce rejects instances beyond 2^20") {
  BinGrid grid = BinGrid::from_epsilon(0.1);  // M = 11
  ProbGrid q{GridMode::Q, grid, Table<double>(2, grid.m, 0.5)};
  CHECK_THROWS_AS(binary_reward_bruteforce({0, 1}, q), CapacityError);  // 2 * 11 > 20
}

TEST_CASE("discretization error lands in [0, eps] on random environments") {
  Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<ContinuousArm> arms;
    int n = 3 + rng.uniform_below(3);
    for (int i = 0; i < n; ++i) {
      double cut = 0.3 + 0.4 * rng.uniform01();
      double w = 0.3 + 0.4 * rng.uniform01();
      arms.push_back(uniform_mixture_arm({w, 1 - w}, {{0.0, cut}, {cut, 1.0}}, i));
    }
    BinGrid grid = BinGrid::from_epsilon(0.25);
    ProbGrid p = cdf_to_p(arms, grid);
    ActionSet s = rng.sample_subset(n, 2);
    double err = expected_max_exact(arms, s, 4001) - discrete_reward(s, p);
    CHECK(err >= -1e-8);
    CHECK(err <= 0.25 + 1e-8);
  }
}

TEST_CASE("binary_reward is monotone in q") {
  Rng rng(29);
  for (int rep = 0; rep < 200; ++rep) {
    BinGrid grid = BinGrid::from_epsilon(0.1 + 0.4 * rng.uniform01());
    int n = 2 + rng.uniform_below(3);
    Table<double> low(n, grid.m), high(n, grid.m);
    for (int i = 0; i < n; ++i)
      for (int b = 0; b < grid.m; ++b) {
        low.at(i, b) = rng.uniform01();
        high.at(i, b) = std::min(1.0, low.at(i, b) + 0.4 * rng.uniform01());
      }
    ActionSet s = rng.sample_subset(n, 1 + rng.uniform_below(n));
    double lo = binary_reward(s, ProbGrid{GridMode::Q, grid, std::move(low)});
    double hi = binary_reward(s, ProbGrid{GridMode::Q, grid, std::move(high)});
    CHECK(hi >= lo - 1e-12);
  }
}

TEST_CASE("validate_grid rejects bad rows") {
  BinGrid grid = BinGrid::from_epsilon(0.5);
  CHECK_THROWS_AS(validate_grid(p_grid(grid, {{0.5, 0.4, 0.0}})), std::invalid_argument);
  CHECK_THROWS_AS(validate_grid(q_grid(grid, {{1.2, 0.0, 0.0}})), std::invalid_argument);
  CHECK_NOTHROW(validate_grid(q_grid(grid, {{0.9, 0.0, 0.4}})));
}

TEST_SUITE_END();
