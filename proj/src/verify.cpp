#include "kmax/verify.hpp"

#include <chrono>
#include <limits>
#include <cmath>
#include <sstream>

#include "kmax/dck_ucb.hpp"
#include "kmax/discretize.hpp"
#include "kmax/oracle.hpp"

namespace kmax {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

ContinuousArm random_builtin_arm(Rng& rng, int label) {
  switch (rng.uniform_below(3)) {
    case 0: {
      double mu = 0.2 + 0.6 * rng.uniform01();
      double sigma = 0.15 + 0.35 * rng.uniform01();
      return truncated_gaussian_arm(mu, sigma, label);
    }
    case 1: {
      // Two-piece mixture with density kept inside [0.4, 2.5].
      double cut = 0.3 + 0.4 * rng.uniform01();
      double w = 0.25 + 0.5 * rng.uniform01();
      return uniform_mixture_arm({w, 1.0 - w}, {{0.0, cut}, {cut, 1.0}}, label);
    }
    default:
      return beta_arm(1.0, 1.0, label);
  }
}

// Random P-mode grid over a fresh BinGrid (rows via normalized exponentials).
ProbGrid random_p_grid(Rng& rng, int n, double epsilon) {
  BinGrid grid = BinGrid::from_epsilon(epsilon);
  Table<double> entries(n, grid.m);
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int b = 0; b < grid.m; ++b) {
      entries.at(i, b) = -std::log(rng.uniform_open01());
      row_sum += entries.at(i, b);
    }
    for (int b = 0; b < grid.m; ++b) entries.at(i, b) /= row_sum;
  }
  return ProbGrid{GridMode::P, grid, std::move(entries)};
}

ProbGrid random_q_grid(Rng& rng, int n, double epsilon) {
  BinGrid grid = BinGrid::from_epsilon(epsilon);
  Table<double> entries(n, grid.m);
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < grid.m; ++b) entries.at(i, b) = rng.uniform01();
  return ProbGrid{GridMode::Q, grid, std::move(entries)};
}

CheckResult make_result(const std::string& name, bool pass, const std::string& detail,
                        Clock::time_point start) {
  return CheckResult{name, pass, detail, seconds_since(start)};
}

// 2 * sum_{i in s, b} Q*_b(s) * v[b] * |a[i][b] - b_grid[i][b]| : the
// right-hand side of the estimation-error decomposition bound.
double tpm_bound(const ProbGrid& q_star, const ActionSet& s, const ProbGrid& other) {
  const int m = q_star.bins();
  std::vector<double> q_of_bin(m);
  double tail = 1.0;
  for (int b = m - 1; b >= 0; --b) {
    q_of_bin[b] = tail;
    double factor = 1.0;
    for (int k : s) factor *= 1.0 - q_star.at(k, b);
    tail *= factor;
  }
  double bound = 0.0;
  for (int i : s)
    for (int b = 0; b < m; ++b)
      bound += q_of_bin[b] * q_star.grid.values[b] * std::abs(other.at(i, b) - q_star.at(i, b));
  return 2.0 * bound;
}

}  // namespace

std::vector<ContinuousArm> reference_kmax_arms() {
  std::vector<ContinuousArm> arms;
  arms.push_back(uniform_mixture_arm({0.30, 0.70}, {{0.0, 0.60}, {0.60, 1.0}}, 0));
  arms.push_back(uniform_mixture_arm({0.32, 0.68}, {{0.0, 0.62}, {0.62, 1.0}}, 1));
  arms.push_back(uniform_mixture_arm({0.70, 0.30}, {{0.0, 0.40}, {0.40, 1.0}}, 2));
  arms.push_back(uniform_mixture_arm({0.72, 0.28}, {{0.0, 0.45}, {0.45, 1.0}}, 3));
  arms.push_back(uniform_mixture_arm({0.63, 0.37}, {{0.0, 0.35}, {0.35, 1.0}}, 4));
  arms.push_back(uniform_mixture_arm({0.75, 0.25}, {{0.0, 0.50}, {0.50, 1.0}}, 5));
  return arms;
}

ExpLinearModel reference_kmin_model() {
  auto vec = [](double a, double b, double c) {
    Eigen::VectorXd v(3);
    v << a, b, c;
    return v;
  };
  Eigen::VectorXd theta_star = vec(1.2, 0.8, 0.5);
  std::vector<Eigen::VectorXd> features{
      vec(0.90, 0.30, 0.20), vec(0.80, 0.40, 0.30), vec(0.45, 0.45, 0.45),
      vec(0.30, 0.60, 0.40), vec(0.20, 0.30, 0.80), vec(0.10, 0.50, 0.30),
      vec(0.15, 0.20, 0.50), vec(0.05, 0.10, 0.40)};
  return make_exp_linear_model(std::move(theta_star), std::move(features), 2.0, 2);
}

CheckResult check_discretization_error(const VerifyScale& scale) {
  auto start = Clock::now();
  Rng rng(scale.base_seed);
  const double slack = 1e-8;
  const double epsilons[] = {0.25, 0.1, 0.05};
  double min_err = std::numeric_limits<double>::infinity();
  double max_slack = -std::numeric_limits<double>::infinity();  // err - eps
  std::int64_t checks = 0, violations = 0;
  for (int inst = 0; inst < scale.discretization_instances; ++inst) {
    int n = 3 + rng.uniform_below(4);  // N in [3,6]
    int k = 2 + rng.uniform_below(2);  // K in {2,3}
    std::vector<ContinuousArm> arms;
    for (int i = 0; i < n; ++i) arms.push_back(random_builtin_arm(rng, i));
    double epsilon = epsilons[inst % 3];
    BinGrid grid = BinGrid::from_epsilon(epsilon);
    ProbGrid p = cdf_to_p(arms, grid);
    for (int rep = 0; rep < scale.discretization_subsets_per_instance; ++rep) {
      ActionSet s = rng.sample_subset(n, k);
      double exact = expected_max_exact(arms, s, 10000);
      double err = exact - discrete_reward(s, p);
      min_err = std::min(min_err, err);
      max_slack = std::max(max_slack, err - epsilon);
      ++checks;
      if (err < -slack || err > epsilon + slack) ++violations;
    }
  }
  std::ostringstream detail;
  detail << checks << " checks, " << violations << " violations; min err " << min_err
         << ", max (err - eps) " << max_slack;
  return make_result("discretization error in [0, eps]", violations == 0, detail.str(),
                     start);
}

CheckResult check_reward_equivalence(const VerifyScale& scale) {
  auto start = Clock::now();
  Rng rng(scale.base_seed + 1);
  double worst = 0.0;
  for (int rep = 0; rep < scale.equivalence_grids; ++rep) {
    int n = 2 + rng.uniform_below(5);
    double epsilon = 0.07 + 0.43 * rng.uniform01();
    ProbGrid p = random_p_grid(rng, n, epsilon);
    int k = 1 + rng.uniform_below(n);
    ActionSet s = rng.sample_subset(n, k);
    worst = std::max(worst, std::abs(binary_reward(s, p_to_q(p)) - discrete_reward(s, p)));
  }
  return make_result("binary/discrete reward equivalence", worst <= 1e-12,
                     "max |r_q - r| = " + format_double(worst) + " over " +
                         std::to_string(scale.equivalence_grids) + " grids",
                     start);
}

CheckResult check_bruteforce_agreement(const VerifyScale& scale) {
  auto start = Clock::now();
  Rng rng(scale.base_seed + 2);
  double worst = 0.0;
  for (int rep = 0; rep < scale.bruteforce_grids; ++rep) {
    int n = 2 + rng.uniform_below(4);
    double epsilon = 0.26 + 0.24 * rng.uniform01();  // M in {3, 4}
    ProbGrid q = random_q_grid(rng, n, epsilon);
    int k = 1 + rng.uniform_below(std::min(n, 3));
    ActionSet s = rng.sample_subset(n, k);
    worst = std::max(worst, std::abs(binary_reward(s, q) - binary_reward_bruteforce(s, q)));
  }
  return make_result("exhaustive bruteforce agreement", worst <= 1e-12,
                     "max |r_q - bruteforce| = " + format_double(worst) + " over " +
                         std::to_string(scale.bruteforce_grids) + " grids",
                     start);
}

CheckResult check_reward_monotonicity(const VerifyScale& scale) {
  auto start = Clock::now();
  Rng rng(scale.base_seed + 3);
  double worst = 0.0;
  for (int rep = 0; rep < scale.monotonicity_grids; ++rep) {
    int n = 2 + rng.uniform_below(5);
    double epsilon = 0.07 + 0.43 * rng.uniform01();
    ProbGrid q = random_q_grid(rng, n, epsilon);
    ProbGrid q_up = q;
    for (int i = 0; i < n; ++i)
      for (int b = 0; b < q.bins(); ++b)
        q_up.at(i, b) = std::min(1.0, q.at(i, b) + 0.3 * rng.uniform01());
    int k = 1 + rng.uniform_below(n);
    ActionSet s = rng.sample_subset(n, k);
    worst = std::max(worst, binary_reward(s, q) - binary_reward(s, q_up));
  }
  return make_result("reward monotonicity in q", worst <= 1e-12,
                     "max decrease = " + format_double(worst) + " over " +
                         std::to_string(scale.monotonicity_grids) + " grids",
                     start);
}

CheckResult check_pq_roundtrip(const VerifyScale& scale) {
  auto start = Clock::now();
  Rng rng(scale.base_seed + 4);
  double worst = 0.0;
  for (int rep = 0; rep < scale.roundtrip_grids; ++rep) {
    int n = 2 + rng.uniform_below(5);
    double epsilon = 0.07 + 0.43 * rng.uniform01();
    ProbGrid p = random_p_grid(rng, n, epsilon);
    ProbGrid back = q_to_p(p_to_q(p));
    for (int i = 0; i < n; ++i)
      for (int b = 0; b < p.bins(); ++b)
        worst = std::max(worst, std::abs(back.at(i, b) - p.at(i, b)));
  }
  return make_result("p <-> q roundtrip identity", worst <= 1e-12,
                     "max entry deviation = " + format_double(worst) + " over " +
                         std::to_string(scale.roundtrip_grids) + " grids",
                     start);
}

CheckResult check_error_decomposition(const VerifyScale& scale) {
  auto start = Clock::now();
  // Sample live rounds from a short run on the reference instance.
  std::vector<ContinuousArm> arms = reference_kmax_arms();
  DckConfig config;
  config.epsilon = 0.1;
  config.lipschitz = 2.0;
  config.n = static_cast<int>(arms.size());
  config.k = 2;
  config.horizon = scale.decomposition_samples + 100;
  DckState state = DckState::init(config);
  ProbGrid q_star = p_to_q(cdf_to_p(arms, state.grid));
  ContinuousEnv env{arms, config.k, scale.base_seed + 5};
  Rng rng(scale.base_seed + 5);

  double worst = -std::numeric_limits<double>::infinity();
  std::int64_t violations = 0, samples = 0;
  for (std::int64_t t = 1; t <= config.horizon; ++t) {
    ActionSet action = select_action(state, config);
    if (t > 100) {  // skip the all-optimistic opening rounds
      ProbGrid q_bar = optimistic_grid(state, config);
      double lhs = std::abs(binary_reward(action, q_bar) - binary_reward(action, q_star));
      double rhs = tpm_bound(q_star, action, q_bar);
      worst = std::max(worst, lhs - rhs);
      ++samples;
      if (lhs > rhs + 1e-10) ++violations;
    }
    std::vector<double> outcomes = sample_outcomes(env, action, rng);
    ValueIndexFeedback fb = value_index_feedback(outcomes, action);
    fb.bin = bin_of(fb.reward, state.grid);
    update(state, action, fb);
  }
  std::ostringstream detail;
  detail << samples << " sampled rounds, " << violations << " violations; max (lhs - rhs) = "
         << worst;
  return make_result("estimation-error decomposition inequality", violations == 0, detail.str(), start);
}

CheckResult check_oracle_ratio(const VerifyScale& scale) {
  auto start = Clock::now();
  Rng rng(scale.base_seed + 6);
  const double floor = 1.0 - std::exp(-1.0);
  double worst_ratio = 1.0;
  std::int64_t violations = 0;
  for (int rep = 0; rep < scale.oracle_instances; ++rep) {
    int n = 2 + rng.uniform_below(scale.oracle_max_arms - 1);
    double epsilon = 0.1 + 0.4 * rng.uniform01();
    ProbGrid p = random_p_grid(rng, n, epsilon);
    int k = 1 + rng.uniform_below(n);
    OracleResult exact = exact_oracle(p, k);
    OracleResult greedy = greedy_oracle(p, k);
    double ratio = exact.value > 0.0 ? greedy.value / exact.value : 1.0;
    worst_ratio = std::min(worst_ratio, ratio);
    if (ratio < floor - 1e-12) ++violations;
  }
  std::ostringstream detail;
  detail << "worst greedy/exact ratio = " << worst_ratio << " (floor " << floor << ") over "
         << scale.oracle_instances << " instances";
  return make_result("oracle greedy vs exact ratio", violations == 0, detail.str(), start);
}

CheckResult check_biased_concentration(const VerifyScale& scale) {
  auto start = Clock::now();
  std::vector<ContinuousArm> arms = reference_kmax_arms();
  arms.resize(scale.conc_arms);
  DckConfig config;
  config.epsilon = scale.conc_epsilon;
  config.lipschitz = 2.0;
  config.n = scale.conc_arms;
  config.k = scale.conc_k;
  config.horizon = scale.conc_horizon;

  BinGrid grid = BinGrid::from_epsilon(config.epsilon);
  ProbGrid q_star = p_to_q(cdf_to_p(arms, grid));

  std::int64_t violations = 0, population = 0;
  for (int seed_idx = 0; seed_idx < scale.conc_seeds; ++seed_idx) {
    std::uint64_t seed = scale.base_seed + 100 + seed_idx;
    DckState state = DckState::init(config);
    ContinuousEnv env{arms, config.k, seed};
    Rng rng(seed);
    for (std::int64_t t = 1; t <= config.horizon; ++t) {
      auto [v, p] = lemma4_violations(snapshot(state), q_star, config);
      violations += v;
      population += p;
      ActionSet action = select_action(state, config);
      std::vector<double> outcomes = sample_outcomes(env, action, rng);
      ValueIndexFeedback fb = value_index_feedback(outcomes, action);
      fb.bin = bin_of(fb.reward, state.grid);
      update(state, action, fb);
    }
  }
  double rate = population == 0 ? 0.0
                                : static_cast<double>(violations) / static_cast<double>(population);
  std::ostringstream detail;
  detail << "violation rate " << rate << " (" << violations << "/" << population << ") over "
         << scale.conc_seeds << " seeds";
  return make_result("biased concentration violation rate <= 1%", rate <= 0.01, detail.str(), start);
}

CheckResult check_mle_correctness(const VerifyScale& scale) {
  auto start = Clock::now();
  Rng rng(scale.base_seed + 7);
  double worst_grad = 0.0, worst_eig = 0.0;
  for (int rep = 0; rep < scale.mle_fd_instances; ++rep) {
    int d = 1 + rng.uniform_below(4);
    int n = d + 2;
    std::vector<Eigen::VectorXd> features;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd phi(d);
      for (int c = 0; c < d; ++c) phi(c) = 0.1 + 0.8 * rng.uniform01();
      phi /= std::max(1.0, phi.norm());
      features.push_back(phi);
    }
    double lambda = rng.uniform01() < 0.3 ? 0.0 : 0.5 + 2.0 * rng.uniform01();
    int k = 1 + rng.uniform_below(std::min(n, 3));
    MleHistory history(d);
    int rounds = 3 + rng.uniform_below(20);
    for (int r = 0; r < rounds; ++r) {
      ActionSet s = rng.sample_subset(n, k);
      history.add(s, -std::log(rng.uniform_open01()), feature_sum(features, s));
    }
    Eigen::VectorXd theta(d);
    for (int c = 0; c < d; ++c) theta(c) = 0.3 + 1.5 * rng.uniform01();

    Eigen::VectorXd grad = nll_gradient(theta, history, lambda);
    Eigen::VectorXd fd(d);
    const double h = 1e-6;
    for (int c = 0; c < d; ++c) {
      Eigen::VectorXd up = theta, down = theta;
      up(c) += h;
      down(c) -= h;
      fd(c) = (neg_log_likelihood(up, history, lambda) -
               neg_log_likelihood(down, history, lambda)) /
              (2.0 * h);
    }
    worst_grad = std::max(worst_grad, (fd - grad).norm() / std::max(grad.norm(), 1.0));

    Eigen::MatrixXd hess = hessian_h(theta, history, lambda);
    double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hess).eigenvalues().minCoeff();
    worst_eig = std::max(worst_eig, lambda - min_eig);
  }

  // d=1 closed-form fits.
  MleHistory single(1);
  Eigen::VectorXd psi1 = Eigen::VectorXd::Ones(1);
  single.add({0}, 2.0, psi1);
  Eigen::VectorXd warm = Eigen::VectorXd::Ones(1);
  double fit0 = fit_mle(single, 0.0, 1e-12, warm)(0);
  double fit1 = fit_mle(single, 1.0, 1e-12, warm)(0);
  double err0 = std::abs(fit0 - 0.5);
  double err1 = std::abs(fit1 - (std::sqrt(2.0) - 1.0));

  bool pass = worst_grad <= 1e-5 && worst_eig <= 1e-9 && err0 <= 1e-8 && err1 <= 1e-8;
  std::ostringstream detail;
  detail << "max grad FD rel err " << worst_grad << "; max (lambda - min eig) " << worst_eig
         << "; closed-form errors " << err0 << ", " << err1;
  return make_result("mle gradient/hessian/closed-form", pass, detail.str(), start);
}

CheckResult check_mle_coverage(const VerifyScale& scale) {
  auto start = Clock::now();
  ExpLinearModel model = reference_kmin_model();
  MleExpConfig config;
  config.delta = scale.coverage_delta;

  std::int64_t contained = 0, total = 0;
  const std::int64_t stride = scale.coverage_horizon / scale.coverage_checkpoints;
  for (int seed_idx = 0; seed_idx < scale.coverage_seeds; ++seed_idx) {
    Rng rng(scale.base_seed + 500 + seed_idx);
    MleExpState state = MleExpState::init(model, config);
    for (std::int64_t t = 1; t <= scale.coverage_horizon; ++t) {
      run_round(model, state, config, rng);
      if (t % stride == 0) {
        // Membership in C_{t+1}: schedules and MLE for the next round, with
        // the history collected so far.
        const int d = model.dim();
        double lambda = lambda_schedule(t + 1, d, state.m1, model.v_bound, state.l_star,
                                        config.delta);
        Eigen::VectorXd theta_hat =
            fit_mle(state.history, lambda, config.tol, state.mle.theta_hat);
        double gamma = gamma_schedule(t + 1, d, state.m1, model.v_bound, state.l_star, lambda,
                                      config.delta);
        ++total;
        if (in_confidence_set(model.theta_star, theta_hat, state.history, lambda, gamma))
          ++contained;
      }
    }
  }
  double coverage = total == 0 ? 1.0 : static_cast<double>(contained) / static_cast<double>(total);
  std::ostringstream detail;
  detail << "coverage " << coverage << " (" << contained << "/" << total << ") at delta = "
         << scale.coverage_delta;
  return make_result("confidence-set coverage >= 99%", coverage >= 0.99, detail.str(),
                     start);
}

std::vector<CheckResult> verify_group(const std::string& group, const VerifyScale& scale) {
  if (group == "lemmas")
    return {check_discretization_error(scale), check_reward_equivalence(scale),
            check_bruteforce_agreement(scale),     check_reward_monotonicity(scale),
            check_pq_roundtrip(scale),          check_error_decomposition(scale)};
  if (group == "oracle") return {check_oracle_ratio(scale)};
  if (group == "concentration") return {check_biased_concentration(scale)};
  if (group == "mle") return {check_mle_correctness(scale), check_mle_coverage(scale)};
  throw std::invalid_argument("verify: unknown group '" + group +
                              "' (expected lemmas|oracle|concentration|mle)");
}

}  // namespace kmax
