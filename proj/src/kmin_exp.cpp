#include "kmax/kmin_exp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kmax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t subset_mask(const ActionSet& s) {
  std::uint64_t mask = 0;
  for (int i : s) {
    if (i < 0 || i >= 64) throw std::invalid_argument("subset mask supports arm indices < 64");
    mask |= std::uint64_t{1} << i;
  }
  return mask;
}

double rate_of(const ExpLinearModel& model, const ActionSet& s) {
  require_valid_action(s, model.n());
  if (static_cast<int>(s.size()) != model.k)
    throw std::invalid_argument("kmin_exp: |s| must equal K");
  double rate = 0.0;
  for (int i : s) rate += model.features[i].dot(model.theta_star);
  if (!(rate > 0.0)) throw std::invalid_argument("kmin_exp: nonpositive subset rate");
  return rate;
}

}  // namespace

ExpLinearModel make_exp_linear_model(Eigen::VectorXd theta_star,
                                     std::vector<Eigen::VectorXd> features, double v_bound,
                                     int k, double positivity_margin) {
  if (features.empty()) throw std::invalid_argument("model: needs at least one arm");
  const int d = static_cast<int>(theta_star.size());
  const int n = static_cast<int>(features.size());
  if (k < 1 || k > n) throw std::invalid_argument("model: need 1 <= K <= N");
  if (n > 64) throw std::invalid_argument("model: at most 64 arms supported");
  if (!(v_bound > 0.0)) throw std::invalid_argument("model: v_bound must be positive");
  if (theta_star.norm() > v_bound + 1e-12)
    throw std::invalid_argument("model: |theta*| exceeds the declared parameter ball");
  for (const auto& phi : features) {
    if (static_cast<int>(phi.size()) != d)
      throw std::invalid_argument("model: feature dimension mismatch");
    if (phi.norm() > 1.0 + 1e-12) throw std::invalid_argument("model: |phi(i)| must be <= 1");
    if (!(phi.dot(theta_star) >= positivity_margin)) {
      std::ostringstream msg;
      msg << "model: arm rate " << phi.dot(theta_star) << " below the positivity margin "
          << positivity_margin;
      throw std::invalid_argument(msg.str());
    }
  }
  ExpLinearModel model;
  model.theta_star = std::move(theta_star);
  model.features = std::move(features);
  model.v_bound = v_bound;
  model.k = k;
  return model;
}

double feasible_boundary_fraction(const ExpLinearModel& model, int n_directions, Rng& rng) {
  if (n_directions < 1) throw std::invalid_argument("feasible_boundary_fraction: need >= 1");
  const int d = model.dim();
  int feasible = 0;
  for (int rep = 0; rep < n_directions; ++rep) {
    // Gaussian direction via Box-Muller, scaled to the ball boundary.
    Eigen::VectorXd direction(d);
    for (int c = 0; c < d; ++c) {
      double u1 = rng.uniform_open01(), u2 = rng.uniform01();
      direction(c) = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    double norm = direction.norm();
    if (norm == 0.0) continue;
    direction *= model.v_bound / norm;
    bool positive = true;
    for (const auto& phi : model.features) positive = positive && phi.dot(direction) > 0.0;
    feasible += positive;
  }
  return static_cast<double>(feasible) / static_cast<double>(n_directions);
}

Eigen::VectorXd feature_sum(const std::vector<Eigen::VectorXd>& features, const ActionSet& s) {
  require_valid_action(s, static_cast<int>(features.size()));
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(features.front().size());
  for (int i : s) psi += features[i];
  return psi;
}

double expected_min_loss(const ExpLinearModel& model, const ActionSet& s) {
  return 1.0 / rate_of(model, s);
}

double sample_min_loss(const ExpLinearModel& model, const ActionSet& s, Rng& rng) {
  return -std::log(rng.uniform_open01()) / rate_of(model, s);
}

double sup_expected_loss(const ExpLinearModel& model, double enumeration_cap) {
  if (subset_count(model.n(), model.k) > enumeration_cap)
    throw CapacityError("sup_expected_loss: subset enumeration exceeds the cap");
  double min_rate = kInf;
  for_each_subset(model.n(), model.k, [&](const ActionSet& s) {
    double rate = 0.0;
    for (int i : s) rate += model.features[i].dot(model.theta_star);
    min_rate = std::min(min_rate, rate);
  });
  if (!(min_rate > 0.0)) throw std::invalid_argument("sup_expected_loss: nonpositive rate");
  return 1.0 / min_rate;
}

void MleHistory::add(const ActionSet& subset, double loss, const Eigen::VectorXd& psi) {
  if (loss < 0.0) throw std::invalid_argument("MleHistory: losses are nonnegative");
  if (static_cast<int>(psi.size()) != dim_)
    throw std::invalid_argument("MleHistory: psi dimension mismatch");
  rounds_.push_back(Round{subset, loss});
  std::uint64_t key = subset_mask(subset);
  auto it = group_index_.find(key);
  if (it == group_index_.end()) {
    group_index_.emplace(key, static_cast<int>(groups_.size()));
    groups_.push_back(Group{psi, 1});
  } else {
    groups_[it->second].count += 1;
  }
  loss_weighted_psi_ += loss * psi;
}

bool in_domain(const Eigen::VectorXd& theta, const MleHistory& history) {
  for (const auto& group : history.groups())
    if (!(group.psi.dot(theta) > 0.0)) return false;
  return true;
}

double neg_log_likelihood(const Eigen::VectorXd& theta, const MleHistory& history, double lambda) {
  if (!in_domain(theta, history)) return kInf;
  double value = 0.5 * lambda * theta.squaredNorm() + history.loss_weighted_psi().dot(theta);
  for (const auto& group : history.groups())
    value -= static_cast<double>(group.count) * std::log(group.psi.dot(theta));
  return value;
}

Eigen::VectorXd gradient_g(const Eigen::VectorXd& theta, const MleHistory& history,
                           double lambda) {
  if (!in_domain(theta, history))
    throw std::invalid_argument("gradient_g: theta outside the likelihood domain");
  Eigen::VectorXd g = -lambda * theta;
  for (const auto& group : history.groups())
    g += (static_cast<double>(group.count) / group.psi.dot(theta)) * group.psi;
  return g;
}

Eigen::VectorXd nll_gradient(const Eigen::VectorXd& theta, const MleHistory& history,
                             double lambda) {
  return -gradient_g(theta, history, lambda) + history.loss_weighted_psi();
}

Eigen::MatrixXd hessian_h(const Eigen::VectorXd& theta, const MleHistory& history,
                          double lambda) {
  if (!in_domain(theta, history))
    throw std::invalid_argument("hessian_h: theta outside the likelihood domain");
  const int d = history.dim();
  Eigen::MatrixXd h = lambda * Eigen::MatrixXd::Identity(d, d);
  for (const auto& group : history.groups()) {
    double rate = group.psi.dot(theta);
    h += (static_cast<double>(group.count) / (rate * rate)) * group.psi * group.psi.transpose();
  }
  return h;
}

Eigen::VectorXd fit_mle(const MleHistory& history, double lambda, double tol,
                        const Eigen::VectorXd& warm_start) {
  if (!(lambda > 0.0) && history.size() == 0)
    throw std::invalid_argument("fit_mle: needs lambda > 0 or a nonempty history");
  if (static_cast<int>(warm_start.size()) != history.dim())
    throw std::invalid_argument("fit_mle: warm start dimension mismatch");
  if (!(tol > 0.0)) tol = 1e-9;

  Eigen::VectorXd theta = warm_start;
  if (!in_domain(theta, history)) {
    // Pull the start into the open domain: the summed group direction has a
    // positive rate against itself in the common nonnegative-feature case.
    Eigen::VectorXd fallback = Eigen::VectorXd::Zero(history.dim());
    for (const auto& group : history.groups()) fallback += group.psi;
    double norm = fallback.norm();
    if (norm > 0.0) fallback /= norm;
    theta = fallback;
    if (!in_domain(theta, history))
      throw MleSolverError("fit_mle: could not find a feasible starting point", theta, kInf);
  }

  const int max_iters = 100;
  double grad_norm = kInf;
  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::VectorXd grad = nll_gradient(theta, history, lambda);
    grad_norm = grad.norm();
    if (grad_norm <= tol) return theta;

    Eigen::MatrixXd hess = hessian_h(theta, history, lambda);
    Eigen::VectorXd direction = hess.ldlt().solve(-grad);
    if (!direction.allFinite())
      throw MleSolverError("fit_mle: singular Newton system", theta, grad_norm);

    // Halve the step until it stays in the domain and makes progress.
    // Near the optimum the objective is flat at double resolution, so a
    // gradient-norm decrease also counts as progress.
    double value = neg_log_likelihood(theta, history, lambda);
    double step = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 60 && !moved; ++halving) {
      Eigen::VectorXd candidate = theta + step * direction;
      double cand_value = neg_log_likelihood(candidate, history, lambda);
      if (cand_value <= value ||
          (std::isfinite(cand_value) &&
           nll_gradient(candidate, history, lambda).norm() < grad_norm)) {
        theta = std::move(candidate);
        moved = true;
      }
      step *= 0.5;
    }
    if (!moved) throw MleSolverError("fit_mle: line search stalled", theta, grad_norm);
  }
  throw MleSolverError("fit_mle: no convergence within 100 Newton iterations", theta, grad_norm);
}

double lambda_schedule(std::int64_t t, int d, double m1, double v_bound, double l_star,
                       double delta) {
  if (t < 0 || d < 1 || !(m1 > 0.0) || !(v_bound > 0.0) || !(l_star > 0.0) || !(delta > 0.0))
    throw std::invalid_argument("lambda_schedule: invalid arguments");
  double inner = std::exp(1.0) * std::sqrt(1.0 + static_cast<double>(t) * l_star / d) +
                 1.0 / delta;
  return std::max(1.0, (2.0 * d * m1 / v_bound) * std::log(inner));
}

double gamma_schedule(std::int64_t t, int d, double m1, double v_bound, double l_star,
                      double lambda_t, double delta) {
  if (t < 0 || d < 1 || !(m1 > 0.0) || !(v_bound > 0.0) || !(l_star > 0.0) ||
      !(lambda_t > 0.0) || !(delta > 0.0))
    throw std::invalid_argument("gamma_schedule: invalid arguments");
  double sqrt_lambda = std::sqrt(lambda_t);
  double head = sqrt_lambda * (1.0 / (2.0 * m1) + v_bound);
  double mid = (2.0 * m1 * d / sqrt_lambda) *
               (std::log(2.0) +
                0.5 * std::log(1.0 + static_cast<double>(t) * l_star / (lambda_t * d)));
  double tail = (2.0 * m1 / sqrt_lambda) * std::log(1.0 / delta);
  return head + mid + tail;
}

bool in_confidence_set(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_hat,
                       const MleHistory& history, double lambda_t, double gamma_t) {
  Eigen::VectorXd gap =
      gradient_g(theta, history, lambda_t) - gradient_g(theta_hat, history, lambda_t);
  Eigen::MatrixXd hess = hessian_h(theta, history, lambda_t);
  Eigen::VectorXd solved = hess.ldlt().solve(gap);
  double norm_sq = gap.dot(solved);
  return norm_sq <= gamma_t * gamma_t;
}

OptimisticChoice optimistic_select(const std::vector<Eigen::VectorXd>& features, int k,
                                   const MleState& state, double v_bound,
                                   double enumeration_cap) {
  const int n = static_cast<int>(features.size());
  if (k < 1 || k > n) throw std::invalid_argument("optimistic_select: need 1 <= k <= N");
  if (subset_count(n, k) > enumeration_cap)
    throw CapacityError("optimistic_select: subset enumeration exceeds the cap");

  Eigen::LDLT<Eigen::MatrixXd> factor(state.hessian);
  OptimisticChoice best;
  best.score = -kInf;
  Eigen::VectorXd best_solved;
  double best_norm = 0.0;
  for_each_subset(n, k, [&](const ActionSet& s) {
    Eigen::VectorXd psi = feature_sum(features, s);
    Eigen::VectorXd solved = factor.solve(psi);
    double norm = std::sqrt(std::max(psi.dot(solved), 0.0));
    double score = psi.dot(state.theta_hat) + state.gamma_t * norm;
    if (score > best.score) {  // ties keep the lexicographically first subset
      best.score = score;
      best.subset = s;
      best_solved = solved;
      best_norm = norm;
    }
  });

  best.theta_tilde = state.theta_hat;
  if (best_norm > 0.0) best.theta_tilde += (state.gamma_t / best_norm) * best_solved;
  double norm = best.theta_tilde.norm();
  if (norm > v_bound) best.theta_tilde *= v_bound / norm;
  return best;
}

MleExpState MleExpState::init(const ExpLinearModel& model, const MleExpConfig& config) {
  MleExpState state{MleHistory(model.dim()), MleState{}, 0, 1.0, 1.0};
  state.l_star = sup_expected_loss(model, config.enumeration_cap);
  state.m1 = state.l_star / std::sqrt(2.0);
  const int d = model.dim();
  state.mle.theta_hat = Eigen::VectorXd::Constant(d, model.v_bound / std::sqrt(double(d)));
  state.mle.lambda_t = 1.0;
  state.mle.gamma_t = 0.0;
  state.mle.hessian = Eigen::MatrixXd::Identity(d, d);
  return state;
}

RoundOutcome run_round(const ExpLinearModel& model, MleExpState& state,
                       const MleExpConfig& config, Rng& rng) {
  const int d = model.dim();
  const std::int64_t t = state.round + 1;

  double lambda_t = config.lambda_override
                        ? *config.lambda_override
                        : lambda_schedule(t, d, state.m1, model.v_bound, state.l_star,
                                          config.delta);
  Eigen::VectorXd warm = state.round == 0
                             ? Eigen::VectorXd::Constant(d, model.v_bound / std::sqrt(double(d)))
                             : state.mle.theta_hat;
  Eigen::VectorXd theta_hat = fit_mle(state.history, lambda_t, config.tol, warm);
  double gamma_t = config.gamma_override
                       ? *config.gamma_override
                       : gamma_schedule(t, d, state.m1, model.v_bound, state.l_star, lambda_t,
                                        config.delta);

  state.mle.theta_hat = theta_hat;
  state.mle.lambda_t = lambda_t;
  state.mle.gamma_t = gamma_t;
  state.mle.hessian = hessian_h(theta_hat, state.history, lambda_t);

  OptimisticChoice choice =
      optimistic_select(model.features, model.k, state.mle, model.v_bound,
                        config.enumeration_cap);
  double loss = sample_min_loss(model, choice.subset, rng);
  state.history.add(choice.subset, loss, feature_sum(model.features, choice.subset));
  state.round += 1;
  return RoundOutcome{choice.subset, loss};
}

}  // namespace kmax
