#pragma once

#include <Eigen/Dense>
#include <optional>
#include <unordered_map>
#include <vector>

#include "kmax/common.hpp"

// Exponential K-Min bandits with full-bandit feedback. Each arm's loss is
// Exp(mu_i) with mu_i = <phi(i), theta*>; the minimum over a subset S is
// Exp(psi(S)' theta*) with psi(S) = sum_{i in S} phi(i). The learner fits a
// regularized MLE of theta* each round,
//
//   L_t(theta; lambda) = sum_i [ -log(psi_i' theta) + psi_i' theta * loss_i ]
//                        + lambda/2 * |theta|^2,
//
// builds a gradient-gap confidence set around it, and plays the subset
// maximizing an optimistic rate estimate.

namespace kmax {

struct ExpLinearModel {
  Eigen::VectorXd theta_star;
  std::vector<Eigen::VectorXd> features;  // one phi per arm, |phi| <= 1
  double v_bound = 1.0;                   // radius of the parameter ball Theta
  int k = 1;

  int n() const { return static_cast<int>(features.size()); }
  int dim() const { return static_cast<int>(theta_star.size()); }
};

// Validates feature norms, |theta*| <= V and the positivity margin
// min_i <phi(i), theta*> >= margin (1e-3 by default for simulation use).
ExpLinearModel make_exp_linear_model(Eigen::VectorXd theta_star,
                                     std::vector<Eigen::VectorXd> features, double v_bound,
                                     int k, double positivity_margin = 1e-3);

// Fraction of sampled directions on the parameter-ball boundary where every
// arm rate is positive: a diagnostic of how much of the declared ball lies
// inside the likelihood domain (zero means theta* sits in a thin feasible
// sliver).
double feasible_boundary_fraction(const ExpLinearModel& model, int n_directions, Rng& rng);

Eigen::VectorXd feature_sum(const std::vector<Eigen::VectorXd>& features, const ActionSet& s);

// expected loss 1/(psi(S)' theta*); nonpositive rates throw.
double expected_min_loss(const ExpLinearModel& model, const ActionSet& s);

// One draw of min_{i in S} X_i ~ Exp(psi(S)' theta*) via -log(u)/rate.
double sample_min_loss(const ExpLinearModel& model, const ActionSet& s, Rng& rng);

// L* = sup_S expected loss = 1 / min_S rate, by enumeration.
double sup_expected_loss(const ExpLinearModel& model, double enumeration_cap = 1e6);

// Observation history. Rounds are kept verbatim; evaluation uses sufficient
// statistics grouped by distinct psi (the loss terms only enter through
// sum_i loss_i * psi_i), which keeps the per-round MLE refit O(|distinct S|)
// instead of O(t).
class MleHistory {
 public:
  struct Round {
    ActionSet subset;
    double loss = 0.0;
  };
  struct Group {
    Eigen::VectorXd psi;
    std::int64_t count = 0;
  };

  MleHistory() = default;
  explicit MleHistory(int dim) : dim_(dim), loss_weighted_psi_(Eigen::VectorXd::Zero(dim)) {}

  void add(const ActionSet& subset, double loss, const Eigen::VectorXd& psi);

  int dim() const { return dim_; }
  std::int64_t size() const { return static_cast<std::int64_t>(rounds_.size()); }
  const std::vector<Round>& rounds() const { return rounds_; }
  const std::vector<Group>& groups() const { return groups_; }
  const Eigen::VectorXd& loss_weighted_psi() const { return loss_weighted_psi_; }

 private:
  int dim_ = 0;
  std::vector<Round> rounds_;
  std::vector<Group> groups_;
  std::unordered_map<std::uint64_t, int> group_index_;  // subset bitmask -> group
  Eigen::VectorXd loss_weighted_psi_;
};

// True when psi' theta > 0 for every history round.
bool in_domain(const Eigen::VectorXd& theta, const MleHistory& history);

// +infinity outside the domain.
double neg_log_likelihood(const Eigen::VectorXd& theta, const MleHistory& history, double lambda);

// The confidence-set gradient term
//   g(theta) = sum_i psi_i / (psi_i' theta) - lambda * theta,
// related to the objective by grad L(theta) = -g(theta) + sum_i loss_i * psi_i.
Eigen::VectorXd gradient_g(const Eigen::VectorXd& theta, const MleHistory& history, double lambda);

Eigen::VectorXd nll_gradient(const Eigen::VectorXd& theta, const MleHistory& history,
                             double lambda);

// H(theta) = lambda I + sum_i psi_i psi_i' / (psi_i' theta)^2; symmetric,
// eigenvalues >= lambda.
Eigen::MatrixXd hessian_h(const Eigen::VectorXd& theta, const MleHistory& history, double lambda);

// Thrown when the Newton solve does not reach the gradient tolerance.
class MleSolverError : public std::runtime_error {
 public:
  MleSolverError(const std::string& what, Eigen::VectorXd iterate, double gradient_norm)
      : std::runtime_error(what), last_iterate(std::move(iterate)), grad_norm(gradient_norm) {}
  Eigen::VectorXd last_iterate;
  double grad_norm = 0.0;
};

// Damped Newton minimizer of L(.; lambda); step-halving keeps iterates in
// the open domain. Terminates when |grad L| <= tol (default 1e-9) within
// 100 iterations, else throws MleSolverError.
Eigen::VectorXd fit_mle(const MleHistory& history, double lambda, double tol,
                        const Eigen::VectorXd& warm_start);

// lambda_t = max{1, (2 d M1 / V) * log(e * sqrt(1 + t L* / d) + 1/delta)}.
double lambda_schedule(std::int64_t t, int d, double m1, double v_bound, double l_star,
                       double delta);

// gamma_t = sqrt(lambda)(1/(2 M1) + V)
//         + (2 M1 d / sqrt(lambda)) (log 2 + 0.5 log(1 + t L* / (lambda d)))
//         + (2 M1 / sqrt(lambda)) log(1/delta).
double gamma_schedule(std::int64_t t, int d, double m1, double v_bound, double l_star,
                      double lambda_t, double delta);

// Exact membership test of the gradient-gap confidence set:
//   |g(theta) - g(theta_hat)|_{H(theta)^{-1}} <= gamma_t.
bool in_confidence_set(const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_hat,
                       const MleHistory& history, double lambda_t, double gamma_t);

struct MleState {
  Eigen::VectorXd theta_hat;
  double lambda_t = 1.0;
  double gamma_t = 0.0;
  Eigen::MatrixXd hessian;  // H(theta_hat; lambda_t)
};

struct OptimisticChoice {
  ActionSet subset;
  Eigen::VectorXd theta_tilde;
  double score = 0.0;
};

// Scores every size-k subset by the ellipsoidal surrogate
//   psi' theta_hat + gamma * |psi|_{H^{-1}}
// (the exact set C_t has no tractable joint maximizer; the exact membership
// test above remains available for coverage checks). Returns the argmax
// subset (lexicographic tie-break) and theta_tilde = theta_hat +
// gamma H^{-1} psi / |psi|_{H^{-1}} projected onto |theta| <= V.
OptimisticChoice optimistic_select(const std::vector<Eigen::VectorXd>& features, int k,
                                   const MleState& state, double v_bound,
                                   double enumeration_cap = 1e6);

struct MleExpConfig {
  double delta = 0.01;  // harness default: 1/T
  double tol = 1e-9;
  std::optional<double> lambda_override;
  std::optional<double> gamma_override;
  double enumeration_cap = 1e6;
};

struct MleExpState {
  MleHistory history;
  MleState mle;
  std::int64_t round = 0;  // completed rounds
  double l_star = 1.0;     // L* the schedules run with
  double m1 = 1.0;         // M1 = L*/sqrt(2)

  static MleExpState init(const ExpLinearModel& model, const MleExpConfig& config);
};

struct RoundOutcome {
  ActionSet subset;
  double loss = 0.0;
};

// One full round: schedules, MLE refit (warm-started), optimistic
// selection, loss draw, history append.
RoundOutcome run_round(const ExpLinearModel& model, MleExpState& state,
                       const MleExpConfig& config, Rng& rng);

}  // namespace kmax
