#pragma once

#include <string>
#include <vector>

#include "kmax/common.hpp"
#include "kmax/env_continuous.hpp"
#include "kmax/kmin_exp.hpp"

// Property suites behind `verify {lemmas|oracle|concentration|mle}` and the
// acceptance binary. Each check runs at a configurable scale and reports
// the measured margin alongside pass/fail.

namespace kmax {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyScale {
  // discretization property checks
  int discretization_instances = 50;
  int discretization_subsets_per_instance = 5;
  int equivalence_grids = 1000;
  int bruteforce_grids = 200;
  int monotonicity_grids = 1000;
  int roundtrip_grids = 1000;
  int decomposition_samples = 500;
  // oracle cross-check
  int oracle_instances = 1000;
  int oracle_max_arms = 12;
  // biased concentration run
  int conc_arms = 6;
  int conc_k = 2;
  double conc_epsilon = 0.1;
  std::int64_t conc_horizon = 10000;
  int conc_seeds = 20;
  // MLE checks
  int mle_fd_instances = 100;
  int coverage_seeds = 50;
  int coverage_checkpoints = 10;
  std::int64_t coverage_horizon = 2000;
  double coverage_delta = 0.01;

  std::uint64_t base_seed = 20240601;
};

CheckResult check_discretization_error(const VerifyScale& scale);
CheckResult check_reward_equivalence(const VerifyScale& scale);
CheckResult check_bruteforce_agreement(const VerifyScale& scale);
CheckResult check_reward_monotonicity(const VerifyScale& scale);
CheckResult check_pq_roundtrip(const VerifyScale& scale);
CheckResult check_error_decomposition(const VerifyScale& scale);
CheckResult check_oracle_ratio(const VerifyScale& scale);
CheckResult check_biased_concentration(const VerifyScale& scale);
CheckResult check_mle_correctness(const VerifyScale& scale);
CheckResult check_mle_coverage(const VerifyScale& scale);

std::vector<CheckResult> verify_group(const std::string& group, const VerifyScale& scale);

// Reference instances used by the verification suites, the regret
// benchmarks and the shipped example configs.
//
// Six mixed-uniform arms with bi-Lipschitz constant 2: two top-heavy arms
// (the optimal pair) and four bottom-heavy ones.
std::vector<ContinuousArm> reference_kmax_arms();

// d=3, N=8, K=2 exponential model with nonnegative features and a clear
// best pair.
ExpLinearModel reference_kmin_model();

}  // namespace kmax
