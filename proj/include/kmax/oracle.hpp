#pragma once

#include "kmax/common.hpp"
#include "kmax/discretize.hpp"

// Offline maximization oracles for the discrete K-Max problem. Both return
// a size-K subset together with its discrete reward and the approximation
// factor the implementation certifies. At desk scale exact enumeration
// replaces the polynomial-time approximation scheme the alpha-contract was
// originally stated for; it certifies factor 1, which dominates any
// alpha < 1.

namespace kmax {

struct OracleResult {
  ActionSet subset;
  double value = 0.0;
  double approx_factor = 1.0;
};

enum class OracleChoice { exact, greedy };

// True argmax of discrete_reward over all size-k subsets, lexicographically
// smallest among ties. Throws CapacityError when C(N, k) exceeds
// enumeration_cap (use greedy_oracle at that scale).
OracleResult exact_oracle(const ProbGrid& p, int k, double enumeration_cap = 1e6);

// K marginal-gain-maximizing additions; certifies the (1 - 1/e) factor that
// submodularity of the expected maximum guarantees. Unsuitable as the
// in-loop oracle when regret is measured against the exact optimum.
OracleResult greedy_oracle(const ProbGrid& p, int k);

OracleResult run_oracle(OracleChoice choice, const ProbGrid& p, int k,
                        double enumeration_cap = 1e6);

}  // namespace kmax
