#include "kmax/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kmax {

OracleResult exact_oracle(const ProbGrid& p, int k, double enumeration_cap) {
  const int n = p.arms();
  if (k < 1 || k > n) throw std::invalid_argument("exact_oracle: need 1 <= k <= N");
  double count = subset_count(n, k);
  if (count > enumeration_cap) {
    std::ostringstream msg;
    msg << "exact_oracle: C(" << n << "," << k << ") = " << count << " exceeds the cap of "
        << enumeration_cap << "; use greedy_oracle at this scale";
    throw CapacityError(msg.str());
  }
  OracleResult best;
  best.value = -1.0;
  for_each_subset(n, k, [&](const ActionSet& s) {
    double value = discrete_reward(s, p);
    if (value > best.value) {  // strict: ties keep the lexicographically first subset
      best.value = value;
      best.subset = s;
    }
  });
  best.approx_factor = 1.0;
  return best;
}

OracleResult greedy_oracle(const ProbGrid& p, int k) {
  const int n = p.arms();
  if (k < 1 || k > n) throw std::invalid_argument("greedy_oracle: need 1 <= k <= N");
  ActionSet chosen;
  std::vector<bool> used(n, false);
  double current = 0.0;
  for (int step = 0; step < k; ++step) {
    int best_arm = -1;
    double best_value = -1.0;
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      ActionSet candidate = chosen;
      candidate.insert(std::lower_bound(candidate.begin(), candidate.end(), i), i);
      double value = discrete_reward(candidate, p);
      if (value > best_value) {
        best_value = value;
        best_arm = i;
      }
    }
    used[best_arm] = true;
    chosen.insert(std::lower_bound(chosen.begin(), chosen.end(), best_arm), best_arm);
    current = best_value;
  }
  return OracleResult{std::move(chosen), current, 1.0 - std::exp(-1.0)};
}

OracleResult run_oracle(OracleChoice choice, const ProbGrid& p, int k, double enumeration_cap) {
  return choice == OracleChoice::exact ? exact_oracle(p, k, enumeration_cap)
                                       : greedy_oracle(p, k);
}

}  // namespace kmax
