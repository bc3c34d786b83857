#include "kmax/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kmax {

ActionSet Rng::sample_subset(int n, int k) {
  if (k < 0 || k > n) throw std::invalid_argument("sample_subset: need 0 <= k <= n");
  // Partial Fisher-Yates over an index pool.
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  ActionSet out(k);
  for (int i = 0; i < k; ++i) {
    int j = i + uniform_below(n - i);
    std::swap(pool[i], pool[j]);
    out[i] = pool[i];
  }
  std::sort(out.begin(), out.end());
  return out;
}

void require_valid_action(const ActionSet& s, int n) {
  if (s.empty()) throw std::invalid_argument("action set must be nonempty");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0 || s[i] >= n) throw std::invalid_argument("arm index out of range");
    if (i > 0 && s[i] <= s[i - 1])
      throw std::invalid_argument("action set must be sorted and duplicate-free");
  }
}

ActionSet full_set(int n) {
  ActionSet s(n);
  for (int i = 0; i < n; ++i) s[i] = i;
  return s;
}

double subset_count(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (int i = 1; i <= k; ++i) {
    c *= static_cast<double>(n - k + i) / static_cast<double>(i);
    if (!std::isfinite(c)) return std::numeric_limits<double>::infinity();
  }
  return c;
}

}  // namespace kmax
