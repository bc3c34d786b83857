#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

// Shared plumbing for the bandit library: a reproducible random stream,
// action-set helpers and size-K subset enumeration.

namespace kmax {

// An action is a sorted set of distinct arm indices (0-based).
using ActionSet = std::vector<int>;

// Thrown when a combinatorial enumeration would exceed its configured cap.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic random stream. The uniform mappings are spelled out here
// (instead of std::uniform_*_distribution) so that a (seed, call sequence)
// pair produces the same draws on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1): never returns an exact 0 or 1, safe under log().
  double uniform_open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). bound must be positive.
  int uniform_below(int bound) {
    if (bound <= 0) throw std::invalid_argument("Rng::uniform_below: bound must be positive");
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(bound)) >> 64);
  }

  // Uniform size-k subset of {0,...,n-1}, returned sorted.
  ActionSet sample_subset(int n, int k);

 private:
  std::mt19937_64 engine_;
};

// Throws std::invalid_argument unless s is sorted, duplicate-free and within [0, n).
void require_valid_action(const ActionSet& s, int n);

ActionSet full_set(int n);

// C(n, k) computed in double with saturation; never overflows.
double subset_count(int n, int k);

// Calls fn(const ActionSet&) for every size-k subset of {0,...,n-1} in
// lexicographic order.
template <typename F>
void for_each_subset(int n, int k, F&& fn) {
  if (k < 0 || k > n) throw std::invalid_argument("for_each_subset: need 0 <= k <= n");
  ActionSet s(k);
  for (int i = 0; i < k; ++i) s[i] = i;
  if (k == 0) {
    fn(static_cast<const ActionSet&>(s));
    return;
  }
  while (true) {
    fn(static_cast<const ActionSet&>(s));
    int i = k - 1;
    while (i >= 0 && s[i] == n - k + i) --i;
    if (i < 0) break;
    ++s[i];
    for (int j = i + 1; j < k; ++j) s[j] = s[j - 1] + 1;
  }
}

// Dense row-major table, used for the N x M probability and counter grids.
template <typename T>
class Table {
 public:
  Table() = default;
  Table(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("Table: negative shape");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  T& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool same_shape(const Table& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

}  // namespace kmax
