// reward_stats.hpp: empirical statistics of one sampled group of binary rewards.
//
// All Pass@K quantities are ratios of binomial coefficients C(a, k) / C(b, k)
// evaluated as running products of (a - j) / (b - j). The conventions
// C(a, k) = 0 for a < k and C(a, 0) = 1 are applied before any division, so
// the leave-one-out weights hit exact zeros when N- < K - 1.
//
// The templates accept any field type with integer construction and the four
// arithmetic operators; the test suite instantiates them with an exact
// rational type to certify identities bit-for-bit.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "passk/error.hpp"

namespace passk {

class RewardBatch {
 public:
  RewardBatch() = delete;

  explicit RewardBatch(std::vector<int> rewards) : rewards_(std::move(rewards)) {
    detail::require(!rewards_.empty(), "RewardBatch: empty batch");
    for (int r : rewards_) {
      detail::require(r == 0 || r == 1, "RewardBatch: rewards must be 0 or 1");
    }
  }

  std::size_t size() const noexcept { return rewards_.size(); }
  int operator[](std::size_t i) const { return rewards_[i]; }
  std::span<const int> values() const noexcept { return rewards_; }

 private:
  std::vector<int> rewards_;
};

struct GroupStats {
  int n = 0;
  int n_plus = 0;
  int n_minus = 0;
  double rho_hat = 0.0;

  static GroupStats from_counts(int n, int n_plus) {
    detail::require(n >= 1, "GroupStats: n must be >= 1");
    detail::require(n_plus >= 0 && n_plus <= n, "GroupStats: n_plus must lie in [0, n]");
    return GroupStats{n, n_plus, n - n_plus, static_cast<double>(n_plus) / static_cast<double>(n)};
  }

  bool degenerate() const noexcept { return n_plus == 0 || n_minus == 0; }
};

inline GroupStats summarize(const RewardBatch& batch) {
  int n_plus = 0;
  for (int r : batch.values()) n_plus += r;
  return GroupStats::from_counts(static_cast<int>(batch.size()), n_plus);
}

/// C(a, k) / C(b, k) with C(a, k) = 0 for a < k (including a < 0) and C(., 0) = 1.
/// Requires b >= k >= 0.
template <class Real = double>
Real binomial_ratio(int a, int b, int k) {
  if (k == 0) return Real(1);
  if (a < k) return Real(0);
  Real r(1);
  for (int j = 0; j < k; ++j) {
    r *= Real(a - j) / Real(b - j);
  }
  return r;
}

namespace detail {

inline void require_k(const GroupStats& stats, int k) {
  if (k < 1 || k > stats.n) {
    throw InvalidInput("unbiased Pass@K estimator needs 1 <= k <= n (got k=" + std::to_string(k) +
                       ", n=" + std::to_string(stats.n) + ")");
  }
}

}  // namespace detail

/// Unbiased Pass@K estimate 1 - C(N-, K) / C(N, K). At k = 1 this returns
/// n_plus / n bit-identically to `rho_hat`.
template <class Real = double>
Real pass_k_hat(const GroupStats& stats, int k) {
  detail::require_k(stats, k);
  if (k == 1) return Real(stats.n_plus) / Real(stats.n);
  return Real(1) - binomial_ratio<Real>(stats.n_minus, stats.n, k);
}

template <class Real = double>
struct LooWeights {
  Real f_plus;
  Real f_minus;
};

/// Leave-one-out Fail@(K-1) estimates seen by a correct (f_plus) and a wrong
/// (f_minus) response: C(N-, K-1) / C(N-1, K-1) and C(N- - 1, K-1) / C(N-1, K-1).
template <class Real = double>
LooWeights<Real> fail_loo_weights(const GroupStats& stats, int k) {
  detail::require_k(stats, k);
  return {binomial_ratio<Real>(stats.n_minus, stats.n - 1, k - 1),
          binomial_ratio<Real>(stats.n_minus - 1, stats.n - 1, k - 1)};
}

struct PassKStats {
  int k = 1;
  double pass_k_hat = 0.0;
  double f_plus = 1.0;
  double f_minus = 1.0;
};

inline PassKStats pass_k_stats(const GroupStats& stats, int k) {
  const auto f = fail_loo_weights(stats, k);
  return PassKStats{k, pass_k_hat(stats, k), f.f_plus, f.f_minus};
}

}  // namespace passk
