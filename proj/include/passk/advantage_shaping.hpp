// advantage_shaping.hpp: per-class advantage scores (A+, A-) and effective
// gradient weights (w+, w-) for every REINFORCE/RLOO/GRPO-style update on binary
// rewards, including the Pass@K reweightings and the reward-regularized variants.
//
// Every algorithm here assigns one score to all correct responses and one to all
// wrong responses of a group, so the per-example update is
//
//     (1/N) sum_i A_i grad_i  =  w+ * mean_grad(correct) - w- * mean_grad(wrong)
//
// with w+ = rho_hat * A+ and w- = -(1 - rho_hat) * A-.
//
// Global constants that are shared by every example are dropped: N/(N-1) for the
// RLOO family and K for the REINFORCE_K / RLOO_K family. `dropped_scale` returns
// the factor that reinstates them.
#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "passk/error.hpp"
#include "passk/reward_stats.hpp"

namespace passk {

enum class Algorithm {
  Reinforce,
  Rloo,
  Grpo,
  SkewR,
  ReinforceK,
  RlooK,
  GrpoK,
  GrpoTilde,
  MixTilde,
  MixDirect,
  BiasedPow,
  EntropyGrpo,
  PositiveCoeff,
};

inline constexpr std::array<Algorithm, 13> kAllAlgorithms = {
    Algorithm::Reinforce,  Algorithm::Rloo,      Algorithm::Grpo,      Algorithm::SkewR,
    Algorithm::ReinforceK, Algorithm::RlooK,     Algorithm::GrpoK,     Algorithm::GrpoTilde,
    Algorithm::MixTilde,   Algorithm::MixDirect, Algorithm::BiasedPow, Algorithm::EntropyGrpo,
    Algorithm::PositiveCoeff,
};

inline constexpr std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::Reinforce: return "reinforce";
    case Algorithm::Rloo: return "rloo";
    case Algorithm::Grpo: return "grpo";
    case Algorithm::SkewR: return "skew_r";
    case Algorithm::ReinforceK: return "reinforce_k";
    case Algorithm::RlooK: return "rloo_k";
    case Algorithm::GrpoK: return "grpo_k";
    case Algorithm::GrpoTilde: return "grpo_tilde";
    case Algorithm::MixTilde: return "mix_tilde";
    case Algorithm::MixDirect: return "mix_direct";
    case Algorithm::BiasedPow: return "biased_pow";
    case Algorithm::EntropyGrpo: return "entropy_grpo";
    case Algorithm::PositiveCoeff: return "positive_coeff";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view name) noexcept {
  for (Algorithm a : kAllAlgorithms) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

/// Families whose scores carry the 1/sqrt(rho_hat (1 - rho_hat)) normalization;
/// degenerate groups yield the zero pair for these.
inline constexpr bool is_variance_normalized(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::Grpo:
    case Algorithm::SkewR:
    case Algorithm::GrpoK:
    case Algorithm::GrpoTilde:
    case Algorithm::MixTilde:
    case Algorithm::MixDirect:
    case Algorithm::BiasedPow:
    case Algorithm::EntropyGrpo:
      return true;
    default:
      return false;
  }
}

/// Families built on the combinatorial estimators, which need k <= n.
inline constexpr bool needs_unbiased_k(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::ReinforceK:
    case Algorithm::RlooK:
    case Algorithm::GrpoK:
    case Algorithm::GrpoTilde:
    case Algorithm::MixTilde:
    case Algorithm::MixDirect:
    case Algorithm::PositiveCoeff:
      return true;
    default:
      return false;
  }
}

inline constexpr bool uses_k(Algorithm a) noexcept {
  return needs_unbiased_k(a) || a == Algorithm::BiasedPow;
}

/// Families with n+ A+ + n- A- = 0 on every group.
inline constexpr bool is_centered(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::Rloo:
    case Algorithm::Grpo:
    case Algorithm::GrpoTilde:
    case Algorithm::SkewR:
    case Algorithm::MixTilde:
    case Algorithm::BiasedPow:
    case Algorithm::EntropyGrpo:
      return true;
    default:
      return false;
  }
}

/// Families that subtract a baseline and therefore need at least two responses.
inline constexpr bool uses_baseline(Algorithm a) noexcept {
  return a != Algorithm::Reinforce && a != Algorithm::ReinforceK;
}

struct AlgorithmSpec {
  Algorithm id = Algorithm::Grpo;
  int k = 1;
  double lambda = 1.0;

  void validate() const {
    detail::require(k >= 1, "algorithm " + std::string(to_string(id)) + ": k must be >= 1");
    detail::require(lambda >= 0.0 && std::isfinite(lambda),
                    "algorithm " + std::string(to_string(id)) + ": lambda must be finite and >= 0");
  }
};

struct AdvantagePair {
  double a_plus = 0.0;
  double a_minus = 0.0;
  bool degenerate = false;
};

struct EffectiveWeights {
  double w_plus = 0.0;
  double w_minus = 0.0;
  bool degenerate = false;
};

struct OmegaTilde {
  double value = 0.0;
  bool degenerate = false;
};

/// Constant dropped from the estimator relative to the unbiased target:
/// N/(N-1) for RLOO, K N/(N-1) for RLOO_K, K for REINFORCE_K, 1 otherwise.
inline double dropped_scale(const AlgorithmSpec& alg, int n) {
  const double loo = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
  switch (alg.id) {
    case Algorithm::Rloo: return loo;
    case Algorithm::RlooK: return loo * alg.k;
    case Algorithm::ReinforceK: return static_cast<double>(alg.k);
    default: return 1.0;
  }
}

namespace detail {

/// Vanilla GRPO scores for 0 < rho < 1.
inline AdvantagePair grpo_scores(double rho) {
  return {std::sqrt((1.0 - rho) / rho), -std::sqrt(rho / (1.0 - rho)), false};
}

inline AdvantagePair scaled(const AdvantagePair& p, double s_plus, double s_minus) {
  return {s_plus * p.a_plus, s_minus * p.a_minus, p.degenerate};
}

}  // namespace detail

/// sqrt((1 - rho_K_hat) / rho_K_hat) * sqrt(rho_hat / (1 - rho_hat)). Exactly 1
/// at k = 1 and exactly 0 once N- < k (rho_K_hat = 1).
inline OmegaTilde omega_tilde(const GroupStats& stats, int k) {
  detail::require_k(stats, k);
  if (stats.degenerate()) return {0.0, true};
  if (k == 1) return {1.0, false};
  const double pk = pass_k_hat(stats, k);
  if (pk >= 1.0) return {0.0, false};
  const double rho = stats.rho_hat;
  return {std::sqrt((1.0 - pk) / pk) * std::sqrt(rho / (1.0 - rho)), false};
}

inline AdvantagePair advantage_pair(const AlgorithmSpec& alg, const GroupStats& stats) {
  alg.validate();
  if (needs_unbiased_k(alg.id)) detail::require_k(stats, alg.k);
  if (is_variance_normalized(alg.id) && stats.degenerate()) return {0.0, 0.0, true};

  const double rho = stats.rho_hat;
  switch (alg.id) {
    case Algorithm::Reinforce:
      return {1.0, 0.0, false};
    case Algorithm::ReinforceK:
      return {fail_loo_weights(stats, alg.k).f_plus, 0.0, false};
    case Algorithm::Rloo:
      return {1.0 - rho, -rho, false};
    case Algorithm::RlooK: {
      const auto f = fail_loo_weights(stats, alg.k);
      return {f.f_plus * (1.0 - rho), -f.f_minus * rho, false};
    }
    case Algorithm::Grpo:
      return detail::grpo_scores(rho);
    case Algorithm::SkewR:
      return detail::scaled(detail::grpo_scores(rho), 1.0 - rho, 1.0 - rho);
    case Algorithm::GrpoK: {
      const auto f = fail_loo_weights(stats, alg.k);
      return detail::scaled(detail::grpo_scores(rho), f.f_plus, f.f_minus);
    }
    case Algorithm::GrpoTilde: {
      const double w = omega_tilde(stats, alg.k).value;
      return detail::scaled(detail::grpo_scores(rho), w, w);
    }
    case Algorithm::MixTilde: {
      const double s = 1.0 - rho + rho * omega_tilde(stats, alg.k).value;
      return detail::scaled(detail::grpo_scores(rho), s, s);
    }
    case Algorithm::MixDirect: {
      const auto f = fail_loo_weights(stats, alg.k);
      return detail::scaled(detail::grpo_scores(rho), 1.0 - rho + rho * f.f_plus,
                            1.0 - rho + rho * f.f_minus);
    }
    case Algorithm::BiasedPow: {
      const double s = std::pow(1.0 - rho, alg.k - 1);
      return detail::scaled(detail::grpo_scores(rho), s, s);
    }
    case Algorithm::EntropyGrpo: {
      // Not clamped: the bracket turns negative for strong regularization.
      const double s = 1.0 - alg.lambda * std::sqrt(rho * (1.0 - rho)) * std::log(rho / (1.0 - rho));
      return detail::scaled(detail::grpo_scores(rho), s, s);
    }
    case Algorithm::PositiveCoeff:
      return {1.0, 1.0 - fail_loo_weights(stats, alg.k).f_minus, false};
  }
  throw InvalidInput("advantage_pair: unknown algorithm");
}

inline std::vector<double> per_response_advantages(const AlgorithmSpec& alg, const RewardBatch& batch) {
  const AdvantagePair p = advantage_pair(alg, summarize(batch));
  std::vector<double> out;
  out.reserve(batch.size());
  for (int r : batch.values()) out.push_back(r == 1 ? p.a_plus : p.a_minus);
  return out;
}

inline EffectiveWeights effective_weights(const AlgorithmSpec& alg, const GroupStats& stats) {
  const AdvantagePair p = advantage_pair(alg, stats);
  return {stats.rho_hat * p.a_plus, -(1.0 - stats.rho_hat) * p.a_minus, p.degenerate};
}

}  // namespace passk
