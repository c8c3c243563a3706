// tabular_policy.hpp: a softmax policy over a finite response set per problem.
//
// Parameters are the logits themselves, so the score function is closed-form:
// d/dtheta_j log pi(i) = [j == i] - pi_j. Every gradient here is exact.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "passk/error.hpp"
#include "passk/reward_stats.hpp"
#include "passk/surrogates.hpp"

namespace passk {

using Gradient = std::vector<double>;

struct ProblemSpec {
  std::vector<bool> correct_mask;
  std::vector<double> initial_logits;

  std::size_t m() const noexcept { return correct_mask.size(); }

  void validate() const {
    detail::require(correct_mask.size() >= 2, "ProblemSpec: need at least two responses");
    detail::require(initial_logits.size() == correct_mask.size(),
                    "ProblemSpec: initial_logits and correct_mask differ in length");
    const auto n_correct = std::count(correct_mask.begin(), correct_mask.end(), true);
    detail::require(n_correct >= 1 && n_correct + 1 <= static_cast<long>(correct_mask.size()),
                    "ProblemSpec: need at least one correct and one wrong response");
    for (double x : initial_logits) detail::require(std::isfinite(x), "ProblemSpec: non-finite logit");
  }
};

class TabularPolicy {
 public:
  explicit TabularPolicy(std::vector<ProblemSpec> problems) : problems_(std::move(problems)) {
    logits_.reserve(problems_.size());
    for (const auto& p : problems_) {
      p.validate();
      logits_.push_back(p.initial_logits);
    }
  }

  std::size_t num_problems() const noexcept { return problems_.size(); }
  const ProblemSpec& problem(std::size_t p) const { return problems_.at(p); }
  std::span<const double> logits(std::size_t p) const { return logits_.at(p); }
  std::span<double> logits(std::size_t p) { return logits_.at(p); }

  /// theta_p += step * g
  void ascend(std::size_t p, std::span<const double> g, double step) {
    auto& th = logits_.at(p);
    detail::require(g.size() == th.size(), "TabularPolicy::ascend: gradient shape mismatch");
    for (std::size_t j = 0; j < th.size(); ++j) th[j] += step * g[j];
  }

 private:
  std::vector<ProblemSpec> problems_;
  std::vector<std::vector<double>> logits_;
};

inline std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) z += (p[j] = std::exp(logits[j] - mx));
  for (double& x : p) x /= z;
  return p;
}

inline std::vector<double> response_probs(const TabularPolicy& policy, std::size_t p) {
  return softmax(policy.logits(p));
}

namespace detail {

struct ClassMass {
  double correct = 0.0;
  double wrong = 0.0;
};

// Both masses are summed directly so neither loses precision to 1 - x.
inline ClassMass class_mass(const std::vector<double>& pi, const std::vector<bool>& mask) {
  ClassMass c;
  for (std::size_t j = 0; j < pi.size(); ++j) (mask[j] ? c.correct : c.wrong) += pi[j];
  return c;
}

}  // namespace detail

inline double rho(const TabularPolicy& policy, std::size_t p) {
  const auto pi = response_probs(policy, p);
  return detail::class_mass(pi, policy.problem(p).correct_mask).correct;
}

/// 1 - rho, summed over the wrong responses rather than by subtraction.
inline double fail_rate(const TabularPolicy& policy, std::size_t p) {
  const auto pi = response_probs(policy, p);
  return detail::class_mass(pi, policy.problem(p).correct_mask).wrong;
}

inline double rho_k(const TabularPolicy& policy, std::size_t p, int k) {
  return pass_k_of_rho(std::clamp(rho(policy, p), 0.0, 1.0), k);
}

inline Gradient logprob_grad(const TabularPolicy& policy, std::size_t p, std::size_t response) {
  auto g = response_probs(policy, p);
  detail::require(response < g.size(), "logprob_grad: response index out of range");
  for (double& x : g) x = -x;
  g[response] += 1.0;
  return g;
}

/// d rho / d theta_j = pi_j ([j correct] - rho).
inline Gradient exact_rho_grad(const TabularPolicy& policy, std::size_t p) {
  const auto pi = response_probs(policy, p);
  const auto& mask = policy.problem(p).correct_mask;
  const auto mass = detail::class_mass(pi, mask);
  Gradient g(pi.size());
  // [j correct] - rho equals wrong mass for correct j and -rho otherwise.
  for (std::size_t j = 0; j < pi.size(); ++j) g[j] = pi[j] * (mask[j] ? mass.wrong : -mass.correct);
  return g;
}

struct ConditionalGrads {
  Gradient mu_plus;
  Gradient mu_minus;
};

/// E[grad log pi(y) | y correct] and E[grad log pi(y) | y wrong].
inline ConditionalGrads conditional_mean_grads(const TabularPolicy& policy, std::size_t p) {
  const auto pi = response_probs(policy, p);
  const auto& mask = policy.problem(p).correct_mask;
  const auto mass = detail::class_mass(pi, mask);
  ConditionalGrads c{Gradient(pi.size()), Gradient(pi.size())};
  for (std::size_t j = 0; j < pi.size(); ++j) {
    c.mu_plus[j] = (mask[j] ? pi[j] / mass.correct : 0.0) - pi[j];
    c.mu_minus[j] = (mask[j] ? 0.0 : pi[j] / mass.wrong) - pi[j];
  }
  return c;
}

// ---------------------------------------------------------------------------
// Sampling

/// Deterministic random stream keyed by (run seed, problem, step). Streams for
/// different keys are independent of the order in which they are created.
class RngStream {
 public:
  static RngStream named(std::uint64_t run_seed, std::uint64_t problem, std::uint64_t step) {
    std::uint64_t key = mix(run_seed);
    key = mix(key ^ (problem + 0x632be59bd9b4e019ULL));
    key = mix(key ^ (step + 0x8cb92ba72f3d8dd7ULL));
    return RngStream(key);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
      acc += probs[j];
      if (u < acc) return j;
    }
    // u landed in the rounding gap above the last partial sum
    for (std::size_t j = probs.size(); j-- > 0;) {
      if (probs[j] > 0.0) return j;
    }
    return probs.size() - 1;
  }

 private:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {  // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
};

struct SampledBatch {
  std::vector<std::size_t> responses;
  RewardBatch rewards;
};

inline SampledBatch sample_batch(const TabularPolicy& policy, std::size_t p, int n, RngStream& rng) {
  detail::require(n >= 1, "sample_batch: n must be >= 1");
  const auto pi = response_probs(policy, p);
  const auto& mask = policy.problem(p).correct_mask;
  std::vector<std::size_t> idx(static_cast<std::size_t>(n));
  std::vector<int> r(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    idx[i] = rng.categorical(pi);
    r[i] = mask[idx[i]] ? 1 : 0;
  }
  return {std::move(idx), RewardBatch(std::move(r))};
}

}  // namespace passk
