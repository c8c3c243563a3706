// oracle.hpp: brute-force verifiers used by the test suites and `passk verify`.
//
// Two independent routes compute the exact expectation of an algorithm's
// empirical gradient over the randomness of the sampled group:
//
//   expected_gradient         marginalizes over the count N+ ~ Binomial(N, rho),
//                             using exact conditional mean score functions;
//   full_enumeration_gradient sums over every ordered tuple of N responses.
//
// The first is exact because the scores depend on the group only through N+ and
// responses are exchangeable given their rewards. The second makes no such
// assumption and exists to cross-check the first.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "passk/advantage_shaping.hpp"
#include "passk/error.hpp"
#include "passk/reward_stats.hpp"
#include "passk/surrogates.hpp"
#include "passk/tabular_policy.hpp"

namespace passk::oracle {

/// Maps (algorithm, group stats) to advantage scores. Defaults to
/// passk::advantage_pair; verification suites swap it out to prove that a
/// broken rule is caught.
using AdvantageFn = std::function<AdvantagePair(const AlgorithmSpec&, const GroupStats&)>;

inline AdvantageFn default_advantages() {
  return [](const AlgorithmSpec& a, const GroupStats& s) { return advantage_pair(a, s); };
}

enum class ToleranceKind { Absolute, Relative };

struct OracleReport {
  std::string check;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  double value = 0.0;
  double target = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  double tolerance = 0.0;
  ToleranceKind kind = ToleranceKind::Absolute;
  bool pass = false;
};

inline OracleReport make_report(std::string check, nlohmann::ordered_json params, double value, double target,
                                double tolerance, ToleranceKind kind) {
  OracleReport r;
  r.check = std::move(check);
  r.params = std::move(params);
  r.value = value;
  r.target = target;
  r.abs_err = std::abs(value - target);
  r.rel_err = target != 0.0 ? r.abs_err / std::abs(target) : r.abs_err;
  r.tolerance = tolerance;
  r.kind = kind;
  const double err = kind == ToleranceKind::Absolute ? r.abs_err : r.rel_err;
  r.pass = std::isfinite(value) && err <= tolerance;
  return r;
}

/// Report for vector-valued checks: value/target are the components with the
/// largest absolute discrepancy; rel_err is relative to the largest target entry.
inline OracleReport make_vector_report(std::string check, nlohmann::ordered_json params,
                                       const std::vector<double>& value, const std::vector<double>& target,
                                       double tolerance, ToleranceKind kind) {
  detail::require(value.size() == target.size(), "make_vector_report: shape mismatch");
  std::size_t worst = 0;
  double worst_err = -1.0, scale = 0.0;
  bool finite = true;
  for (std::size_t j = 0; j < value.size(); ++j) {
    finite = finite && std::isfinite(value[j]);
    const double e = std::abs(value[j] - target[j]);
    if (e > worst_err) worst_err = e, worst = j;
    scale = std::max(scale, std::abs(target[j]));
  }
  OracleReport r;
  r.check = std::move(check);
  r.params = std::move(params);
  r.value = value.empty() ? 0.0 : value[worst];
  r.target = target.empty() ? 0.0 : target[worst];
  r.abs_err = std::max(worst_err, 0.0);
  r.rel_err = scale > 0.0 ? r.abs_err / scale : r.abs_err;
  r.tolerance = tolerance;
  r.kind = kind;
  r.pass = finite && (kind == ToleranceKind::Absolute ? r.abs_err : r.rel_err) <= tolerance;
  return r;
}

inline nlohmann::ordered_json to_json(const OracleReport& r) {
  nlohmann::ordered_json j;
  j["check"] = r.check;
  j["params"] = r.params;
  j["value"] = r.value;
  j["target"] = r.target;
  j["abs_err"] = r.abs_err;
  j["rel_err"] = r.rel_err;
  j["tolerance"] = r.tolerance;
  j["tolerance_kind"] = r.kind == ToleranceKind::Absolute ? "abs" : "rel";
  j["pass"] = r.pass;
  return j;
}

// ---------------------------------------------------------------------------
// Binomial expectations

namespace detail {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// C(n, m) exactly representable for n <= 56; beyond that switch to log space.
inline constexpr int kExactBinomialLimit = 56;

inline double binomial_pmf(int n, int m, double rho) {
  if (rho <= 0.0) return m == 0 ? 1.0 : 0.0;
  if (rho >= 1.0) return m == n ? 1.0 : 0.0;
  if (n <= kExactBinomialLimit) {
    double c = 1.0;
    for (int j = 1; j <= std::min(m, n - m); ++j) c = c * (n - std::min(m, n - m) + j) / j;
    return c * std::pow(rho, m) * std::pow(1.0 - rho, n - m);
  }
  const double log_c = std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0);
  return std::exp(log_c + m * std::log(rho) + (n - m) * std::log1p(-rho));
}

}  // namespace detail

/// sum_{m=0..n} Binomial(n, rho)(m) f(n, m).
template <class F>
double expected_scalar_estimator(const F& f, double rho, int n) {
  passk::detail::require(n >= 1, "expected_scalar_estimator: n must be >= 1");
  passk::detail::require(rho >= 0.0 && rho <= 1.0, "expected_scalar_estimator: rho outside [0, 1]");
  detail::CompensatedSum acc;
  for (int m = 0; m <= n; ++m) {
    const double w = detail::binomial_pmf(n, m, rho);
    if (w != 0.0) acc.add(w * f(n, m));
  }
  return acc.value();
}

// ---------------------------------------------------------------------------
// Expected gradients

inline Gradient expected_gradient(const AlgorithmSpec& alg, const TabularPolicy& policy, std::size_t problem,
                                  int n, const AdvantageFn& advantages = default_advantages()) {
  passk::detail::require(n >= 1, "expected_gradient: n must be >= 1");
  if (needs_unbiased_k(alg.id) && alg.k > n) {
    throw InvalidInput("expected_gradient: k > n for an unbiased Pass@K family");
  }
  const double r = rho(policy, problem);
  const auto cg = conditional_mean_grads(policy, problem);
  const std::size_t dim = cg.mu_plus.size();
  std::vector<detail::CompensatedSum> acc(dim);
  for (int m = 0; m <= n; ++m) {
    const double w = detail::binomial_pmf(n, m, r);
    if (w == 0.0) continue;
    const GroupStats s = GroupStats::from_counts(n, m);
    const AdvantagePair a = advantages(alg, s);
    const double c_plus = w * s.rho_hat * a.a_plus;
    const double c_minus = w * (1.0 - s.rho_hat) * a.a_minus;
    for (std::size_t j = 0; j < dim; ++j) {
      if (m > 0) acc[j].add(c_plus * cg.mu_plus[j]);
      if (m < n) acc[j].add(c_minus * cg.mu_minus[j]);
    }
  }
  Gradient g(dim);
  for (std::size_t j = 0; j < dim; ++j) g[j] = acc[j].value();
  return g;
}

inline constexpr std::uint64_t kMaxEnumeratedTuples = std::uint64_t{1} << 20;

inline Gradient full_enumeration_gradient(const AlgorithmSpec& alg, const TabularPolicy& policy,
                                          std::size_t problem, int n,
                                          const AdvantageFn& advantages = default_advantages()) {
  passk::detail::require(n >= 1, "full_enumeration_gradient: n must be >= 1");
  if (needs_unbiased_k(alg.id) && alg.k > n) {
    throw InvalidInput("full_enumeration_gradient: k > n for an unbiased Pass@K family");
  }
  const auto pi = response_probs(policy, problem);
  const auto& mask = policy.problem(problem).correct_mask;
  const std::size_t m = pi.size();
  std::uint64_t tuples = 1;
  for (int i = 0; i < n; ++i) {
    tuples *= m;
    passk::detail::require(tuples <= kMaxEnumeratedTuples, "full_enumeration_gradient: m^n exceeds 2^20");
  }
  std::vector<Gradient> scores(m);
  for (std::size_t y = 0; y < m; ++y) scores[y] = logprob_grad(policy, problem, y);

  std::vector<detail::CompensatedSum> acc(m);
  std::vector<std::size_t> tuple(static_cast<std::size_t>(n), 0);
  for (std::uint64_t t = 0; t < tuples; ++t) {
    double prob = 1.0;
    int n_plus = 0;
    for (std::size_t y : tuple) {
      prob *= pi[y];
      n_plus += mask[y] ? 1 : 0;
    }
    if (prob != 0.0) {
      const AdvantagePair a = advantages(alg, GroupStats::from_counts(n, n_plus));
      for (std::size_t y : tuple) {
        const double coef = prob * (mask[y] ? a.a_plus : a.a_minus) / n;
        for (std::size_t j = 0; j < m; ++j) acc[j].add(coef * scores[y][j]);
      }
    }
    for (std::size_t i = 0; i < tuple.size() && ++tuple[i] == m; ++i) tuple[i] = 0;
  }
  Gradient g(m);
  for (std::size_t j = 0; j < m; ++j) g[j] = acc[j].value();
  return g;
}

// ---------------------------------------------------------------------------
// Population limits

/// Effective weights of `alg` on a group of size n_large with
/// n_plus = round(n_large * rho).
inline EffectiveWeights population_limit_weights(const AlgorithmSpec& alg, double rho, int n_large) {
  passk::detail::require(rho >= 0.0 && rho <= 1.0, "population_limit_weights: rho outside [0, 1]");
  const int n_plus = static_cast<int>(std::lround(rho * n_large));
  return effective_weights(alg, GroupStats::from_counts(n_large, n_plus));
}

struct PopulationSurrogate {
  SurrogateSpec surrogate;
  double scale = 1.0;  // population weight = scale * F'(rho) * rho (1 - rho)
};

/// The surrogate whose population gradient each algorithm ascends, with the
/// constant relating the algorithm's (factor-dropped) weights to F'(rho) rho (1-rho).
/// Mixtures have no fixed surrogate and return nullopt.
inline std::optional<PopulationSurrogate> population_surrogate(const AlgorithmSpec& alg) {
  switch (alg.id) {
    case Algorithm::Rloo: return PopulationSurrogate{{Surrogate::Identity, 1, 0.0}, 1.0};
    case Algorithm::Grpo: return PopulationSurrogate{{Surrogate::Arcsin01, 1, 0.0}, 1.0};
    case Algorithm::SkewR: return PopulationSurrogate{{Surrogate::SkewrReg, 1, 0.0}, 1.0};
    case Algorithm::RlooK: return PopulationSurrogate{{Surrogate::PassK, alg.k, 0.0}, 1.0 / alg.k};
    case Algorithm::GrpoK:
    case Algorithm::BiasedPow: return PopulationSurrogate{{Surrogate::IncBetaK, alg.k, 0.0}, 1.0};
    case Algorithm::GrpoTilde: return PopulationSurrogate{{Surrogate::ArcsinPassK, alg.k, 0.0}, 1.0};
    case Algorithm::EntropyGrpo: return PopulationSurrogate{{Surrogate::EntropyReg, 1, alg.lambda}, 1.0};
    default: return std::nullopt;
  }
}

/// scale * F'(rho) * rho (1 - rho): the common weight on both response classes in
/// the infinite-group limit.
inline double predicted_population_weight(const AlgorithmSpec& alg, double rho) {
  const auto ps = population_surrogate(alg);
  if (!ps) throw InvalidInput("predicted_population_weight: no fixed surrogate for " + std::string(to_string(alg.id)));
  return ps->scale * surrogate_derivative(ps->surrogate, rho) * rho * (1.0 - rho);
}

// ---------------------------------------------------------------------------
// Finite differences

/// Central difference of F at rho with step h. Above rho = 1/2 it differences
/// -surrogate_gap(q) instead, which is the same function minus a constant but
/// does not lose the small slope to rounding where F is nearly flat.
inline double central_difference(const SurrogateSpec& s, double rho, double h) {
  if (rho <= 0.5) return (surrogate_eval(s, rho + h) - surrogate_eval(s, rho - h)) / (2.0 * h);
  const double q = 1.0 - rho;
  return (surrogate_gap(s, q + h) - surrogate_gap(s, q - h)) / (2.0 * h);
}

/// Central differences of F(rho(theta)) in every logit versus F'(rho) * grad rho.
/// Past rho = 1/2 the perturbed values are taken as -surrogate_gap(1 - rho),
/// with 1 - rho summed from the wrong responses.
inline OracleReport finite_diff_check(const SurrogateSpec& s, const TabularPolicy& policy, std::size_t problem,
                                      double h = 1e-6, double tolerance = 1e-5) {
  const double r = rho(policy, problem);
  const bool upper = r > 0.5;
  const auto objective = [&](const TabularPolicy& p) {
    return upper ? -surrogate_gap(s, fail_rate(p, problem)) : surrogate_eval(s, rho(p, problem));
  };
  const double fprime = surrogate_derivative(s, r);
  Gradient analytic = exact_rho_grad(policy, problem);
  for (double& x : analytic) x *= fprime;

  Gradient numeric(analytic.size());
  TabularPolicy probe = policy;
  for (std::size_t j = 0; j < numeric.size(); ++j) {
    auto th = probe.logits(problem);
    const double saved = th[j];
    th[j] = saved + h;
    const double up = objective(probe);
    th[j] = saved - h;
    const double down = objective(probe);
    th[j] = saved;
    numeric[j] = (up - down) / (2.0 * h);
  }
  nlohmann::ordered_json params{{"surrogate", to_string(s.id)}, {"k", s.k}, {"lambda", s.lambda}, {"rho", r}};
  return make_vector_report("finite_diff", std::move(params), numeric, analytic, tolerance, ToleranceKind::Relative);
}

}  // namespace passk::oracle
