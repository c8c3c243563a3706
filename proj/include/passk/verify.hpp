// verify.hpp: the verification suites behind `passk verify`.
//
// Each suite returns OracleReport rows. Sweeps over many inputs are folded into
// one row per (check, parameter block) that keeps the worst case and a trial
// count, so the JSONL stays readable.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "passk/advantage_shaping.hpp"
#include "passk/oracle.hpp"
#include "passk/reward_stats.hpp"
#include "passk/surrogates.hpp"
#include "passk/tabular_policy.hpp"

namespace passk::verify {

using oracle::OracleReport;
using oracle::ToleranceKind;
using json = nlohmann::ordered_json;

struct Tolerances {
  double exact = 1e-12;        // identities that hold up to rounding
  double identity = 1e-10;     // identities involving quadrature
  double finite_diff = 1e-5;   // relative, central differences with h = 1e-6
  double population = 1e-2;    // relative, finite-n weights vs. population limit
};

struct Options {
  std::vector<std::string> suites;  // empty = every suite
  std::vector<std::uint64_t> seeds = {1};
  int policies_per_seed = 100;
  Tolerances tol;
  oracle::AdvantageFn advantages = oracle::default_advantages();
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"estimators", "shaping",    "conditional_gradient",
                                                 "unbiasedness", "population", "surrogates"};
  return names;
}

/// Random problem with m responses: logits uniform in [-2, 2], at least one
/// correct and one wrong response.
inline ProblemSpec random_problem(RngStream& rng, std::size_t m) {
  ProblemSpec p;
  p.correct_mask.assign(m, false);
  p.initial_logits.resize(m);
  const auto n_correct = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(m - 1));
  for (std::size_t j = 0; j < n_correct; ++j) p.correct_mask[j] = true;
  // Fisher-Yates so the correct responses are not always first
  for (std::size_t j = m - 1; j > 0; --j) {
    const auto s = static_cast<std::size_t>(rng.uniform() * static_cast<double>(j + 1));
    const bool tmp = p.correct_mask[j];
    p.correct_mask[j] = p.correct_mask[s];
    p.correct_mask[s] = tmp;
  }
  for (double& x : p.initial_logits) x = 4.0 * rng.uniform() - 2.0;
  return p;
}

/// Random policies for a seed; `m_max` bounds the response count (>= 2).
inline std::vector<TabularPolicy> random_policies(std::uint64_t seed, int count, std::size_t m_max) {
  std::vector<TabularPolicy> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) {
    auto rng = RngStream::named(seed, static_cast<std::uint64_t>(t), 0x7e57);
    const std::size_t m = 2 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(m_max - 1));
    out.emplace_back(std::vector<ProblemSpec>{random_problem(rng, m)});
  }
  return out;
}

/// Folds many reports of one check into the worst one (largest error / tolerance).
class WorstCase {
 public:
  void add(OracleReport r) {
    ++trials_;
    all_pass_ = all_pass_ && r.pass;
    const double err = r.kind == ToleranceKind::Absolute ? r.abs_err : r.rel_err;
    const double score = r.pass ? (r.tolerance > 0 ? err / r.tolerance : err) : 1e300;
    if (!worst_ || score > score_) {
      worst_ = std::move(r);
      score_ = score;
    }
  }

  void flush_into(std::vector<OracleReport>& out) {
    if (!worst_) return;
    worst_->params["trials"] = trials_;
    worst_->pass = all_pass_;
    out.push_back(std::move(*worst_));
    worst_.reset();
    trials_ = 0;
    all_pass_ = true;
  }

 private:
  std::optional<OracleReport> worst_;
  double score_ = 0.0;
  int trials_ = 0;
  bool all_pass_ = true;
};

/// Keyed collection of WorstCase accumulators, flushed in key order.
class WorstCases {
 public:
  void add(const std::string& key, OracleReport r) { by_key_[key].add(std::move(r)); }
  void flush_into(std::vector<OracleReport>& out) {
    for (auto& [_, w] : by_key_) w.flush_into(out);
    by_key_.clear();
  }

 private:
  std::map<std::string, WorstCase> by_key_;
};

inline OracleReport abs_check(std::string name, json params, double value, double target, double tol) {
  return oracle::make_report(std::move(name), std::move(params), value, target, tol, ToleranceKind::Absolute);
}

inline OracleReport rel_check(std::string name, json params, double value, double target, double tol) {
  return oracle::make_report(std::move(name), std::move(params), value, target, tol, ToleranceKind::Relative);
}

/// A pass/fail predicate reported as value 1 (holds) vs target 1.
inline OracleReport predicate(std::string name, json params, bool holds) {
  return abs_check(std::move(name), std::move(params), holds ? 1.0 : 0.0, 1.0, 0.0);
}

inline std::vector<double> probability_grid(int lo_percent, int hi_percent, int step_percent) {
  std::vector<double> g;
  for (int i = lo_percent; i <= hi_percent; i += step_percent) g.push_back(i / 100.0);
  return g;
}

// ---------------------------------------------------------------------------
// estimators: Pass@K estimator identities and unbiasedness

/// Exact check of 1 - rho_K_hat = (1 - rho_hat) f- = (1 - rho_hat - (k-1)/n) f+
/// in rational arithmetic; returns the number of (n_minus, k) pairs that fail.
inline int loo_identity_failures(int n) {
  using boost::multiprecision::cpp_rational;
  int failures = 0;
  for (int n_minus = 0; n_minus <= n; ++n_minus) {
    const GroupStats s = GroupStats::from_counts(n, n - n_minus);
    const cpp_rational rho_hat(s.n_plus, n);
    for (int k = 1; k <= n; ++k) {
      const cpp_rational fail_k = cpp_rational(1) - pass_k_hat<cpp_rational>(s, k);
      const auto f = fail_loo_weights<cpp_rational>(s, k);
      bool ok = fail_k == (cpp_rational(1) - rho_hat) * f.f_minus;
      if (n_minus >= k - 1) ok = ok && fail_k == (cpp_rational(1) - rho_hat - cpp_rational(k - 1, n)) * f.f_plus;
      if (!ok) ++failures;
    }
  }
  return failures;
}

inline std::vector<OracleReport> suite_estimators(const Options& opt) {
  std::vector<OracleReport> out;
  for (int n = 1; n <= 64; ++n) {
    out.push_back(abs_check("loo_identity_exact", json{{"n", n}}, loo_identity_failures(n), 0.0, 0.0));
  }
  WorstCases unbiased;
  for (int n = 1; n <= 16; ++n) {
    for (int k = 1; k <= std::min(n, 8); ++k) {
      for (double rho : probability_grid(5, 95, 5)) {
        const double e = oracle::expected_scalar_estimator(
            [k](int nn, int m) { return pass_k_hat(GroupStats::from_counts(nn, m), k); }, rho, n);
        unbiased.add("n" + std::to_string(100 + n) + "k" + std::to_string(k),
                     abs_check("pass_k_hat_unbiased", json{{"n", n}, {"k", k}, {"rho", rho}}, e,
                               pass_k_of_rho(rho, k), opt.tol.exact));
      }
    }
  }
  unbiased.flush_into(out);

  WorstCase monotone;
  for (int n = 1; n <= 64; ++n) {
    for (int n_plus = 0; n_plus <= n; ++n_plus) {
      const GroupStats s = GroupStats::from_counts(n, n_plus);
      bool ok = pass_k_hat(s, 1) == s.rho_hat;
      for (int k = 2; k <= n; ++k) ok = ok && pass_k_hat(s, k) >= pass_k_hat(s, k - 1);
      monotone.add(predicate("pass_k_hat_monotone_in_k", json{{"n", n}, {"n_plus", n_plus}}, ok));
    }
  }
  monotone.flush_into(out);
  return out;
}

// ---------------------------------------------------------------------------
// shaping: structural properties of the advantage rules and the
// forward-engineering equivalences

inline std::vector<OracleReport> suite_shaping(const Options& opt) {
  const auto& adv = opt.advantages;
  const double tol = opt.tol.exact;
  std::vector<OracleReport> out;
  WorstCases acc;

  const auto weights = [&](const AlgorithmSpec& a, const GroupStats& s) {
    const AdvantagePair p = adv(a, s);
    return EffectiveWeights{s.rho_hat * p.a_plus, -(1.0 - s.rho_hat) * p.a_minus, p.degenerate};
  };

  for (int n = 2; n <= 16; ++n) {
    for (int n_plus = 0; n_plus <= n; ++n_plus) {
      const GroupStats s = GroupStats::from_counts(n, n_plus);
      const json at{{"n", n}, {"n_plus", n_plus}};
      const AdvantagePair grpo = adv({Algorithm::Grpo}, s);

      for (int k = 1; k <= std::min(n, 8); ++k) {
        json atk = at;
        atk["k"] = k;
        for (Algorithm a : kAllAlgorithms) {
          const AlgorithmSpec spec{a, k, 1.0};
          const AdvantagePair p = adv(spec, s);
          const std::string name(to_string(a));
          if (is_centered(a)) {
            json pa = atk;
            pa["algorithm"] = name;
            acc.add("centered/" + name,
                    abs_check("centered", pa, s.n_plus * p.a_plus + s.n_minus * p.a_minus, 0.0, tol));
          }
          if (is_variance_normalized(a) && s.degenerate()) {
            json pa = atk;
            pa["algorithm"] = name;
            acc.add("degenerate_zero/" + name,
                    predicate("degenerate_zero", pa, p.a_plus == 0.0 && p.a_minus == 0.0 && p.degenerate));
          }
        }

        // Pass@K reweightings: hard zeros and w+ >= w-
        for (Algorithm a : {Algorithm::GrpoK, Algorithm::RlooK}) {
          const EffectiveWeights w = weights({a, k}, s);
          json pa = atk;
          pa["algorithm"] = to_string(a);
          bool zeros = true;
          if (s.n_minus < k - 1) zeros = zeros && w.w_plus == 0.0;
          if (s.n_minus < k) zeros = zeros && w.w_minus == 0.0;
          acc.add("hard_zero/" + std::string(to_string(a)), predicate("hard_zero", pa, zeros));
          acc.add("asymmetry/" + std::string(to_string(a)),
                  predicate("w_plus_ge_w_minus", pa, w.w_plus >= w.w_minus - 1e-15));
        }

        if (!s.degenerate()) {
          // GRPO~ collapses to one weight on both classes
          const EffectiveWeights wt = weights({Algorithm::GrpoTilde, k}, s);
          const double pk = pass_k_hat(s, k);
          const double simplified = std::sqrt((1.0 - pk) / pk) * s.rho_hat;
          acc.add("grpo_tilde_simplification+", abs_check("grpo_tilde_simplification", atk, wt.w_plus, simplified, tol));
          acc.add("grpo_tilde_simplification-", abs_check("grpo_tilde_simplification", atk, wt.w_minus, simplified, tol));

          // direct mixture reduces to skew-R once both Pass@K scalers vanish
          if (s.n_minus < k - 1) {
            const AdvantagePair mix = adv({Algorithm::MixDirect, k}, s);
            const AdvantagePair skew = adv({Algorithm::SkewR, k}, s);
            acc.add("mix_envelope", predicate("mix_direct_envelope", atk,
                                              mix.a_plus == skew.a_plus && mix.a_minus == skew.a_minus));
          }
          if (s.n_minus < k) {
            const AdvantagePair mix = adv({Algorithm::MixTilde, k}, s);
            const AdvantagePair skew = adv({Algorithm::SkewR, k}, s);
            acc.add("mix_tilde_envelope",
                    abs_check("mix_tilde_envelope", atk,
                              std::max(std::abs(mix.a_plus - skew.a_plus), std::abs(mix.a_minus - skew.a_minus)),
                              0.0, tol));
          }
        }

        const AdvantagePair pos = adv({Algorithm::PositiveCoeff, k}, s);
        acc.add("positive_coeff_range",
                predicate("positive_coeff_wrong_in_unit_interval", atk,
                          pos.a_plus == 1.0 && pos.a_minus >= 0.0 && pos.a_minus <= 1.0 &&
                              (k != 1 || pos.a_minus == 0.0)));
      }

      // K = 1 collapse onto the 0/1 algorithms
      const AdvantagePair rloo = adv({Algorithm::Rloo}, s);
      const auto same = [](const AdvantagePair& x, const AdvantagePair& y) {
        return std::max(std::abs(x.a_plus - y.a_plus), std::abs(x.a_minus - y.a_minus));
      };
      acc.add("k1/rloo_k", abs_check("k1_collapse", json{{"algorithm", "rloo_k"}, {"n", n}, {"n_plus", n_plus}},
                                     same(adv({Algorithm::RlooK, 1}, s), rloo), 0.0, tol));
      for (Algorithm a : {Algorithm::GrpoK, Algorithm::GrpoTilde, Algorithm::BiasedPow, Algorithm::MixTilde,
                          Algorithm::MixDirect}) {
        acc.add("k1/" + std::string(to_string(a)),
                abs_check("k1_collapse", json{{"algorithm", to_string(a)}, {"n", n}, {"n_plus", n_plus}},
                          same(adv({a, 1}, s), grpo), 0.0, tol));
      }
      if (!s.degenerate()) {
        const AdvantagePair ent = adv({Algorithm::EntropyGrpo, 1, 2.0}, s);
        if (2 * n_plus == n) {
          acc.add("entropy_half", abs_check("entropy_grpo_at_half", at, same(ent, grpo), 0.0, tol));
        }
      }
    }
  }
  acc.flush_into(out);

  // Forward engineering: surrogate -> scores reproduces each shaped algorithm.
  WorstCases fwd;
  const int n = 16;
  for (int k : {1, 2, 4, 8}) {
    for (int n_plus = 1; n_plus < n; ++n_plus) {
      const GroupStats s = GroupStats::from_counts(n, n_plus);
      const json at{{"n", n}, {"n_plus", n_plus}, {"k", k}};
      const auto compare = [&](const std::string& key, Surrogate sur, const AlgorithmSpec& alg) {
        const AdvantagePair f = forward_engineer({sur, k, 1.0}, s);
        const AdvantagePair a = adv(alg, s);
        json p = at;
        p["surrogate"] = to_string(sur);
        p["algorithm"] = to_string(alg.id);
        fwd.add(key + "+", abs_check("forward_engineer", p, f.a_plus, a.a_plus, tol));
        fwd.add(key + "-", abs_check("forward_engineer", p, f.a_minus, a.a_minus, tol));
      };
      compare("arcsin_01", Surrogate::Arcsin01, {Algorithm::Grpo});
      compare("arcsin_pass_k", Surrogate::ArcsinPassK, {Algorithm::GrpoTilde, k});
      compare("skewr_reg", Surrogate::SkewrReg, {Algorithm::SkewR});
      compare("inc_beta_k", Surrogate::IncBetaK, {Algorithm::BiasedPow, k});
      compare("entropy_reg", Surrogate::EntropyReg, {Algorithm::EntropyGrpo, 1, 1.0});
    }
  }
  fwd.flush_into(out);
  return out;
}

// ---------------------------------------------------------------------------
// conditional_gradient: conditional-gradient identity on random tabular policies

inline std::vector<OracleReport> suite_conditional_gradient(const Options& opt) {
  std::vector<OracleReport> out;
  for (std::uint64_t seed : opt.seeds) {
    WorstCase identity, total;
    // two batches of the configured size so the default sweep covers 200 policies
    for (const auto& policy : random_policies(seed ^ 0x1e22a2ULL, 2 * opt.policies_per_seed, 8)) {
      const double r = rho(policy, 0);
      const auto cg = conditional_mean_grads(policy, 0);
      auto grad = exact_rho_grad(policy, 0);
      std::vector<double> diff(grad.size()), mean(grad.size(), 0.0);
      for (std::size_t j = 0; j < grad.size(); ++j) {
        diff[j] = cg.mu_plus[j] - cg.mu_minus[j];
        grad[j] /= r * (1.0 - r);
        mean[j] = r * cg.mu_plus[j] + (1.0 - r) * cg.mu_minus[j];
      }
      const json p{{"seed", seed}, {"m", grad.size()}, {"rho", r}};
      identity.add(oracle::make_vector_report("conditional_gradient_identity", p, diff, grad, opt.tol.exact,
                                              ToleranceKind::Absolute));
      total.add(oracle::make_vector_report("score_mean_zero", p, mean, std::vector<double>(mean.size(), 0.0),
                                           opt.tol.exact, ToleranceKind::Absolute));
    }
    identity.flush_into(out);
    total.flush_into(out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// unbiasedness: exact expectations of the unbiased estimators, and the
// cross-check between the two expectation routes

inline std::vector<OracleReport> suite_unbiasedness(const Options& opt) {
  std::vector<OracleReport> out;
  for (std::uint64_t seed : opt.seeds) {
    WorstCases acc;
    for (const auto& policy : random_policies(seed, opt.policies_per_seed, 6)) {
      const double r = rho(policy, 0);
      const Gradient grad = exact_rho_grad(policy, 0);
      const auto target = [&](double scale) {
        Gradient t = grad;
        for (double& x : t) x *= scale;
        return t;
      };
      const auto check = [&](const std::string& key, const AlgorithmSpec& alg, int n, const Gradient& want) {
        Gradient got = oracle::expected_gradient(alg, policy, 0, n, opt.advantages);
        const double c = dropped_scale(alg, n);
        for (double& x : got) x *= c;
        const json p{{"seed", seed}, {"algorithm", to_string(alg.id)}, {"n", n}, {"k", alg.k}, {"rho", r}};
        acc.add(key, oracle::make_vector_report("expected_gradient", p, got, want, opt.tol.exact,
                                                ToleranceKind::Absolute));
      };
      for (int n = 2; n <= 16; ++n) {
        check("rloo", {Algorithm::Rloo}, n, grad);
        check("reinforce", {Algorithm::Reinforce}, n, grad);
        for (int k = 1; k <= std::min(n, 8); ++k) {
          const double fail = std::pow(1.0 - r, k - 1);
          check("rloo_k", {Algorithm::RlooK, k}, n, target(k * fail));
          check("reinforce_k", {Algorithm::ReinforceK, k}, n, target(k * fail));
          check("positive_coeff", {Algorithm::PositiveCoeff, k}, n, target(fail));
        }
      }
    }
    acc.flush_into(out);

    // Second route: enumerate every ordered group.
    WorstCases cross;
    const int enum_policies = std::max(1, opt.policies_per_seed / 10);
    for (const auto& policy : random_policies(seed ^ 0xe4a3ULL, enum_policies, 4)) {
      for (int n = 1; n <= 6; ++n) {
        for (Algorithm a : kAllAlgorithms) {
          if (n < 2 && uses_baseline(a)) continue;
          for (int k = 1; k <= std::min(n, 3); ++k) {
            if (k > 1 && !uses_k(a)) break;
            const AlgorithmSpec alg{a, k, 1.0};
            const Gradient e = oracle::expected_gradient(alg, policy, 0, n, opt.advantages);
            const Gradient f = oracle::full_enumeration_gradient(alg, policy, 0, n, opt.advantages);
            const json p{{"seed", seed}, {"algorithm", to_string(a)}, {"n", n}, {"k", k}};
            cross.add(std::string(to_string(a)),
                      oracle::make_vector_report("enumeration_cross_check", p, e, f, opt.tol.exact,
                                                 ToleranceKind::Absolute));
          }
        }
      }
    }
    cross.flush_into(out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// population: finite-n effective weights against surrogate predictions

inline std::vector<OracleReport> suite_population(const Options& opt) {
  std::vector<OracleReport> out;
  WorstCases acc;
  const auto wrap = [&](const AlgorithmSpec& a, double rho, int n) {
    const int n_plus = static_cast<int>(std::lround(rho * n));
    const GroupStats s = GroupStats::from_counts(n, n_plus);
    const AdvantagePair p = opt.advantages(a, s);
    return std::pair{s, EffectiveWeights{s.rho_hat * p.a_plus, -(1.0 - s.rho_hat) * p.a_minus, p.degenerate}};
  };

  constexpr int kLarge = 1024;
  for (double rho : probability_grid(10, 90, 10)) {
    // Reverse-engineering limits, compared at the attained rate n_plus / n.
    for (int k : {1, 2}) {
      for (Algorithm a : {Algorithm::GrpoTilde, Algorithm::GrpoK}) {
        const AlgorithmSpec alg{a, k};
        const auto [s, w] = wrap(alg, rho, kLarge);
        const double pred = oracle::predicted_population_weight(alg, s.rho_hat);
        const json p{{"algorithm", to_string(a)}, {"k", k}, {"n", kLarge}, {"rho", rho}};
        const std::string key = "limit/" + std::string(to_string(a)) + "/k" + std::to_string(k);
        acc.add(key + "+", rel_check("population_limit", p, w.w_plus, pred, opt.tol.population));
        acc.add(key + "-", rel_check("population_limit", p, w.w_minus, pred, opt.tol.population));
      }
      // biased scaler approaches the unbiased reweighting
      const auto [s, wb] = wrap({Algorithm::BiasedPow, k}, rho, kLarge);
      const auto wk = wrap({Algorithm::GrpoK, k}, rho, kLarge).second;
      const json p{{"k", k}, {"n", kLarge}, {"rho", rho}};
      acc.add("biased_vs_grpo_k/k" + std::to_string(k) + "+",
              rel_check("biased_pow_vs_grpo_k", p, wb.w_plus, wk.w_plus, opt.tol.population));
      acc.add("biased_vs_grpo_k/k" + std::to_string(k) + "-",
              rel_check("biased_pow_vs_grpo_k", p, wb.w_minus, wk.w_minus, opt.tol.population));
      // the same scaler applied to RLOO against the unbiased RLOO_K weights
      const double scaler = std::pow(1.0 - s.rho_hat, k - 1);
      const auto wr = wrap({Algorithm::Rloo}, rho, kLarge).second;
      const auto wrk = wrap({Algorithm::RlooK, k}, rho, kLarge).second;
      acc.add("biased_vs_rloo_k/k" + std::to_string(k) + "+",
              rel_check("biased_scaler_vs_rloo_k", p, scaler * wr.w_plus, wrk.w_plus, opt.tol.population));
      acc.add("biased_vs_rloo_k/k" + std::to_string(k) + "-",
              rel_check("biased_scaler_vs_rloo_k", p, scaler * wr.w_minus, wrk.w_minus, opt.tol.population));
    }

    // No n-dependence at all for these two.
    for (Algorithm a : {Algorithm::SkewR, Algorithm::Rloo, Algorithm::Grpo}) {
      const auto [s, w] = wrap({a}, rho, kLarge);
      const double pred = oracle::predicted_population_weight({a}, s.rho_hat);
      const json p{{"algorithm", to_string(a)}, {"n", kLarge}, {"rho", rho}};
      acc.add("exact/" + std::string(to_string(a)), abs_check("population_exact", p, w.w_plus, pred, opt.tol.exact));
      acc.add("exact/" + std::string(to_string(a)), abs_check("population_exact", p, w.w_minus, pred, opt.tol.exact));
    }

    // Skew-R equals GRPO_{K=2} up to O(1/n).
    for (int n : {64, 256, 1024}) {
      const auto skew = wrap({Algorithm::SkewR}, rho, n).second;
      const auto k2 = wrap({Algorithm::GrpoK, 2}, rho, n).second;
      const double bound = 2.0 / n * 0.5;  // 0.5 = max of the GRPO weight sqrt(rho (1 - rho))
      const double gap = std::max(std::abs(skew.w_plus - k2.w_plus), std::abs(skew.w_minus - k2.w_minus));
      acc.add("skew_r_vs_grpo_k2/n" + std::to_string(1000 + n),
              abs_check("skew_r_vs_grpo_k2", json{{"n", n}, {"rho", rho}}, gap, 0.0, bound));
    }

    // Larger K: the finite-n gap is O(K^2 / N-), so only its decay is asserted.
    for (int k : {4, 8}) {
      for (Algorithm a : {Algorithm::GrpoTilde, Algorithm::GrpoK}) {
        const auto gap = [&](int n) {
          const auto [s, w] = wrap({a, k}, rho, n);
          const double pred = oracle::predicted_population_weight({a, k}, s.rho_hat);
          return std::max(std::abs(w.w_plus - pred), std::abs(w.w_minus - pred)) / pred;
        };
        const double g1 = gap(1024), g4 = gap(4096);
        const json p{{"algorithm", to_string(a)}, {"k", k}, {"rho", rho}, {"gap_1024", g1}, {"gap_4096", g4}};
        acc.add("decay/" + std::string(to_string(a)) + "/k" + std::to_string(k),
                predicate("population_gap_decays", p, g4 <= 0.5 * g1 || g4 <= 1e-12));
      }
    }
  }
  acc.flush_into(out);
  return out;
}

// ---------------------------------------------------------------------------
// surrogates: derivatives, identities, shapes

inline std::vector<SurrogateSpec> surrogate_sweep() {
  std::vector<SurrogateSpec> v;
  for (Surrogate s : kAllSurrogates) {
    if (uses_k(s)) {
      for (int k : {1, 2, 4, 8}) v.push_back({s, k, 0.0});
    } else if (s == Surrogate::EntropyReg) {
      for (double lam : {0.0, 1.0, 3.0}) v.push_back({s, 1, lam});
    } else {
      v.push_back({s, 1, 0.0});
    }
  }
  return v;
}

inline std::string surrogate_key(const SurrogateSpec& s) {
  return std::string(to_string(s.id)) + "/k" + std::to_string(s.k) + "/l" + std::to_string(s.lambda);
}

inline json surrogate_params(const SurrogateSpec& s) {
  return json{{"surrogate", to_string(s.id)}, {"k", s.k}, {"lambda", s.lambda}};
}

/// Grid argmax of F over {0.001, 0.002, ..., 1}.
inline double grid_argmax(const SurrogateSpec& s) {
  double best_x = 0.0, best = -1e300;
  for (int i = 1; i <= 1000; ++i) {
    const double x = i / 1000.0;
    const double v = surrogate_eval(s, x);
    if (v > best) best = v, best_x = x;
  }
  return best_x;
}

inline std::vector<OracleReport> suite_surrogates(const Options& opt) {
  std::vector<OracleReport> out;
  WorstCases acc;
  const auto grid = probability_grid(2, 98, 2);

  for (const SurrogateSpec& s : surrogate_sweep()) {
    for (double rho : grid) {
      const double fd = oracle::central_difference(s, rho, 1e-6);
      json p = surrogate_params(s);
      p["rho"] = rho;
      acc.add("fd/" + surrogate_key(s),
              rel_check("derivative_vs_finite_difference", p, surrogate_derivative(s, rho), fd, opt.tol.finite_diff));
      acc.add("gap/" + surrogate_key(s),
              abs_check("gap_complements_value", p, surrogate_eval(s, rho) + surrogate_gap(s, 1.0 - rho),
                        surrogate_normalizer(s), opt.tol.identity));
      if (s.id != Surrogate::EntropyReg) {
        acc.add("monotone/" + surrogate_key(s), predicate("derivative_positive", p, surrogate_derivative(s, rho) > 0));
      }
    }
  }

  // GRPO_{K=2} surrogate and the skew-R surrogate are the same function.
  for (int i = 1; i <= 999; ++i) {
    const double rho = i / 1000.0;
    const double ib = surrogate_eval({Surrogate::IncBetaK, 2}, rho);
    acc.add("inc_beta_k2_vs_skewr",
            abs_check("inc_beta_k2_equals_skewr", json{{"rho", rho}}, ib,
                      std::asin(std::sqrt(rho)) + std::sqrt(rho * (1.0 - rho)), opt.tol.identity));
    acc.add("inc_beta_k1_vs_arcsin",
            abs_check("inc_beta_k1_equals_arcsin", json{{"rho", rho}}, surrogate_eval({Surrogate::IncBetaK, 1}, rho),
                      2.0 * std::asin(std::sqrt(rho)), opt.tol.identity));
  }
  acc.add("complete_beta",
          abs_check("complete_beta_half_three_halves", json{{"a", 0.5}, {"b", 1.5}},
                    incomplete_beta({1.0, 0.5, 1.5}), std::numbers::pi / 2, opt.tol.identity));

  // d/d rho_K of (2/K) arcsin sqrt(rho_K) through the chain rule.
  for (int k : {1, 2, 4, 8}) {
    for (double rho : probability_grid(1, 99, 1)) {
      const double rk = pass_k_of_rho(rho, k);
      if (rk >= 1.0) continue;
      const double chain = surrogate_derivative({Surrogate::ArcsinPassK, k}, rho) / (k * std::pow(1.0 - rho, k - 1));
      acc.add("claim1_chain/k" + std::to_string(k),
              rel_check("arcsin_pass_k_chain_rule", json{{"k", k}, {"rho", rho}}, chain,
                        1.0 / (k * std::sqrt(rk * std::pow(1.0 - rho, k))), opt.tol.identity));
    }
  }

  // GRPO_K surrogate as a function of rho_K: concave where rho <= 1/2, i.e.
  // rho_K <= 1 - 2^-K; past that point the slope 1/(K sqrt(rho (1-rho))) grows.
  for (int k : {2, 4, 8}) {
    const auto G = [k](double y) { return surrogate_eval({Surrogate::IncBetaK, k}, rho_of_pass_k(y, k)); };
    const double knee = 1.0 - std::pow(2.0, -k);
    for (int i = 2; i <= 98; ++i) {
      const double y = i / 100.0;
      if (y + 0.01 > knee) break;
      const double d2 = G(y + 0.01) - 2 * G(y) + G(y - 0.01);
      acc.add("concave/k" + std::to_string(k),
              abs_check("inc_beta_k_concave_in_rho_k", json{{"k", k}, {"rho_k", y}}, std::max(d2, 0.0), 0.0, 1e-8));
    }
  }

  // Entropy regularizer moves the maximizer inside (0, 1) only for large lambda.
  {
    const double a1 = grid_argmax({Surrogate::EntropyReg, 1, 1.0});
    const double a3 = grid_argmax({Surrogate::EntropyReg, 1, 3.0});
    out.push_back(abs_check("entropy_argmax", json{{"lambda", 1.0}}, a1, 1.0, 0.0));
    out.push_back(predicate("entropy_argmax_interior", json{{"lambda", 3.0}, {"argmax", a3}}, a3 < 0.999));
  }

  // F(rho(theta)) differentiated through the tabular policy.
  for (std::uint64_t seed : opt.seeds) {
    for (const auto& policy : random_policies(seed ^ 0xfdULL, std::max(1, opt.policies_per_seed / 10), 6)) {
      for (const SurrogateSpec& s : surrogate_sweep()) {
        acc.add("policy_fd/" + surrogate_key(s), oracle::finite_diff_check(s, policy, 0, 1e-6, opt.tol.finite_diff));
      }
    }
  }
  acc.flush_into(out);
  return out;
}

// ---------------------------------------------------------------------------

inline std::vector<OracleReport> run_suite(const std::string& name, const Options& opt) {
  if (name == "estimators") return suite_estimators(opt);
  if (name == "shaping") return suite_shaping(opt);
  if (name == "conditional_gradient") return suite_conditional_gradient(opt);
  if (name == "unbiasedness") return suite_unbiasedness(opt);
  if (name == "population") return suite_population(opt);
  if (name == "surrogates") return suite_surrogates(opt);
  throw InvalidInput("unknown verification suite: " + name);
}

inline std::vector<OracleReport> run(const Options& opt) {
  std::vector<OracleReport> out;
  const auto& names = opt.suites.empty() ? suite_names() : opt.suites;
  for (const auto& name : names) {
    auto rows = run_suite(name, opt);
    for (auto& r : rows) {
      r.params["suite"] = name;
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline bool all_pass(const std::vector<OracleReport>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const OracleReport& r) { return r.pass; });
}

}  // namespace passk::verify
