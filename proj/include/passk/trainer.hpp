// trainer.hpp: online stochastic gradient ascent on a tabular policy.
//
// Each step every problem draws a fresh group of n responses from its own named
// RNG stream, turns the group's rewards into per-response advantages, and
// moves its logits by learning_rate * (1/P) * (1/n) sum_i A_i grad_i, where P is
// the number of problems. One update per generation, fixed step size.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "passk/advantage_shaping.hpp"
#include "passk/error.hpp"
#include "passk/oracle.hpp"
#include "passk/surrogates.hpp"
#include "passk/tabular_policy.hpp"

namespace passk {

enum class GradientMode {
  Sampled,   // the algorithm's empirical gradient on a sampled group
  Expected,  // its exact expectation over groups (oracle::expected_gradient)
};

struct TrainConfig {
  std::vector<ProblemSpec> problems;
  AlgorithmSpec algorithm;
  int n = 8;
  int steps = 1;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  std::vector<int> eval_ks = {1};
  GradientMode gradient_mode = GradientMode::Sampled;

  void validate() const {
    detail::require(!problems.empty(), "TrainConfig: no problems");
    for (const auto& p : problems) p.validate();
    algorithm.validate();
    detail::require(steps >= 1, "TrainConfig: steps must be >= 1");
    detail::require(n >= 1, "TrainConfig: n must be >= 1");
    if (uses_baseline(algorithm.id)) {
      detail::require(n >= 2, "TrainConfig: baseline-using algorithms need n >= 2");
    }
    if (needs_unbiased_k(algorithm.id)) {
      detail::require(algorithm.k <= n, "TrainConfig: unbiased Pass@K families need k <= n");
    }
    detail::require(std::isfinite(learning_rate) && learning_rate >= 0.0,
                    "TrainConfig: learning_rate must be finite and >= 0");
    detail::require(!eval_ks.empty(), "TrainConfig: eval_ks is empty");
    for (int k : eval_ks) detail::require(k >= 1, "TrainConfig: eval_ks entries must be >= 1");
  }
};

struct MetricsRow {
  int step = 0;
  std::vector<double> rho;                  // per problem
  std::vector<std::vector<double>> rho_k;   // [eval k][problem]
  double mean_rho = 0.0;
  std::vector<double> mean_rho_k;           // per eval k
  int degenerate_groups = 0;                // groups with rho_hat in {0, 1} this step
};

/// (1/n) sum_i A_i grad_i
inline Gradient assemble_gradient(std::span<const double> advantages, std::span<const Gradient> grads) {
  detail::require(advantages.size() == grads.size(), "assemble_gradient: length mismatch");
  detail::require(!grads.empty(), "assemble_gradient: empty group");
  Gradient g(grads.front().size(), 0.0);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    detail::require(grads[i].size() == g.size(), "assemble_gradient: gradient shape mismatch");
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += advantages[i] * grads[i][j];
  }
  for (double& x : g) x /= static_cast<double>(grads.size());
  return g;
}

inline MetricsRow measure(const TabularPolicy& policy, std::span<const int> eval_ks, int step) {
  MetricsRow row;
  row.step = step;
  const std::size_t np = policy.num_problems();
  for (std::size_t p = 0; p < np; ++p) row.rho.push_back(rho(policy, p));
  for (double r : row.rho) row.mean_rho += r;
  row.mean_rho /= static_cast<double>(np);
  for (int k : eval_ks) {
    std::vector<double> per;
    double mean = 0.0;
    for (double r : row.rho) {
      per.push_back(pass_k_of_rho(std::clamp(r, 0.0, 1.0), k));
      mean += per.back();
    }
    row.rho_k.push_back(std::move(per));
    row.mean_rho_k.push_back(mean / static_cast<double>(np));
  }
  return row;
}

/// Row 0 holds the initial policy; row t (1..steps) the policy after update t,
/// together with the number of degenerate groups sampled during that update.
inline std::vector<MetricsRow> train(const TrainConfig& config) {
  config.validate();
  TabularPolicy policy(config.problems);
  const std::size_t np = policy.num_problems();
  const double step_size = config.learning_rate / static_cast<double>(np);

  std::vector<MetricsRow> rows;
  rows.reserve(static_cast<std::size_t>(config.steps) + 1);
  rows.push_back(measure(policy, config.eval_ks, 0));

  std::vector<Gradient> updates(np);
  for (int t = 1; t <= config.steps; ++t) {
    int degenerate = 0;
    // All gradients are taken at the same parameters before any problem moves.
    for (std::size_t p = 0; p < np; ++p) {
      if (config.gradient_mode == GradientMode::Expected) {
        updates[p] = oracle::expected_gradient(config.algorithm, policy, p, config.n);
        continue;
      }
      auto rng = RngStream::named(config.seed, p, static_cast<std::uint64_t>(t));
      const SampledBatch batch = sample_batch(policy, p, config.n, rng);
      if (summarize(batch.rewards).degenerate()) ++degenerate;
      const auto adv = per_response_advantages(config.algorithm, batch.rewards);
      std::vector<Gradient> scores;
      scores.reserve(batch.responses.size());
      for (std::size_t y : batch.responses) scores.push_back(logprob_grad(policy, p, y));
      updates[p] = assemble_gradient(adv, scores);
    }
    for (std::size_t p = 0; p < np; ++p) policy.ascend(p, updates[p], step_size);
    MetricsRow row = measure(policy, config.eval_ks, t);
    row.degenerate_groups = degenerate;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace passk
