#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "passk/tabular_policy.hpp"

using namespace passk;

namespace {

TabularPolicy single(std::vector<bool> mask, std::vector<double> logits) {
  return TabularPolicy({ProblemSpec{std::move(mask), std::move(logits)}});
}

TabularPolicy sample_policy() { return single({true, false, true, false, false}, {0.3, -1.2, 0.8, 0.1, 2.0}); }

// Central differences of f(policy) in every logit of problem 0.
template <class F>
std::vector<double> numeric_grad(const TabularPolicy& policy, const F& f, double h = 1e-6) {
  TabularPolicy probe = policy;
  std::vector<double> g(policy.logits(0).size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    auto th = probe.logits(0);
    const double saved = th[j];
    th[j] = saved + h;
    const double up = f(probe);
    th[j] = saved - h;
    const double down = f(probe);
    th[j] = saved;
    g[j] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(ProblemSpec, Validation) {
  EXPECT_THROW(single({true}, {0.0}), InvalidInput);
  EXPECT_THROW(single({true, true}, {0.0, 0.0}), InvalidInput);
  EXPECT_THROW(single({false, false}, {0.0, 0.0}), InvalidInput);
  EXPECT_THROW(single({true, false}, {0.0}), InvalidInput);
  EXPECT_THROW(single({true, false}, {0.0, NAN}), InvalidInput);
  EXPECT_NO_THROW(single({true, false}, {0.0, 0.0}));
}

TEST(Softmax, NormalizedAndShiftInvariant) {
  const std::vector<double> a{1.0, 2.0, -3.0}, b{101.0, 102.0, 97.0};
  const auto pa = softmax(a), pb = softmax(b);
  EXPECT_NEAR(std::accumulate(pa.begin(), pa.end(), 0.0), 1.0, 1e-15);
  for (std::size_t j = 0; j < pa.size(); ++j) EXPECT_NEAR(pa[j], pb[j], 1e-15);
  const auto big = softmax(std::vector<double>{1000.0, 0.0});
  EXPECT_EQ(big[0], 1.0);
}

TEST(Rho, UniformPolicy) {
  EXPECT_DOUBLE_EQ(rho(single({true, false, false, false}, {0, 0, 0, 0}), 0), 0.25);
  const auto p = single({true, true, true, false, false}, {0, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(rho(p, 0), 0.6);
  EXPECT_NEAR(fail_rate(p, 0), 0.4, 1e-15);
  EXPECT_NEAR(rho_k(p, 0, 2), 1 - 0.16, 1e-15);
}

TEST(ExactRhoGrad, UniformTwoResponses) {
  const auto g = exact_rho_grad(single({true, false}, {0.0, 0.0}), 0);
  EXPECT_DOUBLE_EQ(g[0], 0.25);
  EXPECT_DOUBLE_EQ(g[1], -0.25);
}

TEST(ExactRhoGrad, MatchesFiniteDifferences) {
  const auto policy = sample_policy();
  const auto g = exact_rho_grad(policy, 0);
  const auto fd = numeric_grad(policy, [](const TabularPolicy& p) { return rho(p, 0); });
  double scale = 0.0;
  for (double x : g) scale = std::max(scale, std::abs(x));
  for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(fd[j], g[j], 1e-6 * scale);
  EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0), 0.0, 1e-16);
}

TEST(LogprobGrad, MatchesFiniteDifferences) {
  const auto policy = sample_policy();
  for (std::size_t y = 0; y < 5; ++y) {
    const auto g = logprob_grad(policy, 0, y);
    const auto fd =
        numeric_grad(policy, [y](const TabularPolicy& p) { return std::log(response_probs(p, 0)[y]); });
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_NEAR(fd[j], g[j], 1e-8);
  }
  EXPECT_THROW(logprob_grad(policy, 0, 5), InvalidInput);
}

TEST(ConditionalMeanGrads, AreConditionalExpectations) {
  const auto policy = sample_policy();
  const auto pi = response_probs(policy, 0);
  const auto& mask = policy.problem(0).correct_mask;
  const double r = rho(policy, 0);
  std::vector<double> plus(5, 0.0), minus(5, 0.0);
  for (std::size_t y = 0; y < 5; ++y) {
    const auto g = logprob_grad(policy, 0, y);
    for (std::size_t j = 0; j < 5; ++j) (mask[y] ? plus : minus)[j] += pi[y] * g[j] / (mask[y] ? r : 1 - r);
  }
  const auto c = conditional_mean_grads(policy, 0);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_NEAR(c.mu_plus[j], plus[j], 1e-15);
    EXPECT_NEAR(c.mu_minus[j], minus[j], 1e-15);
  }
}

TEST(ConditionalMeanGrads, ConditionalGradientIdentity) {
  const auto policy = sample_policy();
  const auto c = conditional_mean_grads(policy, 0);
  const auto g = exact_rho_grad(policy, 0);
  const double r = rho(policy, 0);
  for (std::size_t j = 0; j < g.size(); ++j) {
    EXPECT_NEAR(c.mu_plus[j] - c.mu_minus[j], g[j] / (r * (1 - r)), 1e-12);
  }
}

TEST(Ascend, MovesLogits) {
  auto policy = sample_policy();
  policy.ascend(0, std::vector<double>{1, 0, 0, 0, -1}, 0.5);
  EXPECT_DOUBLE_EQ(policy.logits(0)[0], 0.8);
  EXPECT_DOUBLE_EQ(policy.logits(0)[4], 1.5);
  EXPECT_THROW(policy.ascend(0, std::vector<double>{1.0}, 0.5), InvalidInput);
}

TEST(RngStream, DeterministicAndKeyed) {
  auto a = RngStream::named(7, 1, 3), b = RngStream::named(7, 1, 3), c = RngStream::named(7, 1, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    differs = differs || x != c.uniform();
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_TRUE(differs);
}

TEST(RngStream, CategoricalFrequencies) {
  auto rng = RngStream::named(1, 0, 0);
  const std::vector<double> probs{0.1, 0.6, 0.3};
  std::vector<int> counts(3, 0);
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) ++counts[rng.categorical(probs)];
  // binomial standard deviation is below 0.0011 for every cell; allow 5 sigma
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(counts[j] / double(draws), probs[j], 0.0055);
  const std::vector<double> point{0.0, 1.0, 0.0};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(rng.categorical(point), 1u);
}

TEST(SampleBatch, RewardsFollowMask) {
  const auto policy = sample_policy();
  auto rng = RngStream::named(3, 0, 1);
  const SampledBatch b = sample_batch(policy, 0, 64, rng);
  ASSERT_EQ(b.responses.size(), 64u);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_EQ(b.rewards[i], policy.problem(0).correct_mask[b.responses[i]] ? 1 : 0);
  }
  EXPECT_THROW(sample_batch(policy, 0, 0, rng), InvalidInput);
}
