#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "gvf/policies.hpp"

namespace gvf {
namespace {

// One-hot features: action a in a 4-dimensional space lights index a.
SparseBinaryVector one_hot(int /*state*/, ActionId a) { return SparseBinaryVector(4, {a}); }

Weights prefs(std::initializer_list<double> v) {
  Weights w(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) w[i++] = x;
  return w;
}

TEST(Policies, GreedyTieBreaksToLowestActionId) {
  const ActionSet actions = ActionSet::range(4);
  EXPECT_EQ(greedy_action(prefs({1, 3, 3, 0}), one_hot, 0, actions), 1u);
  EXPECT_EQ(greedy_action(Weights::Zero(4), one_hot, 0, actions), 0u);
  // Set order does not change the id-based tie-break.
  EXPECT_EQ(greedy_action(prefs({0, 3, 3, 0}), one_hot, 0, ActionSet({2, 1, 3})), 1u);
}

TEST(Policies, ActionSetRejectsDuplicates) { EXPECT_THROW(ActionSet({1, 2, 1}), ContractViolation); }

TEST(Policies, SoftmaxIsStableForHugePreferences) {
  const DiscreteDistribution d = softmax({1000.0, 1000.0, -1000.0});
  EXPECT_DOUBLE_EQ(d[0], 0.5);
  EXPECT_DOUBLE_EQ(d[1], 0.5);
  EXPECT_EQ(d[2], 0.0);
}

TEST(Policies, SoftmaxMatchesClosedForm) {
  const DiscreteDistribution d = softmax({0.0, std::log(3.0)});
  EXPECT_NEAR(d[0], 0.25, 1e-15);
  EXPECT_NEAR(d[1], 0.75, 1e-15);
}

TEST(Policies, EpsilonGreedyProbabilities) {
  EXPECT_DOUBLE_EQ(epsilon_greedy_probability(true, 0.1, 4), 0.925);
  EXPECT_DOUBLE_EQ(epsilon_greedy_probability(false, 0.1, 4), 0.025);
}

TEST(Policies, EpsilonGreedySampleReportsItsOwnFrequency) {
  Rng rng(1);
  const ActionSet actions = ActionSet::range(4);
  const Weights theta = prefs({0, 0, 2, 0});
  std::map<ActionId, int> counts;
  const int n = 200'000;
  for (int k = 0; k < n; ++k) {
    const SampledAction s = epsilon_greedy_sample(theta, one_hot, 0, actions, 0.2, rng);
    ++counts[s.action];
    ASSERT_DOUBLE_EQ(s.probability, s.action == 2 ? 0.85 : 0.05);
  }
  EXPECT_NEAR(counts[2] / double(n), 0.85, 0.005);
  EXPECT_NEAR(counts[0] / double(n), 0.05, 0.005);
}

TEST(Policies, PerturbedGibbsMarginalMatchesEnumeration) {
  // Enumerate the perturbation branches by hand for two actions.
  const std::vector<double> p = {0.3, -0.4};
  const double eps = 0.2, beta = 0.5;
  auto sm0 = [](double a, double b) { return 1.0 / (1.0 + std::exp(b - a)); };
  const double expected0 = (1 - eps) * sm0(p[0], p[1]) + eps / 2 * sm0(p[0] + beta, p[1]) + eps / 2 * sm0(p[0], p[1] + beta);
  const DiscreteDistribution d = perturbed_gibbs_distribution(p, eps, beta);
  EXPECT_NEAR(d[0], expected0, 1e-15);
  EXPECT_NEAR(d[0] + d[1], 1.0, 1e-15);
}

TEST(Policies, PerturbedGibbsSampleFrequencyMatchesMarginal) {
  Rng rng(2);
  const ActionSet actions = ActionSet::range(3);
  const Weights u = prefs({0.5, 0.0, -0.5, 0.0});
  const std::vector<double> p = {0.5, 0.0, -0.5};
  const DiscreteDistribution d = perturbed_gibbs_distribution(p, 0.3, 1.0);
  std::vector<int> counts(3);
  const int n = 200'000;
  for (int k = 0; k < n; ++k) {
    const SampledAction s = perturbed_gibbs_sample(u, one_hot, 0, actions, 0.3, 1.0, rng);
    ++counts[s.action];
    ASSERT_DOUBLE_EQ(s.probability, d[s.action]);
  }
  for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(counts[a] / double(n), d[a], 0.005);
}

TEST(Policies, ImportanceRatios) {
  EXPECT_EQ(importance_ratio_greedy(1, 1, 0.5), 2.0);
  EXPECT_EQ(importance_ratio_greedy(0, 1, 0.5), 0.0);
  EXPECT_THROW(importance_ratio_greedy(0, 0, 0.0), ContractViolation);
  EXPECT_DOUBLE_EQ(importance_ratio(0.3, 0.6), 0.5);
  EXPECT_THROW(importance_ratio(0.3, 0.0), ContractViolation);
}

TEST(Policies, SamplePositionSkipsZeroMass) {
  Rng rng(3);
  const DiscreteDistribution d{{0.0, 1.0, 0.0}};
  for (int k = 0; k < 1000; ++k) ASSERT_EQ(sample_position(d, rng), 1u);
}

}  // namespace
}  // namespace gvf
