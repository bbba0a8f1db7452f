#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "gvf/benchmarks.hpp"

namespace gvf::bench {
namespace {

// MSPBE through the normal equations and an SVD pseudo-inverse:
// (Phi' D delta)' (Phi' D Phi)^+ (Phi' D delta).
double mspbe_normal_equations(const Eigen::VectorXd& w, const PredictionProblem& p, const Eigen::VectorXd& mu) {
  const auto n = static_cast<Eigen::Index>(p.mdp.n_states);
  Eigen::MatrixXd pt = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < p.mdp.n_states; ++s)
    for (std::size_t a = 0; a < p.mdp.n_actions; ++a)
      for (const Transition& t : p.mdp.transitions[s][a]) {
        const double pr = p.target_policy(s, a) * t.probability;
        pt(s, t.next) += pr;
        r[s] += pr * t.reward;
      }
  const Eigen::VectorXd v = p.features * w;
  const Eigen::VectorXd delta = r + p.mdp.gamma * pt * v - v;
  const Eigen::MatrixXd d = mu.asDiagonal();
  const Eigen::VectorXd g = p.features.transpose() * d * delta;
  const Eigen::MatrixXd c = p.features.transpose() * d * p.features;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  return g.dot(svd.solve(g));
}

PredictionProblem random_problem(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0), f(-1.0, 1.0);
  PredictionProblem p;
  p.mdp.n_states = 5;
  p.mdp.n_actions = 2;
  p.mdp.gamma = 0.9;
  p.mdp.transitions.assign(5, std::vector<std::vector<Transition>>(2));
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t a = 0; a < 2; ++a) {
      double total = 0.0;
      std::vector<double> mass(5);
      for (double& m : mass) total += (m = u(rng));
      for (std::size_t j = 0; j < 5; ++j) p.mdp.transitions[s][a].push_back({j, mass[j] / total, f(rng)});
    }
  p.features = Eigen::MatrixXd(5, 3);
  for (Eigen::Index i = 0; i < p.features.size(); ++i) p.features.data()[i] = f(rng);
  p.target_policy = Eigen::MatrixXd(5, 2);
  for (Eigen::Index s = 0; s < 5; ++s) {
    p.target_policy(s, 0) = u(rng);
    p.target_policy(s, 1) = 1.0 - p.target_policy(s, 0);
  }
  p.state_distribution = Eigen::VectorXd(5);
  for (Eigen::Index s = 0; s < 5; ++s) p.state_distribution[s] = u(rng);
  p.state_distribution /= p.state_distribution.sum();
  return p;
}

TEST(Benchmarks, TwoStateChainValues) {
  const auto vi = value_iteration(make_two_state_chain(0.9), 1e-12);
  EXPECT_NEAR(vi.q(0, 0), 9.0, 1e-10);
  EXPECT_NEAR(vi.q(1, 0), 10.0, 1e-10);
}

TEST(Benchmarks, GridworldValuesMatchShortestPaths) {
  const Gridworld g = make_gridworld();
  const auto vi = value_iteration(g.mdp, 1e-12);
  EXPECT_LT(bellman_optimality_residual(g.mdp, vi.q), 1e-10);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      const std::size_t s = g.state(r, c);
      if (s == g.goal) continue;
      const auto steps = static_cast<double>(r + (4 - c));
      const double v = -(1.0 - std::pow(0.95, steps)) / (1.0 - 0.95);
      EXPECT_NEAR(vi.q.row(s).maxCoeff(), v, 1e-9) << s;
      // Moving up or right always shortens the path.
      const auto sets = optimal_action_sets(vi.q, 1e-8);
      EXPECT_TRUE(std::count(sets[s].begin(), sets[s].end(), r > 0 ? 0u : 3u)) << s;
    }
}

TEST(Benchmarks, GreedyGqFindsTheGridworldPolicy) {
  const GridworldRun run = run_gridworld_greedy_gq(make_gridworld(), 1, 200000);
  EXPECT_EQ(run.optimal_fraction, 1.0);
}

TEST(Benchmarks, MspbeMatchesTheNormalEquationOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    const PredictionProblem p = random_problem(rng);
    Eigen::VectorXd w(3);
    for (Eigen::Index i = 0; i < 3; ++i) w[i] = n(rng);
    const double expected = mspbe_normal_equations(w, p, p.state_distribution);
    EXPECT_NEAR(mspbe(w, p.features, p.mdp, p.target_policy, p.state_distribution), expected, 1e-10 * (1 + expected));
    const Eigen::VectorXd fixed = td_fixed_point(p.features, p.mdp, p.target_policy, p.state_distribution);
    EXPECT_LT(mspbe(fixed, p.features, p.mdp, p.target_policy, p.state_distribution), 1e-20);
  }
}

TEST(Benchmarks, MspbeHandlesBairdsRankDeficientFeatures) {
  const PredictionProblem p = baird_environment();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd w(8);
    for (Eigen::Index i = 0; i < 8; ++i) w[i] = n(rng);
    const double expected = mspbe_normal_equations(w, p, p.state_distribution);
    EXPECT_NEAR(mspbe(w, p.features, p.mdp, p.target_policy, p.state_distribution), expected, 1e-9 * (1 + expected));
  }
  EXPECT_GT(mspbe(p.initial_weights, p.features, p.mdp, p.target_policy, p.state_distribution), 1.0);
  EXPECT_EQ(mspbe(Eigen::VectorXd::Zero(8), p.features, p.mdp, p.target_policy, p.state_distribution), 0.0);
  Eigen::VectorXd mu = p.state_distribution;
  mu[0] = 0.0;
  EXPECT_THROW(mspbe(p.initial_weights, p.features, p.mdp, p.target_policy, mu), RankDeficiency);
}

TEST(Benchmarks, BairdSweepReproducesTheBehaviorDistribution) {
  const PredictionProblem p = baird_environment();
  const auto sweep = baird_sweep(p);
  ASSERT_EQ(sweep.size(), 49u);
  std::size_t solid = 0;
  std::vector<std::size_t> from(7);
  for (const PredictionSample& s : sweep) {
    solid += s.action == kBairdSolid;
    ++from[s.state];
    EXPECT_EQ(s.reward, 0.0);
  }
  EXPECT_EQ(solid, 7u);
  for (std::size_t c : from) EXPECT_EQ(c, 7u);
}

TEST(Benchmarks, NaiveTdDivergesOnBaird) {
  const PredictionProblem p = baird_environment();
  Eigen::VectorXd w = p.initial_weights;
  const auto norms = run_naive_td0(p, 0.01, 5000, w);
  EXPECT_GT(norms.back(), 1e6);
  EXPECT_GT(norms.back(), norms.front());
}

TEST(Benchmarks, FrozenActorCriticConvergesOnBaird) {
  const CriticRun run = run_frozen_actor_critic(baird_environment(), 0.005, 0.05, 0.0, 20000, 1e-4);
  ASSERT_FALSE(run.mspbe_per_sweep.empty());
  EXPECT_LT(run.mspbe_per_sweep.back(), 1e-4);
}

TEST(Benchmarks, OffPacBanditPrefersTheRewardedAction) {
  const BanditRun run = run_offpac_bandit(9, 50000);
  ASSERT_EQ(run.optimal_prob.size(), 50000u);
  EXPECT_GT(run.optimal_prob.back(), 0.9);
}

TEST(Benchmarks, GibbsGradientCheck) {
  const GradientCheck c = gibbs_gradient_check(5, 100);
  EXPECT_EQ(c.draws, 100u);
  EXPECT_LT(c.max_relative_error, 1e-4);
  EXPECT_LT(c.max_score_residual, 1e-10);
}

TEST(Benchmarks, MetricCsvLayout) {
  std::ostringstream out;
  write_metric_csv(out, {{1, "a", 0.5}, {2, "b", -1.0}});
  EXPECT_EQ(out.str(), "step,metric,value\n1,a,0.5\n2,b,-1\n");
}

TEST(Benchmarks, InvalidMdpIsRejected) {
  TabularMdp m = make_two_state_chain(0.5);
  m.transitions[0][0][0].probability = 0.5;
  EXPECT_THROW(m.validate(), ContractViolation);
}

}  // namespace
}  // namespace gvf::bench
