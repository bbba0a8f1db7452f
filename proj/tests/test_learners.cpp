#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gvf/learners.hpp"
#include "toy_problem.hpp"

namespace gvf {
namespace {

using namespace gvf::testing;

// ---------------------------------------------------------------------------
// Greedy-GQ against a dense oracle

TEST(GreedyGq, MatchesDenseOracleOverARandomStream) {
  const Toy toy(1);
  const double gamma = 0.9, lambda = 0.7, at = 0.05, aw = 0.02;
  const auto ans = toy.answer(lambda);
  const auto q = question(gamma, TargetPolicy::kGreedy);
  GreedyGqState st = GreedyGqState::zeros(Toy::kDim, at, aw, exact_trace());

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(Toy::kDim), w = theta, e = theta;
  std::mt19937_64 rng(2);
  for (int t = 0; t < 400; ++t) {
    const GvfSample<int> smp = random_sample(rng, gamma);
    // Oracle.
    auto q_of = [&](int s, std::size_t a) { return theta.dot(toy.dense(toy.sa[s][a])); };
    std::size_t greedy_now = 0, greedy_next = 0;
    for (std::size_t a = 1; a < Toy::kActions; ++a) {
      if (q_of(smp.state_t, a) > q_of(smp.state_t, greedy_now)) greedy_now = a;
      if (q_of(smp.state_next, a) > q_of(smp.state_next, greedy_next)) greedy_next = a;
    }
    const Eigen::VectorXd phi = toy.dense(toy.sa[smp.state_t][smp.action_t]);
    const Eigen::VectorXd phi_hat = toy.dense(toy.sa[smp.state_next][greedy_next]);
    const double rho = smp.action_t == greedy_now ? 1.0 / smp.behavior_prob : 0.0;
    const double delta = smp.transient_reward + (1 - smp.gamma_next) * smp.terminal_reward +
                         smp.gamma_next * theta.dot(phi_hat) - theta.dot(phi);
    e = gamma * lambda * rho * e + phi;
    const Eigen::VectorXd theta_new = theta + at * (delta * e - smp.gamma_next * (1 - lambda) * w.dot(e) * phi_hat);
    w = w + aw * (delta * e - w.dot(phi) * phi);
    theta = theta_new;

    const UpdateDiagnostics d = greedy_gq_update(st, smp, q, ans);
    ASSERT_NEAR(d.delta, delta, 1e-12);
    ASSERT_EQ(d.rho, rho);
    ASSERT_LT((st.theta - theta).lpNorm<Eigen::Infinity>(), 1e-12) << "step " << t;
    ASSERT_LT((st.w - w).lpNorm<Eigen::Infinity>(), 1e-12) << "step " << t;
    for (std::size_t i = 0; i < Toy::kDim; ++i) ASSERT_NEAR(st.e.value(i), e[static_cast<Eigen::Index>(i)], 1e-12);
  }
  EXPECT_NEAR(std::sqrt(st.theta_sq_norm), st.theta.norm(), 1e-9);
}

TEST(GreedyGq, EpisodeInitClearsOnlyTheTrace) {
  const Toy toy(3);
  GreedyGqState st = GreedyGqState::zeros(Toy::kDim, 0.1, 0.01);
  std::mt19937_64 rng(4);
  const auto ans = toy.answer(0.5);
  for (int k = 0; k < 5; ++k) greedy_gq_update(st, random_sample(rng, 0.9), question(0.9, TargetPolicy::kGreedy), ans);
  const Weights theta = st.theta;
  greedy_gq_episode_init(st);
  EXPECT_TRUE(st.e.empty());
  EXPECT_EQ(st.theta, theta);
}

TEST(GreedyGq, NonFiniteDeltaPoisonsTheLearner) {
  const Toy toy(5);
  GreedyGqState st = GreedyGqState::zeros(Toy::kDim, 0.1, 0.01);
  GvfSample<int> s;
  s.transient_reward = std::numeric_limits<double>::infinity();
  s.gamma_next = 0.5;
  s.behavior_prob = 0.5;
  EXPECT_THROW(greedy_gq_update(st, s, question(0.9, TargetPolicy::kGreedy), toy.answer(0.0)), LearnerPoisoned);
}

TEST(GreedyGq, RejectsInvalidSamples) {
  const Toy toy(5);
  GreedyGqState st = GreedyGqState::zeros(Toy::kDim, 0.1, 0.01);
  GvfSample<int> s;
  s.behavior_prob = 0.0;
  EXPECT_THROW(greedy_gq_update(st, s, question(0.9, TargetPolicy::kGreedy), toy.answer(0.0)), ContractViolation);
  s.behavior_prob = 0.5;
  s.action_t = 7;
  EXPECT_THROW(greedy_gq_update(st, s, question(0.9, TargetPolicy::kGreedy), toy.answer(0.0)), ContractViolation);
  s.action_t = 0;
  s.gamma_next = 1.5;
  EXPECT_THROW(greedy_gq_update(st, s, question(0.9, TargetPolicy::kGreedy), toy.answer(0.0)), ContractViolation);
}

// ---------------------------------------------------------------------------
// Off-PAC against a dense oracle

TEST(OffPac, MatchesDenseOracleOverARandomStream) {
  const Toy toy(7);
  const double gamma = 0.9, lambda = 0.6, lambda_u = 0.4, av = 0.05, aw = 0.01, au = 0.02;
  const auto ans = toy.answer(lambda, lambda_u);
  const auto q = question(gamma, TargetPolicy::kGibbs);
  OffPacState st = OffPacState::zeros(Toy::kDim, Toy::kDim, av, aw, au, exact_trace());

  Eigen::VectorXd v = Eigen::VectorXd::Zero(Toy::kDim), w = v, u = v, ev = v, eu = v;
  std::mt19937_64 rng(8);
  for (int t = 0; t < 400; ++t) {
    const GvfSample<int> smp = random_sample(rng, gamma);
    const Eigen::VectorXd phi = toy.dense(toy.s[smp.state_t]);
    const Eigen::VectorXd phi_next = toy.dense(toy.s[smp.state_next]);
    Eigen::VectorXd pref(Toy::kActions);
    for (std::size_t a = 0; a < Toy::kActions; ++a) pref[a] = u.dot(toy.dense(toy.sa[smp.state_t][a]));
    const Eigen::VectorXd pi = (pref.array() - pref.maxCoeff()).exp() / (pref.array() - pref.maxCoeff()).exp().sum();
    Eigen::VectorXd psi = toy.dense(toy.sa[smp.state_t][smp.action_t]);
    for (std::size_t a = 0; a < Toy::kActions; ++a) psi -= pi[a] * toy.dense(toy.sa[smp.state_t][a]);
    const double rho = pi[smp.action_t] / smp.behavior_prob;
    const double delta = smp.transient_reward + (1 - smp.gamma_next) * smp.terminal_reward +
                         smp.gamma_next * v.dot(phi_next) - v.dot(phi);
    ev = rho * (gamma * lambda * ev + phi);
    const Eigen::VectorXd v_new = v + av * (delta * ev - smp.gamma_next * (1 - lambda) * w.dot(ev) * phi_next);
    w = w + aw * (delta * ev - w.dot(phi) * phi);
    v = v_new;
    eu = rho * (gamma * lambda_u * eu + psi);
    u = u + au * delta * eu;

    const UpdateDiagnostics d = offpac_update(st, smp, q, ans);
    ASSERT_NEAR(d.delta, delta, 1e-12);
    ASSERT_NEAR(d.rho, rho, 1e-14);
    ASSERT_LT((st.v - v).lpNorm<Eigen::Infinity>(), 1e-11) << "step " << t;
    ASSERT_LT((st.w - w).lpNorm<Eigen::Infinity>(), 1e-11) << "step " << t;
    ASSERT_LT((st.u - u).lpNorm<Eigen::Infinity>(), 1e-11) << "step " << t;
  }
}

TEST(OffPac, GibbsLogGradientHasZeroPolicyMean) {
  const Toy toy(9);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal;
  Weights u(Toy::kDim);
  for (auto& x : u) x = normal(rng);
  const auto ans = toy.answer(0.0);
  for (int s = 0; s < static_cast<int>(Toy::kStates); ++s) {
    const DiscreteDistribution pi = gibbs_distribution(u, ans.features, s, ans.actions);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(Toy::kDim);
    for (ActionId a = 0; a < Toy::kActions; ++a)
      mean += pi[a] * gibbs_log_gradient(u, ans.features, s, a, ans.actions).to_dense();
    EXPECT_LT(mean.lpNorm<Eigen::Infinity>(), 1e-15);
  }
}

// ---------------------------------------------------------------------------
// Trace cut: rho = 0 resets the traces, for every state and action.

TEST(TraceCut, GreedyGqTraceIsInterestTimesPhiAfterNonGreedyAction) {
  const Toy toy(11);
  auto ans = toy.answer(0.9);
  ans.interest = [](const int& s, ActionId) { return s % 2 ? 0.5 : 1.0; };
  const auto q = question(0.95, TargetPolicy::kGreedy);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal;
  std::size_t checked = 0;
  for (int s = 0; s < static_cast<int>(Toy::kStates); ++s) {
    for (ActionId a = 0; a < Toy::kActions; ++a) {
      GreedyGqState st = GreedyGqState::zeros(Toy::kDim, 0.1, 0.01, exact_trace());
      for (auto& x : st.theta) x = normal(rng);
      // Fill the trace first.
      for (int k = 0; k < 5; ++k) st.e.rescale_add(1.0, 1.0, toy.sa[k % Toy::kStates][k % Toy::kActions]);
      const ActionId greedy = greedy_action(st.theta, ans.features, s, ans.actions);
      if (a == greedy) continue;
      GvfSample<int> smp;
      smp.state_t = s;
      smp.action_t = a;
      smp.state_next = (s + 1) % static_cast<int>(Toy::kStates);
      smp.gamma_next = 0.95;
      smp.behavior_prob = 0.3;
      const UpdateDiagnostics d = greedy_gq_update(st, smp, q, ans);
      ASSERT_EQ(d.rho, 0.0);
      const double interest = s % 2 ? 0.5 : 1.0;
      const SparseBinaryVector& phi = toy.sa[s][a];
      ASSERT_EQ(st.e.size(), phi.size());
      for (std::size_t i : phi) ASSERT_EQ(st.e.value(i), interest);
      ++checked;
    }
  }
  EXPECT_GE(checked, Toy::kStates);
}

TEST(TraceCut, OffPacTracesAreEmptyWhenTargetProbabilityIsZero) {
  // Preferences of -inf are not representable, so zero target probability is
  // reached through underflow: exp(-800) == 0 in double precision.
  const Toy toy(13);
  const auto ans = toy.answer(0.9, 0.9);
  const auto q = question(0.95, TargetPolicy::kGibbs);
  std::size_t checked = 0;
  for (int s = 0; s < static_cast<int>(Toy::kStates); ++s) {
    for (ActionId a = 0; a < Toy::kActions; ++a) {
      OffPacState st = OffPacState::zeros(Toy::kDim, Toy::kDim, 0.1, 0.01, 0.01, exact_trace());
      // Action a gets preference -800 relative to the others by construction.
      for (std::size_t i : toy.sa[s][a]) st.u[static_cast<Eigen::Index>(i)] -= 200.0;
      for (ActionId b = 0; b < Toy::kActions; ++b)
        if (b != a)
          for (std::size_t i : toy.sa[s][b]) st.u[static_cast<Eigen::Index>(i)] += 200.0;
      const DiscreteDistribution pi = gibbs_distribution(st.u, ans.features, s, ans.actions);
      if (pi[a] != 0.0) continue;  // feature overlap kept the gap too small
      st.e_v.rescale_add(1.0, 1.0, toy.s[0]);
      st.e_u.rescale_add(1.0, 1.0, toy.sa[0][0]);
      GvfSample<int> smp;
      smp.state_t = s;
      smp.action_t = a;
      smp.state_next = 0;
      smp.gamma_next = 0.95;
      smp.behavior_prob = 0.5;
      const UpdateDiagnostics d = offpac_update(st, smp, q, ans);
      ASSERT_EQ(d.rho, 0.0);
      ASSERT_TRUE(st.e_v.empty());
      ASSERT_TRUE(st.e_u.empty());
      ++checked;
    }
  }
  EXPECT_GE(checked, Toy::kStates);
}

// ---------------------------------------------------------------------------
// Fixed point: zero rewards from zero weights stay at zero.

TEST(FixedPoint, ZeroRewardStreamsLeaveWeightsExactlyZero) {
  const Toy toy(15);
  std::mt19937_64 rng(16);
  GreedyGqState gq = GreedyGqState::zeros(Toy::kDim, 0.1, 0.01);
  OffPacState op = OffPacState::zeros(Toy::kDim, Toy::kDim, 0.1, 0.01, 0.01);
  const auto ans = toy.answer(0.8, 0.8);
  for (int k = 0; k < 10'000; ++k) {
    GvfSample<int> s = random_sample(rng, 0.9);
    s.transient_reward = 0.0;
    s.terminal_reward = 0.0;
    greedy_gq_update(gq, s, question(0.9, TargetPolicy::kGreedy), ans);
    offpac_update(op, s, question(0.9, TargetPolicy::kGibbs), ans);
  }
  EXPECT_TRUE((gq.theta.array() == 0.0).all() && (gq.w.array() == 0.0).all());
  EXPECT_TRUE((op.v.array() == 0.0).all() && (op.w.array() == 0.0).all() && (op.u.array() == 0.0).all());
}

// ---------------------------------------------------------------------------
// Checkpoints

TEST(Checkpoint, RoundTripPreservesWeightsAndHyperparameters) {
  const Toy toy(17);
  std::mt19937_64 rng(18);
  GreedyGqState gq = GreedyGqState::zeros(Toy::kDim, 0.1, 0.01, {77, 1e-6});
  OffPacState op = OffPacState::zeros(Toy::kDim, Toy::kDim, 0.1, 0.01, 0.02);
  const auto ans = toy.answer(0.5, 0.5);
  for (int k = 0; k < 50; ++k) {
    const auto s = random_sample(rng, 0.9);
    greedy_gq_update(gq, s, question(0.9, TargetPolicy::kGreedy), ans);
    offpac_update(op, s, question(0.9, TargetPolicy::kGibbs), ans);
  }
  const auto dir = std::filesystem::temp_directory_path();
  const auto p1 = dir / ("gvf_ckpt_gq_" + std::to_string(::getpid()));
  const auto p2 = dir / ("gvf_ckpt_op_" + std::to_string(::getpid()));
  save_checkpoint(p1, gq);
  save_checkpoint(p2, op);
  const auto g = std::get<GreedyGqState>(load_checkpoint(p1));
  const auto o = std::get<OffPacState>(load_checkpoint(p2));
  EXPECT_EQ(g.theta, gq.theta);
  EXPECT_EQ(g.w, gq.w);
  EXPECT_EQ(g.alpha_theta, 0.1);
  EXPECT_EQ(g.e.capacity(), 77u);
  EXPECT_EQ(g.e.prune_threshold(), 1e-6);
  EXPECT_TRUE(g.e.empty());
  EXPECT_EQ(g.samples, 50u);
  EXPECT_EQ(o.v, op.v);
  EXPECT_EQ(o.u, op.u);
  EXPECT_EQ(o.alpha_u, 0.02);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
  EXPECT_THROW(load_checkpoint(p1), IoError);
}

// ---------------------------------------------------------------------------
// Acting

TEST(Acting, TargetSampleIsGreedyWithProbabilityOne) {
  const Toy toy(19);
  const auto ans = toy.answer(0.0);
  Rng rng(1);
  const SampledAction a = target_sample(Weights::Zero(Toy::kDim), TargetPolicy::kGreedy, ans, 0, rng);
  EXPECT_EQ(a.action, 0u);
  EXPECT_EQ(a.probability, 1.0);
}

}  // namespace
}  // namespace gvf
