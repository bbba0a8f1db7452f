#include "gvf/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <Eigen/QR>

#include "text_format.hpp"

namespace gvf::bench {

void TabularMdp::validate() const {
  require(n_states > 0 && n_actions > 0, "TabularMdp: empty state or action set");
  require(gamma >= 0.0 && gamma < 1.0, "TabularMdp: gamma must lie in [0, 1)");
  require(transitions.size() == n_states, "TabularMdp: transition table has wrong state count");
  require(terminal.empty() || terminal.size() == n_states, "TabularMdp: terminal mask has wrong size");
  for (std::size_t s = 0; s < n_states; ++s) {
    require(transitions[s].size() == n_actions, "TabularMdp: transition table has wrong action count");
    if (is_terminal(s)) continue;
    for (const auto& row : transitions[s]) {
      double total = 0.0;
      for (const Transition& t : row) {
        require(t.next < n_states, "TabularMdp: successor out of range");
        require(t.probability >= 0.0 && std::isfinite(t.reward), "TabularMdp: invalid transition");
        total += t.probability;
      }
      require(std::abs(total - 1.0) <= 1e-12, "TabularMdp: transition row does not sum to 1");
    }
  }
}

namespace {

Eigen::MatrixXd bellman_backup(const TabularMdp& mdp, const Eigen::MatrixXd& q) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(mdp.n_states));
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    v[static_cast<Eigen::Index>(s)] = mdp.is_terminal(s) ? 0.0 : q.row(static_cast<Eigen::Index>(s)).maxCoeff();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      double total = 0.0;
      for (const Transition& t : mdp.transitions[s][a])
        total += t.probability * (t.reward + mdp.gamma * v[static_cast<Eigen::Index>(t.next)]);
      out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) = total;
    }
  }
  return out;
}

std::size_t lowest_argmax(const Eigen::MatrixXd& q, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < q.cols(); ++a)
    if (q(row, a) > q(row, best)) best = a;
  return static_cast<std::size_t>(best);
}

}  // namespace

ValueIterationResult value_iteration(const TabularMdp& mdp, double tol) {
  mdp.validate();
  require(tol > 0.0, "value_iteration: tolerance must be positive");
  // Contraction bound: a sweep changing Q by at most eps(1-g)/g leaves it within eps of Q*.
  const double stop = mdp.gamma > 0.0 ? tol * (1.0 - mdp.gamma) / mdp.gamma : std::numeric_limits<double>::infinity();
  ValueIterationResult result;
  result.q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mdp.n_states), static_cast<Eigen::Index>(mdp.n_actions));
  for (;;) {
    Eigen::MatrixXd next = bellman_backup(mdp, result.q);
    const double change = (next - result.q).cwiseAbs().maxCoeff();
    result.q = std::move(next);
    ++result.sweeps;
    if (change <= stop) break;
  }
  result.policy.resize(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) result.policy[s] = lowest_argmax(result.q, static_cast<Eigen::Index>(s));
  return result;
}

double bellman_optimality_residual(const TabularMdp& mdp, const Eigen::MatrixXd& q) {
  return (bellman_backup(mdp, q) - q).cwiseAbs().maxCoeff();
}

std::vector<std::vector<std::size_t>> optimal_action_sets(const Eigen::MatrixXd& q, double tol) {
  std::vector<std::vector<std::size_t>> sets(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const double best = q.row(s).maxCoeff();
    for (Eigen::Index a = 0; a < q.cols(); ++a)
      if (q(s, a) >= best - tol) sets[static_cast<std::size_t>(s)].push_back(static_cast<std::size_t>(a));
  }
  return sets;
}

TabularMdp make_two_state_chain(double gamma) {
  TabularMdp m;
  m.n_states = 2;
  m.n_actions = 1;
  m.gamma = gamma;
  m.transitions = {{{{1, 1.0, 0.0}}}, {{{1, 1.0, 1.0}}}};
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Gridworld

Gridworld make_gridworld(std::size_t rows, std::size_t cols, double gamma, double step_reward) {
  require(rows > 0 && cols > 0 && rows * cols > 1, "make_gridworld: grid needs at least two cells");
  Gridworld g;
  g.rows = rows;
  g.cols = cols;
  g.goal = cols - 1;
  TabularMdp& m = g.mdp;
  m.n_states = rows * cols;
  m.n_actions = 4;
  m.gamma = gamma;
  m.terminal.assign(m.n_states, false);
  m.terminal[g.goal] = true;
  m.transitions.assign(m.n_states, std::vector<std::vector<Transition>>(4));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t s = g.state(r, c);
      const std::size_t moves[4] = {
          g.state(r > 0 ? r - 1 : r, c),         // up
          g.state(r + 1 < rows ? r + 1 : r, c),  // down
          g.state(r, c > 0 ? c - 1 : c),         // left
          g.state(r, c + 1 < cols ? c + 1 : c),  // right
      };
      for (std::size_t a = 0; a < 4; ++a) m.transitions[s][a] = {{moves[a], 1.0, step_reward}};
    }
  }
  m.validate();
  return g;
}

GridworldRun run_gridworld_greedy_gq(const Gridworld& world, std::uint64_t seed, std::size_t steps, double epsilon,
                                     double alpha_theta, double alpha_w, double lambda) {
  const TabularMdp& m = world.mdp;
  const std::size_t n_states = m.n_states;
  const std::size_t n_actions = m.n_actions;
  const std::size_t dim = n_states * n_actions;

  QuestionFunctions<std::size_t> question;
  question.gamma = [&m](const std::size_t& s) { return m.is_terminal(s) ? 0.0 : m.gamma; };
  AnswerFunctions<std::size_t> answer;
  answer.behavior = EpsilonGreedyBehavior{epsilon};
  answer.features = [dim, n_actions](const std::size_t& s, ActionId a) {
    return SparseBinaryVector(dim, {s * n_actions + a});
  };
  answer.lambda = constant<std::size_t>(lambda);
  answer.actions = ActionSet::range(n_actions);

  GreedyGqState st = GreedyGqState::zeros(dim, alpha_theta, alpha_w);
  Rng rng(seed);
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < n_states; ++s)
    if (!m.is_terminal(s)) starts.push_back(s);

  std::size_t s = starts[uniform_position(rng, starts.size())];
  for (std::size_t t = 0; t < steps; ++t) {
    const SampledAction act = behavior_sample(st.theta, answer, s, rng);
    const Transition& tr = m.transitions[s][act.action].front();
    GvfSample<std::size_t> sample;
    sample.state_t = s;
    sample.action_t = act.action;
    sample.transient_reward = tr.reward;
    sample.gamma_next = question.gamma(tr.next);
    sample.state_next = tr.next;
    sample.behavior_prob = act.probability;
    greedy_gq_update(st, sample, question, answer);
    if (m.is_terminal(tr.next)) {
      greedy_gq_episode_init(st);
      s = starts[uniform_position(rng, starts.size())];
    } else {
      s = tr.next;
    }
  }

  GridworldRun run;
  run.theta = st.theta;
  run.greedy_policy.resize(n_states);
  const ValueIterationResult oracle = value_iteration(m, 1e-10);
  const auto sets = optimal_action_sets(oracle.q, 1e-8);
  std::size_t matched = 0;
  for (std::size_t x : starts) {
    run.greedy_policy[x] = greedy_action(st.theta, answer.features, x, answer.actions);
    matched += std::count(sets[x].begin(), sets[x].end(), run.greedy_policy[x]) > 0 ? 1 : 0;
  }
  run.optimal_fraction = static_cast<double>(matched) / static_cast<double>(starts.size());
  return run;
}

// ---------------------------------------------------------------------------
// Prediction problems

PredictionProblem baird_environment(double gamma) {
  PredictionProblem p;
  p.features = Eigen::MatrixXd::Zero(7, 8);
  for (Eigen::Index i = 0; i < 6; ++i) {
    p.features(i, i) = 2.0;
    p.features(i, 7) = 1.0;
  }
  p.features(6, 6) = 1.0;
  p.features(6, 7) = 2.0;

  TabularMdp& m = p.mdp;
  m.n_states = 7;
  m.n_actions = 2;
  m.gamma = gamma;
  m.transitions.assign(7, std::vector<std::vector<Transition>>(2));
  for (std::size_t s = 0; s < 7; ++s) {
    for (std::size_t j = 0; j < 6; ++j) m.transitions[s][kBairdDashed].push_back({j, 1.0 / 6.0, 0.0});
    m.transitions[s][kBairdSolid] = {{6, 1.0, 0.0}};
  }
  m.validate();

  p.target_policy = Eigen::MatrixXd::Zero(7, 2);
  p.target_policy.col(kBairdSolid).setOnes();
  p.behavior_policy = Eigen::MatrixXd(7, 2);
  p.behavior_policy.col(kBairdDashed).setConstant(6.0 / 7.0);
  p.behavior_policy.col(kBairdSolid).setConstant(1.0 / 7.0);
  p.state_distribution = Eigen::VectorXd::Constant(7, 1.0 / 7.0);
  p.initial_weights = Eigen::VectorXd::Ones(8);
  p.initial_weights[6] = 10.0;
  return p;
}

namespace {

void check_prediction_inputs(const Eigen::MatrixXd& features, const TabularMdp& mdp,
                             const Eigen::MatrixXd& target_policy, const Eigen::VectorXd& mu) {
  mdp.validate();
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  require(features.rows() == n && mu.size() == n && target_policy.rows() == n &&
              target_policy.cols() == static_cast<Eigen::Index>(mdp.n_actions),
          "prediction problem: inconsistent dimensions");
  require(features.allFinite(), "prediction problem: non-finite features");
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    require(!mdp.is_terminal(s), "prediction problem: terminal states are not supported");
}

// Expected one-step reward and successor matrix under the target policy.
void target_dynamics(const TabularMdp& mdp, const Eigen::MatrixXd& pi, Eigen::VectorXd& r, Eigen::MatrixXd& p) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  r = Eigen::VectorXd::Zero(n);
  p = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double pa = pi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      for (const Transition& t : mdp.transitions[s][a]) {
        r[static_cast<Eigen::Index>(s)] += pa * t.probability * t.reward;
        p(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t.next)) += pa * t.probability;
      }
    }
  }
}

}  // namespace

double mspbe(const Eigen::VectorXd& w, const Eigen::MatrixXd& features, const TabularMdp& mdp,
             const Eigen::MatrixXd& target_policy, const Eigen::VectorXd& mu) {
  check_prediction_inputs(features, mdp, target_policy, mu);
  require(w.size() == features.cols(), "mspbe: weight dimension mismatch");
  if (!(mu.array() > 0.0).all()) throw RankDeficiency("mspbe: state distribution must be positive");

  Eigen::VectorXd r;
  Eigen::MatrixXd p;
  target_dynamics(mdp, target_policy, r, p);
  const Eigen::VectorXd v = features * w;
  const Eigen::VectorXd delta = r + mdp.gamma * p * v - v;

  const Eigen::VectorXd root_mu = mu.cwiseSqrt();
  const Eigen::MatrixXd a = root_mu.asDiagonal() * features;
  const Eigen::VectorXd b = root_mu.cwiseProduct(delta);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  if (cod.rank() == 0) throw RankDeficiency("mspbe: feature matrix has rank zero");
  const Eigen::VectorXd projected = a * cod.solve(b);
  return projected.squaredNorm();
}

Eigen::VectorXd td_fixed_point(const Eigen::MatrixXd& features, const TabularMdp& mdp,
                               const Eigen::MatrixXd& target_policy, const Eigen::VectorXd& mu) {
  check_prediction_inputs(features, mdp, target_policy, mu);
  Eigen::VectorXd r;
  Eigen::MatrixXd p;
  target_dynamics(mdp, target_policy, r, p);
  const Eigen::MatrixXd weighted = features.transpose() * mu.asDiagonal();
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  const Eigen::MatrixXd a = weighted * (Eigen::MatrixXd::Identity(n, n) - mdp.gamma * p) * features;
  const Eigen::VectorXd b = weighted * r;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  if (cod.rank() == 0 && !b.isZero(0.0)) throw RankDeficiency("td_fixed_point: system has rank zero");
  return cod.solve(b);
}

std::vector<PredictionSample> baird_sweep(const PredictionProblem& problem) {
  const TabularMdp& m = problem.mdp;
  struct Mass {
    PredictionSample sample;
    double mass;
  };
  std::vector<Mass> masses;
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < m.n_states; ++s) {
    for (std::size_t a = 0; a < m.n_actions; ++a) {
      const double b = problem.behavior_policy(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      for (const Transition& t : m.transitions[s][a]) {
        const double mass = problem.state_distribution[static_cast<Eigen::Index>(s)] * b * t.probability;
        if (mass <= 0.0) continue;
        masses.push_back({{s, a, t.next, t.reward, b}, mass});
        smallest = std::min(smallest, mass);
      }
    }
  }
  std::vector<PredictionSample> sweep;
  for (const Mass& m_ : masses) {
    const double copies = m_.mass / smallest;
    const double rounded = std::round(copies);
    require(std::abs(copies - rounded) <= 1e-9 * rounded, "baird_sweep: masses are not integer multiples");
    for (std::size_t k = 0; k < static_cast<std::size_t>(rounded); ++k) sweep.push_back(m_.sample);
  }
  return sweep;
}

std::vector<double> run_naive_td0(const PredictionProblem& problem, double alpha, std::size_t sweeps,
                                  Eigen::VectorXd& w) {
  require(w.size() == problem.features.cols(), "run_naive_td0: weight dimension mismatch");
  const std::vector<PredictionSample> sweep = baird_sweep(problem);
  const double gamma = problem.mdp.gamma;
  std::vector<double> norms;
  norms.reserve(sweeps);
  for (std::size_t k = 0; k < sweeps; ++k) {
    for (const PredictionSample& x : sweep) {
      const auto row = static_cast<Eigen::Index>(x.state);
      const double rho = problem.target_policy(row, static_cast<Eigen::Index>(x.action)) / x.behavior_prob;
      if (rho == 0.0) continue;
      const double delta = x.reward + gamma * problem.features.row(static_cast<Eigen::Index>(x.next)).dot(w) -
                           problem.features.row(row).dot(w);
      w += alpha * rho * delta * problem.features.row(row).transpose();
    }
    norms.push_back(w.norm());
    if (!std::isfinite(norms.back())) break;
  }
  return norms;
}

namespace {

SparseVector<double> sparse_row(const Eigen::MatrixXd& m, Eigen::Index row) {
  std::vector<SparseEntry<double>> entries;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (m(row, j) != 0.0) entries.push_back({static_cast<std::size_t>(j), m(row, j)});
  return SparseVector<double>(static_cast<std::size_t>(m.cols()), std::move(entries));
}

}  // namespace

CriticRun run_frozen_actor_critic(const PredictionProblem& problem, double alpha_v, double alpha_w, double lambda,
                                  std::size_t sweeps, double stop_below) {
  const TabularMdp& m = problem.mdp;
  const auto n_actions = static_cast<Eigen::Index>(m.n_actions);
  for (Eigen::Index s = 1; s < problem.target_policy.rows(); ++s)
    require(problem.target_policy.row(s) == problem.target_policy.row(0),
            "run_frozen_actor_critic: target policy must not depend on the state");

  // Actor features are one-hot in the action; preferences log pi reproduce the target.
  Weights u(n_actions);
  for (Eigen::Index a = 0; a < n_actions; ++a) u[a] = std::max(std::log(problem.target_policy(0, a)), -kFrozenLogFloor);

  std::vector<SparseVector<double>> state_features;
  for (Eigen::Index s = 0; s < problem.features.rows(); ++s) state_features.push_back(sparse_row(problem.features, s));

  QuestionFunctions<std::size_t> question;
  question.gamma = constant<std::size_t>(m.gamma);
  AnswerFunctions<std::size_t, SparseVector<double>> answer;
  answer.state_features = [&state_features](const std::size_t& s) { return state_features[s]; };
  answer.features = [n_actions](const std::size_t&, ActionId a) {
    return SparseVector<double>(static_cast<std::size_t>(n_actions), {{a, 1.0}});
  };
  answer.lambda = constant<std::size_t>(lambda);
  answer.actions = ActionSet::range(static_cast<std::size_t>(n_actions));

  OffPacState st = OffPacState::zeros(static_cast<std::size_t>(problem.features.cols()),
                                      static_cast<std::size_t>(n_actions), alpha_v, alpha_w, 0.0);
  st.v = problem.initial_weights;
  st.u = u;
  st.refresh_norms();

  const std::vector<PredictionSample> sweep = baird_sweep(problem);
  CriticRun run;
  run.mspbe_per_sweep.reserve(sweeps);
  for (std::size_t k = 0; k < sweeps; ++k) {
    for (const PredictionSample& x : sweep) {
      GvfSample<std::size_t> sample;
      sample.state_t = x.state;
      sample.action_t = static_cast<ActionId>(x.action);
      sample.transient_reward = x.reward;
      sample.gamma_next = m.gamma;
      sample.state_next = x.next;
      sample.behavior_prob = x.behavior_prob;
      offpac_update(st, sample, question, answer);
    }
    run.mspbe_per_sweep.push_back(mspbe(st.v, problem.features, m, problem.target_policy, problem.state_distribution));
    if (run.mspbe_per_sweep.back() < stop_below) break;
  }
  run.v = st.v;
  return run;
}

// ---------------------------------------------------------------------------
// Bandit

BanditRun run_offpac_bandit(std::uint64_t seed, std::size_t updates, double alpha_v, double alpha_u) {
  using State = int;
  QuestionFunctions<State> question;
  question.gamma = constant<State>(0.0);
  AnswerFunctions<State> answer;
  answer.state_features = [](const State&) { return SparseBinaryVector(1, {0}); };
  answer.features = [](const State&, ActionId a) { return SparseBinaryVector(2, {a}); };
  answer.actions = ActionSet::range(2);

  OffPacState st = OffPacState::zeros(1, 2, alpha_v, 0.0, alpha_u);
  Rng rng(seed);
  BanditRun run;
  run.optimal_prob.reserve(updates);
  for (std::size_t t = 0; t < updates; ++t) {
    const auto a = static_cast<ActionId>(uniform_position(rng, 2));
    GvfSample<State> sample;
    sample.action_t = a;
    sample.transient_reward = a == 0 ? 1.0 : 0.0;
    sample.gamma_next = 0.0;
    sample.behavior_prob = 0.5;
    offpac_update(st, sample, question, answer);
    run.optimal_prob.push_back(gibbs_distribution(st.u, answer.features, State{}, answer.actions)[0]);
  }
  return run;
}

// ---------------------------------------------------------------------------
// Gradient check

GradientCheck gibbs_gradient_check(std::uint64_t seed, std::size_t draws, double h) {
  constexpr std::size_t kDim = 24;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  GradientCheck report;
  for (std::size_t d = 0; d < draws; ++d) {
    const std::size_t n_actions = 2 + uniform_position(rng, 5);
    std::vector<SparseBinaryVector> features;
    for (std::size_t a = 0; a < n_actions; ++a) {
      std::vector<std::size_t> active;
      for (std::size_t k = 0; k < 4; ++k) active.push_back(uniform_position(rng, kDim));
      features.emplace_back(kDim, std::move(active));
    }
    Weights u(static_cast<Eigen::Index>(kDim));
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
    const std::size_t chosen = uniform_position(rng, n_actions);

    auto log_pi = [&](const Weights& x) {
      std::vector<double> prefs;
      for (const auto& f : features) prefs.push_back(dot(x, f));
      return std::log(softmax(prefs)[chosen]);
    };
    std::vector<double> prefs;
    for (const auto& f : features) prefs.push_back(dot(u, f));
    const DiscreteDistribution pi = softmax(prefs);

    Eigen::VectorXd numeric(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      Weights plus = u, minus = u;
      plus[i] += h;
      minus[i] -= h;
      numeric[i] = (log_pi(plus) - log_pi(minus)) / (2.0 * h);
    }
    const Eigen::VectorXd analytic = gibbs_log_gradient(features, pi, chosen).to_dense();
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
    report.max_relative_error = std::max(report.max_relative_error, (analytic - numeric).norm() / scale);

    Eigen::VectorXd score = Eigen::VectorXd::Zero(u.size());
    for (std::size_t b = 0; b < n_actions; ++b) score += pi[b] * gibbs_log_gradient(features, pi, b).to_dense();
    report.max_score_residual = std::max(report.max_score_residual, score.cwiseAbs().maxCoeff());
    ++report.draws;
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV

void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << "step,metric,value\n";
  for (const MetricRow& r : rows) out << r.step << ',' << r.metric << ',' << text::real(r.value) << '\n';
}

}  // namespace gvf::bench
