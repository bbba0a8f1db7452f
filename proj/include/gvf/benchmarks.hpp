#pragma once

// Small environments with exact answers, used to check the learners against
// independent oracles: tabular MDPs solved by value iteration, Baird's
// seven-state counterexample, and the mean-squared projected Bellman error.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "gvf/learners.hpp"

namespace gvf::bench {

struct Transition {
  std::size_t next = 0;
  double probability = 0.0;
  double reward = 0.0;
};

/// Finite MDP. Terminal states are absorbing with value zero; their outgoing
/// transitions are ignored.
struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  /// transitions[s][a] lists the successor distribution of (s, a).
  std::vector<std::vector<std::vector<Transition>>> transitions;
  double gamma = 0.9;
  std::vector<bool> terminal;

  bool is_terminal(std::size_t s) const { return !terminal.empty() && terminal[s]; }
  /// Throws ContractViolation unless every row is a distribution within 1e-12.
  void validate() const;
};

class RankDeficiency : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValueIterationResult {
  Eigen::MatrixXd q;                // n_states x n_actions
  std::vector<std::size_t> policy;  // greedy, lowest action on ties
  std::size_t sweeps = 0;
};

/// Q within `tol` of the optimal action values in sup-norm.
ValueIterationResult value_iteration(const TabularMdp& mdp, double tol);

/// sup_{s,a} |(T* q)(s, a) - q(s, a)|.
double bellman_optimality_residual(const TabularMdp& mdp, const Eigen::MatrixXd& q);

/// Actions whose value is within `tol` of the state's best value.
std::vector<std::vector<std::size_t>> optimal_action_sets(const Eigen::MatrixXd& q, double tol);

// ---------------------------------------------------------------------------
// Gridworld

struct Gridworld {
  std::size_t rows = 5;
  std::size_t cols = 5;
  std::size_t goal = 4;  // top-right corner
  TabularMdp mdp;

  std::size_t state(std::size_t row, std::size_t col) const { return row * cols + col; }
};

/// Two states, one action: 0 -> 1 with reward 0, then 1 -> 1 with reward 1.
/// Values are 0 + gamma / (1 - gamma) and 1 / (1 - gamma).
TabularMdp make_two_state_chain(double gamma);

/// Deterministic grid, actions up/down/left/right (bumping a wall stays put),
/// `step_reward` per move, a single absorbing goal with terminal reward 0.
Gridworld make_gridworld(std::size_t rows = 5, std::size_t cols = 5, double gamma = 0.95, double step_reward = -1.0);

struct GridworldRun {
  Weights theta;
  std::vector<std::size_t> greedy_policy;
  double optimal_fraction = 0.0;  // share of non-terminal states with an optimal greedy action
};

/// Greedy-GQ(lambda) with one-hot (state, action) features and epsilon-greedy
/// behavior, `steps` transitions with restarts from uniformly drawn states.
GridworldRun run_gridworld_greedy_gq(const Gridworld& world, std::uint64_t seed, std::size_t steps,
                                     double epsilon = 0.1, double alpha_theta = 0.1, double alpha_w = 0.01,
                                     double lambda = 0.0);

// ---------------------------------------------------------------------------
// Prediction problems

struct PredictionProblem {
  Eigen::MatrixXd features;          // n_states x n_features
  TabularMdp mdp;
  Eigen::MatrixXd target_policy;     // n_states x n_actions
  Eigen::MatrixXd behavior_policy;   // n_states x n_actions
  Eigen::VectorXd state_distribution;  // behavior's on-policy state distribution
  Eigen::VectorXd initial_weights;
};

/// Baird's counterexample: states 0..5 have features 2 e_i + e_7, state 6 has
/// e_6 + 2 e_7. Action 0 (dashed) jumps uniformly to states 0..5, action 1
/// (solid) to state 6. Behavior takes dashed with probability 6/7, the target
/// always takes solid; all rewards are zero. Initial weights (1,1,1,1,1,1,10,1).
PredictionProblem baird_environment(double gamma = 0.99);

inline constexpr std::size_t kBairdDashed = 0;
inline constexpr std::size_t kBairdSolid = 1;

/// Mean-squared projected Bellman error of v = features * w for the target
/// policy, with projection and norm weighted by `mu`. Rank-deficient feature
/// matrices are handled by a least-squares projection; throws RankDeficiency
/// when `mu` has a nonpositive entry or the weighted features have rank zero.
double mspbe(const Eigen::VectorXd& w, const Eigen::MatrixXd& features, const TabularMdp& mdp,
             const Eigen::MatrixXd& target_policy, const Eigen::VectorXd& mu);

/// Minimum-norm TD fixed point: solves features' D (I - gamma P) features w = features' D r.
Eigen::VectorXd td_fixed_point(const Eigen::MatrixXd& features, const TabularMdp& mdp,
                               const Eigen::MatrixXd& target_policy, const Eigen::VectorXd& mu);

/// One off-policy sample of a prediction problem.
struct PredictionSample {
  std::size_t state = 0;
  std::size_t action = 0;
  std::size_t next = 0;
  double reward = 0.0;
  double behavior_prob = 1.0;
};

/// One sweep: every (state, action, successor) with positive probability,
/// each listed once per unit of its probability mass relative to the
/// smallest mass. For Baird this is 49 samples that reproduce the behavior
/// distribution exactly.
std::vector<PredictionSample> baird_sweep(const PredictionProblem& problem);

/// Semi-gradient off-policy TD(0): w += alpha rho delta phi. Returns ||w|| after
/// each sweep.
std::vector<double> run_naive_td0(const PredictionProblem& problem, double alpha, std::size_t sweeps,
                                  Eigen::VectorXd& w);

struct CriticRun {
  std::vector<double> mspbe_per_sweep;
  Eigen::VectorXd v;
};

/// Off-PAC with the actor frozen (alpha_u = 0) and preferences set so the
/// Gibbs target takes the problem's target action; only the GTD(lambda) critic
/// learns. MSPBE is evaluated after each sweep by the dense oracle.
/// Stops early once the MSPBE drops below `stop_below`.
CriticRun run_frozen_actor_critic(const PredictionProblem& problem, double alpha_v, double alpha_w, double lambda,
                                  std::size_t sweeps, double stop_below = 0.0);

/// Preferences of the frozen actor are log pi, floored at -kFrozenLogFloor.
inline constexpr double kFrozenLogFloor = 40.0;

// ---------------------------------------------------------------------------
// Bandit

struct BanditRun {
  std::vector<double> optimal_prob;  // pi(optimal | s) after each update
};

/// One state, two actions, gamma = 0, reward 1 for action 0 and 0 for action 1,
/// uniform behavior; Off-PAC with a bias-feature critic and one-hot actor.
BanditRun run_offpac_bandit(std::uint64_t seed, std::size_t updates, double alpha_v = 0.1, double alpha_u = 0.01);

// ---------------------------------------------------------------------------
// Gradient check and CSV output

struct GradientCheck {
  std::size_t draws = 0;
  double max_relative_error = 0.0;  // ||analytic - central difference|| / max norm
  double max_score_residual = 0.0;  // sup |sum_a pi(a) grad ln pi(a)|
};

/// Random Gibbs policies over sparse binary features; compares
/// gibbs_log_gradient with central differences of ln pi at step h.
GradientCheck gibbs_gradient_check(std::uint64_t seed, std::size_t draws, double h = 1e-6);

struct MetricRow {
  std::uint64_t step = 0;
  std::string metric;
  double value = 0.0;
};

/// Header "step,metric,value", then one row per entry.
void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& rows);

}  // namespace gvf::bench
