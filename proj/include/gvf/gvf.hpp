#pragma once

// Question and answer functions of a general value function, the off-policy
// transition record both learners consume, and the text experience log.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gvf/policies.hpp"
#include "gvf/sparse_linalg.hpp"

namespace gvf {

enum class TargetPolicy { kGreedy, kGibbs };

struct EpsilonGreedyBehavior {
  double epsilon = 0.05;
};

struct PerturbedGibbsBehavior {
  double perturb_prob = 0.01;
  double beta = 0.5;
};

using BehaviorPolicy = std::variant<EpsilonGreedyBehavior, PerturbedGibbsBehavior>;

/// What the value function asks: continuation, rewards and target policy.
template <typename State>
struct QuestionFunctions {
  std::function<double(const State&)> gamma;
  std::function<double(const State&)> transient_reward;
  std::function<double(const State&)> terminal_reward;
  TargetPolicy target = TargetPolicy::kGreedy;
};

/// How the answer is learned. `features` is the state-action map used by
/// Greedy-GQ and by the Gibbs actor; `state_features` is the critic's map.
/// Features are binary (tile coding) by default; SparseVector<double> works
/// for real-valued features. An empty `interest` means I = 1; empty lambdas
/// mean 0.
template <typename State, typename Features = SparseBinaryVector>
struct AnswerFunctions {
  using FeatureVector = Features;

  BehaviorPolicy behavior = EpsilonGreedyBehavior{};
  std::function<double(const State&, ActionId)> interest;
  std::function<Features(const State&, ActionId)> features;
  std::function<Features(const State&)> state_features;
  std::function<double(const State&)> lambda;
  std::function<double(const State&)> lambda_actor;
  ActionSet actions;
};

template <typename State>
std::function<double(const State&)> constant(double value) {
  return [value](const State&) { return value; };
}

/// One off-policy transition. Rewards and gamma are evaluated at the successor.
template <typename State>
struct GvfSample {
  State state_t{};
  ActionId action_t = 0;
  double transient_reward = 0.0;
  double terminal_reward = 0.0;
  double gamma_next = 0.0;
  State state_next{};
  double behavior_prob = 1.0;
};

template <typename State>
GvfSample<State> make_sample(const QuestionFunctions<State>& question, State state, ActionId action,
                             State next, double behavior_prob) {
  GvfSample<State> s;
  s.transient_reward = question.transient_reward ? question.transient_reward(next) : 0.0;
  s.terminal_reward = question.terminal_reward ? question.terminal_reward(next) : 0.0;
  s.gamma_next = question.gamma(next);
  s.state_t = std::move(state);
  s.action_t = action;
  s.state_next = std::move(next);
  s.behavior_prob = behavior_prob;
  return s;
}

/// r + (1 - gamma') z + gamma' * next_value.
template <typename State>
double corrected_return_target(const GvfSample<State>& sample, double next_value) {
  return sample.transient_reward + (1.0 - sample.gamma_next) * sample.terminal_reward +
         sample.gamma_next * next_value;
}

inline double complete_return(std::span<const double> rewards, double terminal) {
  double g = 0.0;
  for (double r : rewards) g += r;
  return g + terminal;
}

// ---------------------------------------------------------------------------
// Experience log
//
// One record per line, comma separated, reals printed with 17 significant
// digits:
//
//   episode,step,learner,action,r,z,gamma_next,behavior_prob,n,s_t[0..n),s_next[0..n)
//
// Lines starting with '#' are comments.

using StateVector = std::vector<double>;

struct ExperienceRecord {
  std::uint64_t episode = 0;
  std::uint64_t step = 0;
  std::uint32_t learner = 0;
  GvfSample<StateVector> sample;

  friend bool operator==(const ExperienceRecord& a, const ExperienceRecord& b) {
    return a.episode == b.episode && a.step == b.step && a.learner == b.learner &&
           a.sample.action_t == b.sample.action_t && a.sample.transient_reward == b.sample.transient_reward &&
           a.sample.terminal_reward == b.sample.terminal_reward && a.sample.gamma_next == b.sample.gamma_next &&
           a.sample.behavior_prob == b.sample.behavior_prob && a.sample.state_t == b.sample.state_t &&
           a.sample.state_next == b.sample.state_next;
  }
};

std::string format_record(const ExperienceRecord& record);

/// Throws ParseError carrying `line_number`.
ExperienceRecord parse_record(std::string_view line, std::size_t line_number);

std::vector<ExperienceRecord> read_experience_log(const std::filesystem::path& path);

class ExperienceLogWriter {
 public:
  explicit ExperienceLogWriter(const std::filesystem::path& path);
  void write(const ExperienceRecord& record);
  void flush();

 private:
  std::ofstream out_;
};

}  // namespace gvf
