#pragma once

// Incremental off-policy learners over linear function approximation:
//
//   Greedy-GQ(lambda): action values Q(s, a) = theta' phi(s, a) whose target
//     policy is greedy in theta; behavior is typically epsilon-greedy.
//   Off-PAC: a GTD(lambda) critic V(s) = v' phi(s) and a Gibbs actor
//     pi(a|s) proportional to exp(u' psi(s, a)).
//
// Both consume GvfSample records one at a time. Continuation at the current
// state is read from QuestionFunctions::gamma; continuation at the successor
// comes from the sample so environments can signal (pseudo-)termination.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "gvf/errors.hpp"
#include "gvf/gvf.hpp"
#include "gvf/policies.hpp"
#include "gvf/sparse_linalg.hpp"

namespace gvf {

struct UpdateDiagnostics {
  double delta = 0.0;
  double rho = 0.0;
  std::size_t trace_entries = 0;        // e, or e^v for Off-PAC
  std::size_t actor_trace_entries = 0;  // e^u; zero for Greedy-GQ
  double main_norm = 0.0;               // ||theta|| or ||v||
  double correction_norm = 0.0;         // ||w||
  double actor_norm = 0.0;              // ||u||; zero for Greedy-GQ
};

struct TraceSettings {
  std::size_t capacity = Trace::kDefaultCapacity;
  double prune_threshold = 1e-8;
};

struct GreedyGqState {
  Weights theta;
  Weights w;
  Trace e;
  double alpha_theta = 0.0;
  double alpha_w = 0.0;
  std::uint64_t samples = 0;
  // Running squared norms of theta and w, maintained by the update kernels.
  double theta_sq_norm = 0.0;
  double w_sq_norm = 0.0;

  static GreedyGqState zeros(std::size_t dimension, double alpha_theta, double alpha_w,
                             TraceSettings trace = {});
  void refresh_norms();
};

struct OffPacState {
  Weights v;  // critic, state features
  Weights w;  // critic correction, state features
  Weights u;  // actor, state-action features
  Trace e_v;
  Trace e_u;
  double alpha_v = 0.0;
  double alpha_w = 0.0;
  double alpha_u = 0.0;
  std::uint64_t samples = 0;
  double v_sq_norm = 0.0;
  double w_sq_norm = 0.0;
  double u_sq_norm = 0.0;

  static OffPacState zeros(std::size_t state_dimension, std::size_t policy_dimension, double alpha_v,
                           double alpha_w, double alpha_u, TraceSettings trace = {});
  void refresh_norms();
};

namespace detail {

inline double checked_unit(double value, const char* what) {
  if (!(value >= 0.0 && value <= 1.0)) throw ContractViolation(std::string(what) + " must lie in [0, 1]");
  return value;
}

template <typename State, typename Features>
double interest_at(const AnswerFunctions<State, Features>& answer, const State& s, ActionId a) {
  return answer.interest ? checked_unit(answer.interest(s, a), "interest") : 1.0;
}

template <typename F, typename State>
double unit_or_zero(const F& f, const State& s, const char* what) {
  return f ? checked_unit(f(s), what) : 0.0;
}

[[noreturn]] inline void poisoned(const char* algorithm, double delta, std::uint64_t samples) {
  throw LearnerPoisoned(std::string(algorithm) + ": non-finite TD error (" + std::to_string(delta) +
                        ") at sample " + std::to_string(samples));
}

inline double safe_sqrt(double sq) { return sq > 0.0 ? std::sqrt(sq) : 0.0; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Greedy-GQ(lambda)

inline void greedy_gq_episode_init(GreedyGqState& state) { state.e.clear(); }

template <typename State, typename Features>
UpdateDiagnostics greedy_gq_update(GreedyGqState& st, const GvfSample<State>& sample,
                                   const QuestionFunctions<State>& question,
                                   const AnswerFunctions<State, Features>& answer) {
  require(sample.behavior_prob > 0.0, "greedy_gq_update: behavior probability must be positive");
  const ActionSet& actions = answer.actions;
  require(actions.contains(sample.action_t), "greedy_gq_update: action not in action set");
  const double gamma_next = detail::checked_unit(sample.gamma_next, "gamma_next");

  // Greedy successor action and its features under the current theta.
  std::vector<Features> next_features;
  std::vector<double> next_values;
  next_features.reserve(actions.size());
  next_values.reserve(actions.size());
  for (ActionId b : actions) {
    next_features.push_back(answer.features(sample.state_next, b));
    next_values.push_back(dot(st.theta, next_features.back()));
  }
  const std::size_t best_next = argmax_position(next_values, actions);
  const Features& phi_hat = next_features[best_next];

  const Features phi = answer.features(sample.state_t, sample.action_t);
  const double delta = corrected_return_target(sample, next_values[best_next]) - dot(st.theta, phi);
  if (!std::isfinite(delta)) detail::poisoned("greedy_gq", delta, st.samples);

  const ActionId greedy_now = greedy_action(st.theta, answer.features, sample.state_t, actions);
  const double rho = importance_ratio_greedy(sample.action_t, greedy_now, sample.behavior_prob);

  const double gamma_t = detail::checked_unit(question.gamma(sample.state_t), "gamma");
  const double lambda_t = detail::unit_or_zero(answer.lambda, sample.state_t, "lambda");
  const double lambda_next = detail::unit_or_zero(answer.lambda, sample.state_next, "lambda");
  const double interest = detail::interest_at(answer, sample.state_t, sample.action_t);

  st.e.rescale_add(gamma_t * lambda_t * rho, interest, phi);

  const double w_dot_e = trace_dot(st.e, st.w);
  const double w_dot_phi = dot(st.w, phi);
  st.theta_sq_norm += axpy_trace(st.theta, st.alpha_theta * delta, st.e);
  st.theta_sq_norm += axpy_sparse(st.theta, -st.alpha_theta * gamma_next * (1.0 - lambda_next) * w_dot_e, phi_hat);
  st.w_sq_norm += axpy_trace(st.w, st.alpha_w * delta, st.e);
  st.w_sq_norm += axpy_sparse(st.w, -st.alpha_w * w_dot_phi, phi);
  ++st.samples;

  UpdateDiagnostics d;
  d.delta = delta;
  d.rho = rho;
  d.trace_entries = st.e.size();
  d.main_norm = detail::safe_sqrt(st.theta_sq_norm);
  d.correction_norm = detail::safe_sqrt(st.w_sq_norm);
  return d;
}

template <typename State, typename Features>
double predict_q(const GreedyGqState& st, const AnswerFunctions<State, Features>& answer, const State& s, ActionId a) {
  return dot(st.theta, answer.features(s, a));
}

// ---------------------------------------------------------------------------
// Off-PAC

inline void offpac_episode_init(OffPacState& state) {
  state.e_v.clear();
  state.e_u.clear();
}

/// grad_u ln pi(action | s) from precomputed per-action features and probabilities.
template <typename Features>
SparseVector<double> gibbs_log_gradient(const std::vector<Features>& features, const DiscreteDistribution& pi,
                                        std::size_t position) {
  require(!features.empty() && features.size() == pi.size() && position < features.size(),
          "gibbs_log_gradient: inconsistent inputs");
  std::vector<SparseEntry<double>> entries;
  for_each_nonzero(features[position], [&](std::size_t i, double x) { entries.push_back({i, x}); });
  for (std::size_t b = 0; b < features.size(); ++b)
    for_each_nonzero(features[b], [&](std::size_t i, double x) { entries.push_back({i, -pi[b] * x}); });
  SparseVector<double> summed(features.front().dimension(), std::move(entries));
  std::vector<SparseEntry<double>> nonzero;
  nonzero.reserve(summed.size());
  for (const auto& e : summed.entries())
    if (e.value != 0.0) nonzero.push_back(e);
  return SparseVector<double>(summed.dimension(), std::move(nonzero));
}

/// phi(s, a) - sum_b pi(b|s) phi(s, b) for the Gibbs policy with weights u.
template <typename Encoder, typename State>
SparseVector<double> gibbs_log_gradient(const Weights& u, const Encoder& encode, const State& s, ActionId action,
                                        const ActionSet& actions) {
  require(actions.contains(action), "gibbs_log_gradient: action not in action set");
  std::vector<decltype(encode(s, action))> features;
  std::vector<double> prefs;
  for (ActionId b : actions) {
    features.push_back(encode(s, b));
    prefs.push_back(dot(u, features.back()));
  }
  return gibbs_log_gradient(features, softmax(prefs), actions.position(action));
}

template <typename State, typename Features>
UpdateDiagnostics offpac_update(OffPacState& st, const GvfSample<State>& sample,
                                const QuestionFunctions<State>& question,
                                const AnswerFunctions<State, Features>& answer) {
  require(sample.behavior_prob > 0.0, "offpac_update: behavior probability must be positive");
  const ActionSet& actions = answer.actions;
  const std::size_t position = actions.position(sample.action_t);
  require(position < actions.size(), "offpac_update: action not in action set");
  const double gamma_next = detail::checked_unit(sample.gamma_next, "gamma_next");

  const Features phi = answer.state_features(sample.state_t);
  const Features phi_next = answer.state_features(sample.state_next);
  const double delta = corrected_return_target(sample, dot(st.v, phi_next)) - dot(st.v, phi);
  if (!std::isfinite(delta)) detail::poisoned("offpac", delta, st.samples);

  std::vector<Features> policy_features;
  std::vector<double> prefs;
  policy_features.reserve(actions.size());
  prefs.reserve(actions.size());
  for (ActionId b : actions) {
    policy_features.push_back(answer.features(sample.state_t, b));
    prefs.push_back(dot(st.u, policy_features.back()));
  }
  const DiscreteDistribution pi = softmax(prefs);
  const double rho = importance_ratio(pi[position], sample.behavior_prob);

  const double gamma_t = detail::checked_unit(question.gamma(sample.state_t), "gamma");
  const double lambda_t = detail::unit_or_zero(answer.lambda, sample.state_t, "lambda");
  const double lambda_next = detail::unit_or_zero(answer.lambda, sample.state_next, "lambda");
  const double lambda_actor_next = detail::unit_or_zero(answer.lambda_actor, sample.state_next, "lambda_actor");

  // Critic: GTD(lambda).
  st.e_v.rescale_add(rho * gamma_t * lambda_t, rho, phi);
  const double ev_dot_w = trace_dot(st.e_v, st.w);
  const double w_dot_phi = dot(st.w, phi);
  st.v_sq_norm += axpy_trace(st.v, st.alpha_v * delta, st.e_v);
  st.v_sq_norm += axpy_sparse(st.v, -st.alpha_v * gamma_next * (1.0 - lambda_next) * ev_dot_w, phi_next);
  st.w_sq_norm += axpy_trace(st.w, st.alpha_w * delta, st.e_v);
  st.w_sq_norm += axpy_sparse(st.w, -st.alpha_w * w_dot_phi, phi);

  // Actor.
  st.e_u.rescale_add(rho * gamma_t * lambda_actor_next, rho, gibbs_log_gradient(policy_features, pi, position));
  st.u_sq_norm += axpy_trace(st.u, st.alpha_u * delta, st.e_u);
  ++st.samples;

  UpdateDiagnostics d;
  d.delta = delta;
  d.rho = rho;
  d.trace_entries = st.e_v.size();
  d.actor_trace_entries = st.e_u.size();
  d.main_norm = detail::safe_sqrt(st.v_sq_norm);
  d.correction_norm = detail::safe_sqrt(st.w_sq_norm);
  d.actor_norm = detail::safe_sqrt(st.u_sq_norm);
  return d;
}

template <typename State, typename Features>
double predict_v(const OffPacState& st, const AnswerFunctions<State, Features>& answer, const State& s) {
  return dot(st.v, answer.state_features(s));
}

// ---------------------------------------------------------------------------
// Acting

/// Samples from the answer's behavior policy, built over the learner's
/// action-preference weights (theta for Greedy-GQ, u for Off-PAC).
template <typename State, typename Features>
SampledAction behavior_sample(const Weights& preferences, const AnswerFunctions<State, Features>& answer, const State& s,
                              Rng& rng) {
  return std::visit(
      [&](const auto& b) -> SampledAction {
        using B = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<B, EpsilonGreedyBehavior>)
          return epsilon_greedy_sample(preferences, answer.features, s, answer.actions, b.epsilon, rng);
        else
          return perturbed_gibbs_sample(preferences, answer.features, s, answer.actions, b.perturb_prob, b.beta,
                                        rng);
      },
      answer.behavior);
}

/// Action under the target policy alone (no exploration).
template <typename State, typename Features>
SampledAction target_sample(const Weights& preferences, TargetPolicy target,
                            const AnswerFunctions<State, Features>& answer,
                            const State& s, Rng& rng) {
  if (target == TargetPolicy::kGreedy) return {greedy_action(preferences, answer.features, s, answer.actions), 1.0};
  const DiscreteDistribution pi = gibbs_distribution(preferences, answer.features, s, answer.actions);
  const std::size_t k = sample_position(pi, rng);
  return {answer.actions[k], pi[k]};
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   "GVFC" | u32 version (=1) | u32 algorithm (0 Greedy-GQ, 1 Off-PAC) |
//   u64 sample count | u32 n | f64 x n hyperparameters |
//   u32 m | m weight blocks in the sparse weight-file encoding
//
// Hyperparameters: Greedy-GQ (alpha_theta, alpha_w, trace capacity, prune
// threshold) with blocks (theta, w); Off-PAC (alpha_v, alpha_w, alpha_u,
// trace capacity, prune threshold) with blocks (v, w, u). Traces are not
// stored; a restored learner starts a fresh episode.

enum class Algorithm : std::uint32_t { kGreedyGq = 0, kOffPac = 1 };

using LearnerState = std::variant<GreedyGqState, OffPacState>;

void save_checkpoint(const std::filesystem::path& path, const LearnerState& learner);
LearnerState load_checkpoint(const std::filesystem::path& path);

}  // namespace gvf
