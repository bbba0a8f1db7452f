#pragma once

// Target and behavior policy constructions over linear action values.
//
// An encoder is any callable `(const State&, ActionId) -> SparseBinaryVector`.
// Distributions are indexed in ActionSet order, not by action id.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "gvf/sparse_linalg.hpp"
#include "gvf/tile_coding.hpp"

namespace gvf {

using Rng = std::mt19937_64;

class ActionSet {
 public:
  ActionSet() = default;
  explicit ActionSet(std::vector<ActionId> ids) : ids_(std::move(ids)) {
    std::vector<ActionId> sorted = ids_;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "ActionSet: action ids must be unique");
  }

  /// Actions 0, 1, ..., n - 1.
  static ActionSet range(std::size_t n) {
    std::vector<ActionId> ids(n);
    for (std::size_t k = 0; k < n; ++k) ids[k] = static_cast<ActionId>(k);
    return ActionSet(std::move(ids));
  }

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  ActionId operator[](std::size_t k) const { return ids_[k]; }
  const std::vector<ActionId>& ids() const noexcept { return ids_; }

  /// Position of `id` in the set, or size() when absent.
  std::size_t position(ActionId id) const {
    return static_cast<std::size_t>(std::find(ids_.begin(), ids_.end(), id) - ids_.begin());
  }
  bool contains(ActionId id) const { return position(id) < size(); }

  auto begin() const noexcept { return ids_.begin(); }
  auto end() const noexcept { return ids_.end(); }

 private:
  std::vector<ActionId> ids_;
};

struct DiscreteDistribution {
  std::vector<double> probabilities;

  std::size_t size() const noexcept { return probabilities.size(); }
  double operator[](std::size_t k) const { return probabilities[k]; }
};

struct SampledAction {
  ActionId action;
  double probability;
};

template <typename Encoder, typename State>
std::vector<double> action_values(const Weights& weights, const Encoder& encode, const State& state,
                                  const ActionSet& actions) {
  std::vector<double> values;
  values.reserve(actions.size());
  for (ActionId a : actions) values.push_back(dot(weights, encode(state, a)));
  return values;
}

/// Position of the maximal value; ties go to the lowest action id.
inline std::size_t argmax_position(const std::vector<double>& values, const ActionSet& actions) {
  require(!actions.empty() && values.size() == actions.size(), "argmax: empty action set");
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best] || (values[k] == values[best] && actions[k] < actions[best])) best = k;
  }
  return best;
}

template <typename Encoder, typename State>
ActionId greedy_action(const Weights& theta, const Encoder& encode, const State& state,
                       const ActionSet& actions) {
  require(!actions.empty(), "greedy_action: empty action set");
  return actions[argmax_position(action_values(theta, encode, state, actions), actions)];
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_position(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline std::size_t sample_position(const DiscreteDistribution& dist, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    cumulative += dist[k];
    if (u < cumulative) return k;
  }
  // Rounding left u above the final cumulative sum: take the last action with mass.
  for (std::size_t k = dist.size(); k-- > 0;)
    if (dist[k] > 0) return k;
  return dist.size() - 1;
}

inline double epsilon_greedy_probability(bool is_greedy, double epsilon, std::size_t n) {
  return (is_greedy ? 1.0 - epsilon : 0.0) + epsilon / static_cast<double>(n);
}

/// Samples greedily with probability 1 - epsilon, uniformly otherwise, and
/// reports the exact probability of the returned action.
template <typename Encoder, typename State>
SampledAction epsilon_greedy_sample(const Weights& theta, const Encoder& encode, const State& state,
                                    const ActionSet& actions, double epsilon, Rng& rng) {
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon_greedy_sample: epsilon must lie in [0, 1]");
  const ActionId greedy = greedy_action(theta, encode, state, actions);
  const ActionId chosen = uniform01(rng) < epsilon ? actions[uniform_position(rng, actions.size())] : greedy;
  return {chosen, epsilon_greedy_probability(chosen == greedy, epsilon, actions.size())};
}

/// Max-subtracted softmax.
inline DiscreteDistribution softmax(const std::vector<double>& preferences) {
  require(!preferences.empty(), "softmax: no preferences");
  const double top = *std::max_element(preferences.begin(), preferences.end());
  DiscreteDistribution dist{std::vector<double>(preferences.size())};
  double total = 0.0;
  for (std::size_t k = 0; k < preferences.size(); ++k) {
    dist.probabilities[k] = std::exp(preferences[k] - top);
    total += dist.probabilities[k];
  }
  for (double& p : dist.probabilities) p /= total;
  return dist;
}

template <typename Encoder, typename State>
DiscreteDistribution gibbs_distribution(const Weights& u, const Encoder& encode, const State& state,
                                        const ActionSet& actions) {
  require(!actions.empty(), "gibbs_distribution: empty action set");
  return softmax(action_values(u, encode, state, actions));
}

/// Marginal behavior distribution of the perturbed Gibbs policy: with
/// probability `perturb_prob` one uniformly chosen action gets `beta` added to
/// its preference before the softmax.
inline DiscreteDistribution perturbed_gibbs_distribution(const std::vector<double>& preferences,
                                                         double perturb_prob, double beta) {
  require(perturb_prob >= 0.0 && perturb_prob <= 1.0, "perturbed_gibbs: perturb_prob must lie in [0, 1]");
  DiscreteDistribution mix = softmax(preferences);
  if (perturb_prob == 0.0 || beta == 0.0) return mix;
  const std::size_t n = preferences.size();
  for (double& p : mix.probabilities) p *= 1.0 - perturb_prob;
  std::vector<double> shifted = preferences;
  for (std::size_t j = 0; j < n; ++j) {
    shifted[j] += beta;
    const DiscreteDistribution branch = softmax(shifted);
    for (std::size_t k = 0; k < n; ++k)
      mix.probabilities[k] += perturb_prob / static_cast<double>(n) * branch[k];
    shifted[j] = preferences[j];
  }
  return mix;
}

template <typename Encoder, typename State>
SampledAction perturbed_gibbs_sample(const Weights& u, const Encoder& encode, const State& state,
                                     const ActionSet& actions, double perturb_prob, double beta, Rng& rng) {
  require(perturb_prob >= 0.0 && perturb_prob <= 1.0, "perturbed_gibbs: perturb_prob must lie in [0, 1]");
  const std::vector<double> prefs = action_values(u, encode, state, actions);
  std::vector<double> branch_prefs = prefs;
  if (uniform01(rng) < perturb_prob) branch_prefs[uniform_position(rng, actions.size())] += beta;
  const std::size_t k = sample_position(softmax(branch_prefs), rng);
  return {actions[k], perturbed_gibbs_distribution(prefs, perturb_prob, beta)[k]};
}

inline double importance_ratio_greedy(ActionId chosen, ActionId greedy, double behavior_prob) {
  require(behavior_prob > 0.0 && behavior_prob <= 1.0,
          "importance_ratio_greedy: behavior probability must lie in (0, 1]");
  return chosen == greedy ? 1.0 / behavior_prob : 0.0;
}

inline double importance_ratio(double target_prob, double behavior_prob) {
  require(behavior_prob > 0.0, "importance_ratio: behavior probability must be positive");
  require(target_prob >= 0.0 && target_prob <= 1.0, "importance_ratio: target probability must lie in [0, 1]");
  return target_prob / behavior_prob;
}

}  // namespace gvf
