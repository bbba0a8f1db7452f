#pragma once

// Experiment harness: configuration, training runs with per-teammate
// learners, offline replay of experience logs, frozen-weight evaluation and
// the benchmark suites.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gvf/learners.hpp"
#include "gvf/soccer.hpp"
#include "gvf/tile_coding.hpp"

namespace gvf::harness {

/// Who picks the home field players' roles.
enum class HomePolicy { kLearned, kRandom, kHandCoded };

struct GreedyGqConfig {
  double gamma = 0.8;
  double lambda = 0.8;
  double epsilon = 0.05;
  double alpha_theta = 0.01;  // divided by the active feature count
  double alpha_w_ratio = 0.001;  // alpha_w = ratio * alpha_theta
};

struct OffPacConfig {
  double gamma = 0.9;
  double lambda_critic = 0.3;
  double lambda_actor = 0.3;
  double perturb_prob = 0.01;
  double beta = 0.5;
  double alpha_v = 0.01;  // divided by the active feature count
  double alpha_w_ratio = 0.0001;  // alpha_w = ratio * alpha_v
  double alpha_u = 0.001;  // divided by the active feature count
};

struct TileConfig {
  std::size_t memory_size = 1'000'001;
  std::size_t num_tilings = 16;
  double tile_width = 1.0 / 16.0;
  std::uint64_t hash_seed = 0x5eed;
};

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::kGreedyGq;
  std::size_t team_size = 3;
  std::vector<std::string> opponents = {"hand_coded"};  // played round robin
  std::size_t games = 200;
  std::size_t bin_size = 20;
  std::size_t decisions_per_game = 300;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  bool shared_weights = false;
  HomePolicy home = HomePolicy::kLearned;

  // State variables: teammates n_start..n_end, m_max opponents; zero means team size.
  std::size_t n_start = 2;
  std::size_t n_end = 0;
  std::size_t m_max = 0;

  GreedyGqConfig greedy_gq;
  OffPacConfig offpac;
  TileConfig tiles;
  TraceSettings trace;
  soccer::SoccerParams soccer;

  std::filesystem::path out = "run";
  bool write_experience_log = true;
  bool write_event_log = false;

  std::size_t resolved_n_end() const { return n_end ? n_end : team_size; }
  std::size_t resolved_m_max() const { return m_max ? m_max : team_size; }
  /// Throws ContractViolation when a value is out of range.
  void validate() const;
};

/// Parses "key = value" lines grouped in [sections]; lines starting with '#'
/// or ';' are comments. Unknown sections or keys, and malformed values, raise ParseError.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The full schema with every default filled in, in parse_config's format.
std::string default_config_text();

std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);
HomePolicy parse_home_policy(std::string_view name);

/// Independent per-trial seed derived from the master seed.
std::uint64_t trial_seed(std::uint64_t master, std::size_t trial);

// ---------------------------------------------------------------------------
// Metrics

struct BinMetrics {
  std::size_t first_game = 0;
  std::size_t games = 0;
  double mean_goal_diff = 0.0;
  double win_frac = 0.0;
  double draw_frac = 0.0;
  double loss_frac = 0.0;
  std::size_t goals_for = 0;
  std::size_t goals_against = 0;
  std::size_t updates = 0;
  double mean_abs_delta = 0.0;
  double max_abs_delta = 0.0;
  double mean_trace_entries = 0.0;
};

struct RunMetrics {
  std::vector<int> goal_diffs;  // per game
  std::vector<BinMetrics> bins;
  std::map<std::uint32_t, double> weight_norms;  // per learner id, main weights
  std::uint64_t updates = 0;
  bool aborted = false;

  double mean_bin_goal_diff() const;
};

/// Bins partition the games at multiples of bin_size; the last bin may be short.
std::vector<BinMetrics> bin_games(const std::vector<int>& goal_diffs, std::size_t bin_size);

/// Header row plus one row per bin, preceded by a '#' metadata line that
/// carries the only timestamp in the file.
void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& metrics, const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Learners

/// Tile coder and answer functions for the soccer state variables.
class SoccerFeatures {
 public:
  explicit SoccerFeatures(const ExperimentConfig& config);

  const TileCoder& coder() const { return coder_; }
  const AnswerFunctions<StateVector>& answer() const { return answer_; }
  const QuestionFunctions<StateVector>& question() const { return question_; }
  std::size_t state_variable_count() const { return coder_.num_variables(); }

 private:
  TileCoder coder_;
  QuestionFunctions<StateVector> question_;
  AnswerFunctions<StateVector> answer_;
};

/// One learner per home field player, or one shared learner whose traces are
/// still kept per player.
class LearnerPool {
 public:
  LearnerPool(const ExperimentConfig& config, const SoccerFeatures& features);
  /// Restores learners from checkpoints (see checkpoint_path).
  LearnerPool(const ExperimentConfig& config, const SoccerFeatures& features, const std::filesystem::path& dir);

  const std::vector<std::uint32_t>& ids() const { return ids_; }
  void begin_episode(std::uint32_t id);
  UpdateDiagnostics update(std::uint32_t id, const GvfSample<StateVector>& sample);
  /// Behavior action (exploring) or target action (frozen evaluation).
  SampledAction act(std::uint32_t id, const StateVector& s, bool explore, Rng& rng) const;

  const LearnerState& state(std::uint32_t id) const;
  double main_norm(std::uint32_t id) const;
  /// Creates `dir` when missing.
  void save(const std::filesystem::path& dir) const;

 private:
  LearnerState& slot(std::uint32_t id);
  LearnerState make_state() const;

  const ExperimentConfig& config_;
  const SoccerFeatures& features_;
  std::vector<std::uint32_t> ids_;
  std::vector<LearnerState> states_;  // one per id, or a single shared one
  std::map<std::uint32_t, std::vector<Trace>> traces_;  // per-id traces in shared mode
};

/// learner_<id>.ckpt, or learner_shared.ckpt with shared weights.
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint32_t id, bool shared);

// ---------------------------------------------------------------------------
// Runs

/// Trains config.games games (home policy learned) or plays them with a
/// random / hand-coded home team. Writes metrics.csv, checkpoints and the
/// experience log under config.out. A poisoned learner aborts the run after
/// flushing the metrics gathered so far; the exception is rethrown.
RunMetrics run_training(const ExperimentConfig& config);

/// Applies the configured learner to every logged sample in order, starting a
/// new episode whenever a learner's episode id changes, and writes the
/// checkpoints under config.out.
LearnerPool replay_offline(const std::filesystem::path& log, const ExperimentConfig& config,
                           const SoccerFeatures& features);

/// Plays config.games games with frozen weights from `checkpoints` and no
/// exploration; writes metrics.csv under config.out. With a non-learned home
/// policy the checkpoints are not read.
RunMetrics evaluate(const std::filesystem::path& checkpoints, const ExperimentConfig& config);

/// Suites: baird, gridworld, gradient, bandit; "all" runs every one. Writes
/// <suite>.csv under `out` in the (step, metric, value) format.
std::vector<std::filesystem::path> run_benchmarks(const std::vector<std::string>& suites,
                                                  const std::filesystem::path& out, std::uint64_t seed);

}  // namespace gvf::harness
