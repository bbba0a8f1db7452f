#include "gvf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "gvf/benchmarks.hpp"
#include "gvf/weight_io.hpp"
#include "text_format.hpp"

namespace gvf::harness {

// ---------------------------------------------------------------------------
// Configuration

std::string_view algorithm_name(Algorithm a) { return a == Algorithm::kGreedyGq ? "greedy_gq" : "offpac"; }

Algorithm parse_algorithm(std::string_view name) {
  if (name == "greedy_gq") return Algorithm::kGreedyGq;
  if (name == "offpac") return Algorithm::kOffPac;
  throw ContractViolation("unknown algorithm '" + std::string(name) + "' (expected greedy_gq or offpac)");
}

namespace {

std::string_view home_policy_name(HomePolicy p) {
  switch (p) {
    case HomePolicy::kLearned: return "learned";
    case HomePolicy::kRandom: return "random";
    case HomePolicy::kHandCoded: return "hand_coded";
  }
  return "learned";
}

}  // namespace

HomePolicy parse_home_policy(std::string_view name) {
  if (name == "learned") return HomePolicy::kLearned;
  if (name == "random") return HomePolicy::kRandom;
  if (name == "hand_coded") return HomePolicy::kHandCoded;
  throw ContractViolation("unknown home policy '" + std::string(name) + "' (expected learned, random or hand_coded)");
}

void ExperimentConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  require(team_size >= 3 && team_size <= 11, "config: team_size must lie in [3, 11]");
  require(bin_size >= 1 && games >= bin_size, "config: need games >= bin_size >= 1");
  require(decisions_per_game >= 1 && trials >= 1, "config: decisions_per_game and trials must be positive");
  require(!opponents.empty(), "config: at least one opponent is required");
  for (const std::string& o : opponents) soccer::make_opponent(o);
  require(n_start >= 2 && n_start <= resolved_n_end() && resolved_n_end() <= team_size,
          "config: need 2 <= n_start <= n_end <= team_size");
  require(resolved_m_max() <= team_size, "config: m_max must not exceed team_size");
  require(unit(greedy_gq.gamma) && unit(greedy_gq.lambda) && unit(greedy_gq.epsilon),
          "config: greedy_gq gamma, lambda and epsilon must lie in [0, 1]");
  require(greedy_gq.alpha_theta > 0.0 && greedy_gq.alpha_w_ratio >= 0.0, "config: greedy_gq step sizes out of range");
  require(unit(offpac.gamma) && unit(offpac.lambda_critic) && unit(offpac.lambda_actor) && unit(offpac.perturb_prob),
          "config: offpac gamma, lambdas and perturb_prob must lie in [0, 1]");
  require(offpac.beta >= 0.0 && offpac.alpha_v > 0.0 && offpac.alpha_w_ratio >= 0.0 && offpac.alpha_u >= 0.0,
          "config: offpac step sizes out of range");
  require(tiles.memory_size >= 2 && tiles.num_tilings >= 1, "config: tile coder sizes out of range");
  require(tiles.tile_width > 0.0 && tiles.tile_width <= 1.0, "config: tile_width must lie in (0, 1]");
  require(trace.capacity >= 1 && trace.prune_threshold >= 0.0, "config: trace settings out of range");
  soccer.validate();
}

namespace {

struct Binding {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

double to_real(const std::string& v) {
  const double x = text::parse_real(v, 0);
  if (!std::isfinite(x)) throw ParseError("value must be finite", 0);
  return x;
}

std::size_t to_size(const std::string& v) { return text::parse_uint<std::size_t>(v, 0); }

bool to_bool(const std::string& v) {
  const std::string_view s = text::trim(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ParseError("invalid boolean '" + std::string(s) + "'", 0);
}

std::string show(double v) { return fmt::format("{}", v); }
std::string show(std::size_t v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }

#define GVF_REAL(section, name, expr) \
  Binding{section, name, [](const ExperimentConfig& c) { return show(c.expr); }, \
          [](ExperimentConfig& c, const std::string& v) { c.expr = to_real(v); }}
#define GVF_SIZE(section, name, expr) \
  Binding{section, name, [](const ExperimentConfig& c) { return show(static_cast<std::size_t>(c.expr)); }, \
          [](ExperimentConfig& c, const std::string& v) { c.expr = static_cast<decltype(c.expr)>(to_size(v)); }}
#define GVF_BOOL(section, name, expr) \
  Binding{section, name, [](const ExperimentConfig& c) { return show(c.expr); }, \
          [](ExperimentConfig& c, const std::string& v) { c.expr = to_bool(v); }}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      Binding{"experiment", "algorithm", [](const ExperimentConfig& c) { return std::string(algorithm_name(c.algorithm)); },
              [](ExperimentConfig& c, const std::string& v) { c.algorithm = parse_algorithm(text::trim(v)); }},
      GVF_SIZE("experiment", "team_size", team_size),
      Binding{"experiment", "opponents",
              [](const ExperimentConfig& c) {
                std::string s;
                for (const auto& o : c.opponents) s += (s.empty() ? "" : ",") + o;
                return s;
              },
              [](ExperimentConfig& c, const std::string& v) {
                c.opponents.clear();
                for (std::string_view f : text::split(v, ','))
                  if (!text::trim(f).empty()) c.opponents.emplace_back(text::trim(f));
              }},
      GVF_SIZE("experiment", "games", games),
      GVF_SIZE("experiment", "bin_size", bin_size),
      GVF_SIZE("experiment", "decisions_per_game", decisions_per_game),
      GVF_SIZE("experiment", "trials", trials),
      Binding{"experiment", "seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
              [](ExperimentConfig& c, const std::string& v) { c.seed = text::parse_uint<std::uint64_t>(v, 0); }},
      GVF_BOOL("experiment", "shared_weights", shared_weights),
      Binding{"experiment", "home", [](const ExperimentConfig& c) { return std::string(home_policy_name(c.home)); },
              [](ExperimentConfig& c, const std::string& v) { c.home = parse_home_policy(text::trim(v)); }},
      GVF_SIZE("experiment", "n_start", n_start),
      GVF_SIZE("experiment", "n_end", n_end),
      GVF_SIZE("experiment", "m_max", m_max),

      GVF_REAL("greedy_gq", "gamma", greedy_gq.gamma),
      GVF_REAL("greedy_gq", "lambda", greedy_gq.lambda),
      GVF_REAL("greedy_gq", "epsilon", greedy_gq.epsilon),
      GVF_REAL("greedy_gq", "alpha_theta", greedy_gq.alpha_theta),
      GVF_REAL("greedy_gq", "alpha_w_ratio", greedy_gq.alpha_w_ratio),

      GVF_REAL("offpac", "gamma", offpac.gamma),
      GVF_REAL("offpac", "lambda_critic", offpac.lambda_critic),
      GVF_REAL("offpac", "lambda_actor", offpac.lambda_actor),
      GVF_REAL("offpac", "perturb_prob", offpac.perturb_prob),
      GVF_REAL("offpac", "beta", offpac.beta),
      GVF_REAL("offpac", "alpha_v", offpac.alpha_v),
      GVF_REAL("offpac", "alpha_w_ratio", offpac.alpha_w_ratio),
      GVF_REAL("offpac", "alpha_u", offpac.alpha_u),

      GVF_SIZE("tile_coding", "memory_size", tiles.memory_size),
      GVF_SIZE("tile_coding", "num_tilings", tiles.num_tilings),
      GVF_REAL("tile_coding", "tile_width", tiles.tile_width),
      Binding{"tile_coding", "hash_seed", [](const ExperimentConfig& c) { return std::to_string(c.tiles.hash_seed); },
              [](ExperimentConfig& c, const std::string& v) {
                c.tiles.hash_seed = text::parse_uint<std::uint64_t>(v, 0);
              }},

      GVF_SIZE("trace", "capacity", trace.capacity),
      GVF_REAL("trace", "prune_threshold", trace.prune_threshold),

      GVF_REAL("soccer", "field_length", soccer.field.length),
      GVF_REAL("soccer", "field_width", soccer.field.width),
      GVF_REAL("soccer", "goal_width", soccer.field.goal_width),
      GVF_REAL("soccer", "tick_seconds", soccer.tick_seconds),
      GVF_SIZE("soccer", "ticks_per_decision", soccer.ticks_per_decision),
      GVF_REAL("soccer", "v_max", soccer.v_max),
      GVF_REAL("soccer", "control_radius", soccer.control_radius),
      GVF_REAL("soccer", "p_dribble", soccer.p_dribble),
      GVF_REAL("soccer", "dribble_speed", soccer.dribble_speed),
      GVF_REAL("soccer", "scatter_radius", soccer.scatter_radius),
      GVF_REAL("soccer", "goalie_reach", soccer.goalie_reach),
      GVF_REAL("soccer", "margin", soccer.margin),
      GVF_REAL("soccer", "w_angle", soccer.w_angle),
      GVF_REAL("soccer", "w_crowd", soccer.w_crowd),
      GVF_REAL("soccer", "near_radius", soccer.near_radius),
      GVF_REAL("soccer", "step_penalty", soccer.step_penalty),
      GVF_REAL("soccer", "crowd_penalty", soccer.crowd_penalty),
      GVF_REAL("soccer", "crowd_radius", soccer.crowd_radius),
      GVF_REAL("soccer", "goal_reward", soccer.goal_reward),
      GVF_REAL("soccer", "wing_fraction", soccer.wing_fraction),
      GVF_REAL("soccer", "wing_offset", soccer.wing_offset),
      GVF_REAL("soccer", "back_fraction", soccer.back_fraction),
      GVF_REAL("soccer", "back_offset", soccer.back_offset),
      GVF_REAL("soccer", "offset_gain", soccer.offset_gain),
      GVF_REAL("soccer", "stopper_offset", soccer.stopper_offset),
      GVF_REAL("soccer", "goalie_depth", soccer.goalie_depth),
      GVF_REAL("soccer", "kickoff_jitter", soccer.kickoff_jitter),

      Binding{"output", "out", [](const ExperimentConfig& c) { return c.out.string(); },
              [](ExperimentConfig& c, const std::string& v) { c.out = std::string(text::trim(v)); }},
      GVF_BOOL("output", "experience_log", write_experience_log),
      GVF_BOOL("output", "event_log", write_event_log),
  };
  return table;
}

#undef GVF_REAL
#undef GVF_SIZE
#undef GVF_BOOL

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  ExperimentConfig config;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty())
      throw ParseError("key '" + section + "' must belong to a [section]", 0);
    for (const auto& [key, value] : keys) {
      const auto& table = bindings();
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Binding& b) { return section == b.section && key == b.key; });
      if (it == table.end()) throw ParseError("unknown config key '" + section + "." + key + "'", 0);
      try {
        it->set(config, value.data());
      } catch (const ParseError& e) {
        throw ParseError(section + "." + key + ": " + e.what(), 0);
      } catch (const ContractViolation& e) {
        throw ParseError(section + "." + key + ": " + e.what(), 0);
      }
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

std::string default_config_text() {
  const ExperimentConfig defaults;
  std::ostringstream out;
  out << "# Experiment configuration. Every key is optional; shown values are the defaults.\n";
  std::string section;
  for (const Binding& b : bindings()) {
    if (section != b.section) {
      section = b.section;
      out << "\n[" << section << "]\n";
    }
    out << b.key << " = " << b.get(defaults) << '\n';
  }
  return out.str();
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) {
  return mix64(master + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(trial) + 1));
}

// ---------------------------------------------------------------------------
// Metrics

double RunMetrics::mean_bin_goal_diff() const {
  if (bins.empty()) return 0.0;
  double s = 0.0;
  for (const BinMetrics& b : bins) s += b.mean_goal_diff;
  return s / static_cast<double>(bins.size());
}

std::vector<BinMetrics> bin_games(const std::vector<int>& goal_diffs, std::size_t bin_size) {
  require(bin_size >= 1, "bin_games: bin size must be positive");
  std::vector<BinMetrics> bins;
  for (std::size_t first = 0; first < goal_diffs.size(); first += bin_size) {
    BinMetrics b;
    b.first_game = first;
    b.games = std::min(bin_size, goal_diffs.size() - first);
    std::size_t wins = 0, draws = 0, losses = 0;
    double total = 0.0;
    for (std::size_t g = first; g < first + b.games; ++g) {
      total += goal_diffs[g];
      wins += goal_diffs[g] > 0;
      draws += goal_diffs[g] == 0;
      losses += goal_diffs[g] < 0;
    }
    const auto n = static_cast<double>(b.games);
    b.mean_goal_diff = total / n;
    b.win_frac = static_cast<double>(wins) / n;
    b.draw_frac = static_cast<double>(draws) / n;
    b.loss_frac = static_cast<double>(losses) / n;
    bins.push_back(b);
  }
  return bins;
}

void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& metrics, const ExperimentConfig& config) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  out << fmt::format("# generated={:%Y-%m-%dT%H:%M:%SZ} algorithm={} home={} team_size={} games={} seed={}{}\n", now,
                     algorithm_name(config.algorithm), home_policy_name(config.home), config.team_size,
                     metrics.goal_diffs.size(), config.seed, metrics.aborted ? " aborted=true" : "");
  out << "bin,first_game,games,mean_goal_diff,win_frac,draw_frac,loss_frac,goals_for,goals_against,updates,"
         "mean_abs_delta,max_abs_delta,mean_trace_entries\n";
  for (std::size_t i = 0; i < metrics.bins.size(); ++i) {
    const BinMetrics& b = metrics.bins[i];
    out << i << ',' << b.first_game << ',' << b.games << ',' << text::real(b.mean_goal_diff) << ','
        << text::real(b.win_frac) << ',' << text::real(b.draw_frac) << ',' << text::real(b.loss_frac) << ','
        << b.goals_for << ',' << b.goals_against << ',' << b.updates << ',' << text::real(b.mean_abs_delta) << ','
        << text::real(b.max_abs_delta) << ',' << text::real(b.mean_trace_entries) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Learners

namespace {

TileCoderConfig tile_config(const ExperimentConfig& config) {
  TileCoderConfig t;
  t.memory_size = config.tiles.memory_size;
  t.num_tilings = config.tiles.num_tilings;
  t.variable_ranges = soccer::state_variable_ranges(config.soccer.field, config.n_start, config.resolved_n_end(),
                                                    config.resolved_m_max());
  t.tile_widths.assign(t.variable_ranges.size(), config.tiles.tile_width);
  t.num_actions = soccer::kNumActions;
  t.hash_seed = config.tiles.hash_seed;
  return t;
}

}  // namespace

SoccerFeatures::SoccerFeatures(const ExperimentConfig& config) : coder_(tile_config(config)) {
  const bool gq = config.algorithm == Algorithm::kGreedyGq;
  question_.gamma = constant<StateVector>(gq ? config.greedy_gq.gamma : config.offpac.gamma);
  question_.target = gq ? TargetPolicy::kGreedy : TargetPolicy::kGibbs;
  if (gq)
    answer_.behavior = EpsilonGreedyBehavior{config.greedy_gq.epsilon};
  else
    answer_.behavior = PerturbedGibbsBehavior{config.offpac.perturb_prob, config.offpac.beta};
  const TileCoder* coder = &coder_;
  answer_.features = [coder](const StateVector& s, ActionId a) { return coder->encode_state_action(s, a); };
  answer_.state_features = [coder](const StateVector& s) { return coder->encode_state(s); };
  answer_.lambda = constant<StateVector>(gq ? config.greedy_gq.lambda : config.offpac.lambda_critic);
  answer_.lambda_actor = constant<StateVector>(gq ? 0.0 : config.offpac.lambda_actor);
  answer_.actions = ActionSet::range(soccer::kNumActions);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint32_t id, bool shared) {
  return dir / (shared ? std::string("learner_shared.ckpt") : "learner_" + std::to_string(id) + ".ckpt");
}

LearnerState LearnerPool::make_state() const {
  const auto active = static_cast<double>(features_.coder().active_count());
  const std::size_t dim = features_.coder().memory_size();
  if (config_.algorithm == Algorithm::kGreedyGq) {
    const double a = config_.greedy_gq.alpha_theta / active;
    return GreedyGqState::zeros(dim, a, config_.greedy_gq.alpha_w_ratio * a, config_.trace);
  }
  const double av = config_.offpac.alpha_v / active;
  return OffPacState::zeros(dim, dim, av, config_.offpac.alpha_w_ratio * av, config_.offpac.alpha_u / active,
                            config_.trace);
}

LearnerPool::LearnerPool(const ExperimentConfig& config, const SoccerFeatures& features)
    : config_(config), features_(features) {
  for (std::uint32_t id = 1; id <= config.team_size; ++id)
    if (id != soccer::kGoalieId) ids_.push_back(id);
  states_.push_back(make_state());
  if (config.shared_weights) {
    for (std::uint32_t id : ids_) {
      const LearnerState& s = states_.front();
      if (const auto* gq = std::get_if<GreedyGqState>(&s))
        traces_[id] = {gq->e};
      else
        traces_[id] = {std::get<OffPacState>(s).e_v, std::get<OffPacState>(s).e_u};
    }
  } else {
    for (std::size_t k = 1; k < ids_.size(); ++k) states_.push_back(states_.front());
  }
}

LearnerPool::LearnerPool(const ExperimentConfig& config, const SoccerFeatures& features,
                         const std::filesystem::path& dir)
    : LearnerPool(config, features) {
  for (std::size_t k = 0; k < states_.size(); ++k) {
    const std::filesystem::path path = checkpoint_path(dir, ids_[k], config.shared_weights);
    LearnerState loaded = load_checkpoint(path);
    if (loaded.index() != states_[k].index())
      throw IoError(path.string() + ": checkpoint algorithm does not match the configuration");
    const std::size_t dim = std::visit(
        [](const auto& s) {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, GreedyGqState>)
            return static_cast<std::size_t>(s.theta.size());
          else
            return static_cast<std::size_t>(s.v.size());
        },
        loaded);
    if (dim != features.coder().memory_size())
      throw IoError(path.string() + ": checkpoint dimension does not match tile_coding.memory_size");
    states_[k] = std::move(loaded);
  }
}

LearnerState& LearnerPool::slot(std::uint32_t id) {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  require(it != ids_.end(), "LearnerPool: unknown learner id");
  return config_.shared_weights ? states_.front() : states_[static_cast<std::size_t>(it - ids_.begin())];
}

const LearnerState& LearnerPool::state(std::uint32_t id) const { return const_cast<LearnerPool*>(this)->slot(id); }

void LearnerPool::begin_episode(std::uint32_t id) {
  LearnerState& s = slot(id);
  if (config_.shared_weights) {
    for (Trace& t : traces_.at(id)) t.clear();
    return;
  }
  if (auto* gq = std::get_if<GreedyGqState>(&s))
    greedy_gq_episode_init(*gq);
  else
    offpac_episode_init(std::get<OffPacState>(s));
}

UpdateDiagnostics LearnerPool::update(std::uint32_t id, const GvfSample<StateVector>& sample) {
  LearnerState& s = slot(id);
  const auto& q = features_.question();
  const auto& a = features_.answer();
  if (auto* gq = std::get_if<GreedyGqState>(&s)) {
    if (!config_.shared_weights) return greedy_gq_update(*gq, sample, q, a);
    std::vector<Trace>& mine = traces_.at(id);
    std::swap(gq->e, mine[0]);
    const UpdateDiagnostics d = greedy_gq_update(*gq, sample, q, a);
    std::swap(gq->e, mine[0]);
    return d;
  }
  auto& op = std::get<OffPacState>(s);
  if (!config_.shared_weights) return offpac_update(op, sample, q, a);
  std::vector<Trace>& mine = traces_.at(id);
  std::swap(op.e_v, mine[0]);
  std::swap(op.e_u, mine[1]);
  const UpdateDiagnostics d = offpac_update(op, sample, q, a);
  std::swap(op.e_v, mine[0]);
  std::swap(op.e_u, mine[1]);
  return d;
}

SampledAction LearnerPool::act(std::uint32_t id, const StateVector& s, bool explore, Rng& rng) const {
  const LearnerState& st = state(id);
  const auto& answer = features_.answer();
  const Weights& prefs =
      std::holds_alternative<GreedyGqState>(st) ? std::get<GreedyGqState>(st).theta : std::get<OffPacState>(st).u;
  if (explore) return behavior_sample(prefs, answer, s, rng);
  return target_sample(prefs, features_.question().target, answer, s, rng);
}

double LearnerPool::main_norm(std::uint32_t id) const {
  const LearnerState& st = state(id);
  return std::holds_alternative<GreedyGqState>(st) ? std::get<GreedyGqState>(st).theta.norm()
                                                   : std::get<OffPacState>(st).v.norm();
}

void LearnerPool::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string());
  for (std::size_t k = 0; k < states_.size(); ++k)
    save_checkpoint(checkpoint_path(dir, ids_[k], config_.shared_weights), states_[k]);
}

// ---------------------------------------------------------------------------
// Games

namespace {

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

struct Track {
  bool active = false;
  std::uint64_t episode = 0;
  std::uint64_t step = 0;
  StateVector state;
  ActionId action = 0;
  double behavior_prob = 1.0;
  bool acted = false;
};

struct DeltaStats {
  std::size_t updates = 0;
  double sum_abs = 0.0;
  double max_abs = 0.0;
  double sum_trace = 0.0;
};

struct Session {
  const ExperimentConfig& config;
  LearnerPool* pool = nullptr;  // null unless the home policy is learned
  bool learn = false;
  bool explore = false;
  ExperienceLogWriter* experience = nullptr;
  soccer::EventLogWriter* events = nullptr;
};

/// Plays every configured game, appending to `metrics`.
void play_games(const Session& session, Rng& rng, RunMetrics& metrics) {
  const ExperimentConfig& config = session.config;
  std::vector<std::unique_ptr<soccer::OpponentPolicy>> opponents;
  for (const std::string& name : config.opponents) opponents.push_back(soccer::make_opponent(name));
  const double gamma =
      config.algorithm == Algorithm::kGreedyGq ? config.greedy_gq.gamma : config.offpac.gamma;
  const std::size_t n_end = config.resolved_n_end();
  const std::size_t m_max = config.resolved_m_max();

  std::map<std::uint32_t, Track> tracks;
  if (session.pool)
    for (std::uint32_t id : session.pool->ids()) tracks[id];

  std::vector<DeltaStats> per_game;
  std::vector<std::pair<std::size_t, std::size_t>> scores;
  for (std::size_t game = 0; game < config.games; ++game) {
    const soccer::OpponentPolicy& opponent = *opponents[game % opponents.size()];
    soccer::WorldState world = soccer::kickoff(config.soccer, config.team_size, rng);
    if (session.events) session.events->write({world.tick, soccer::EventType::kKickoff, "game:" + std::to_string(game)});
    DeltaStats stats;
    std::optional<std::uint32_t> carried;
    for (auto& [id, t] : tracks) t.active = false;

    for (std::size_t d = 0; d < config.decisions_per_game; ++d) {
      soccer::RoleAssignment home;
      if (config.home == HomePolicy::kRandom) {
        home = soccer::random_assignment(world, config.soccer, rng);
      } else if (config.home == HomePolicy::kHandCoded) {
        home = soccer::hand_coded_assignment(world, config.soccer);
      } else {
        const std::uint32_t striker = carried ? *carried : soccer::assign_striker(world, config.soccer);
        home[soccer::kGoalieId] = soccer::goalie_role(world, config.soccer);
        home[striker] = soccer::Role::SK;
        for (auto& [id, t] : tracks) {
          t.acted = false;
          if (id == striker) continue;
          t.state = soccer::state_variables(world, id, config.n_start, n_end, m_max);
          if (!t.active) {
            if (session.learn) session.pool->begin_episode(id);
            t.active = true;
            ++t.episode;
            t.step = 0;
          }
          const SampledAction act = session.pool->act(id, t.state, session.explore, rng);
          t.action = act.action;
          t.behavior_prob = act.probability;
          t.acted = true;
          home[id] = soccer::role_for_action(act.action);
        }
      }

      soccer::DecisionResult result = soccer::decision_step(world, home, opponent, config.soccer, gamma, rng);
      if (session.events)
        for (const auto& e : result.events) session.events->write(e);

      for (const soccer::AgentOutcome& out : result.outcomes) {
        const auto it = tracks.find(out.id);
        if (it == tracks.end() || !it->second.acted) continue;
        Track& t = it->second;
        ExperienceRecord rec;
        rec.episode = t.episode;
        rec.step = t.step++;
        rec.learner = out.id;
        rec.sample.state_t = t.state;
        rec.sample.action_t = t.action;
        rec.sample.transient_reward = out.transient_reward;
        rec.sample.terminal_reward = out.terminal_reward;
        rec.sample.gamma_next = out.gamma_next;
        rec.sample.state_next = soccer::state_variables(result.end, out.id, config.n_start, n_end, m_max);
        rec.sample.behavior_prob = t.behavior_prob;
        if (session.experience) session.experience->write(rec);
        if (session.learn) {
          const UpdateDiagnostics diag = session.pool->update(out.id, rec.sample);
          ++stats.updates;
          stats.sum_abs += std::abs(diag.delta);
          stats.max_abs = std::max(stats.max_abs, std::abs(diag.delta));
          stats.sum_trace += static_cast<double>(diag.trace_entries);
          ++metrics.updates;
        }
        if (out.gamma_next == 0.0) t.active = false;
      }

      world = result.next;
      carried.reset();
      if (!result.goal)
        for (const auto& [id, role] : result.home)
          if (role == soccer::Role::SK) carried = id;
    }
    metrics.goal_diffs.push_back(world.home_score - world.away_score);
    scores.emplace_back(world.home_score, world.away_score);
    per_game.push_back(stats);
  }

  metrics.bins = bin_games(metrics.goal_diffs, config.bin_size);
  for (BinMetrics& b : metrics.bins) {
    DeltaStats agg;
    for (std::size_t g = b.first_game; g < b.first_game + b.games; ++g) {
      b.goals_for += scores[g].first;
      b.goals_against += scores[g].second;
      agg.updates += per_game[g].updates;
      agg.sum_abs += per_game[g].sum_abs;
      agg.max_abs = std::max(agg.max_abs, per_game[g].max_abs);
      agg.sum_trace += per_game[g].sum_trace;
    }
    b.updates = agg.updates;
    if (agg.updates) {
      b.mean_abs_delta = agg.sum_abs / static_cast<double>(agg.updates);
      b.mean_trace_entries = agg.sum_trace / static_cast<double>(agg.updates);
    }
    b.max_abs_delta = agg.max_abs;
  }
}

void finish_partial(RunMetrics& metrics, const ExperimentConfig& config) {
  metrics.bins = bin_games(metrics.goal_diffs, config.bin_size);
}

}  // namespace

RunMetrics run_training(const ExperimentConfig& config) {
  config.validate();
  ensure_dir(config.out);
  const SoccerFeatures features(config);
  std::optional<LearnerPool> pool;
  if (config.home == HomePolicy::kLearned) pool.emplace(config, features);

  std::optional<ExperienceLogWriter> experience;
  if (config.write_experience_log && pool) experience.emplace(config.out / "experience.log");
  std::optional<soccer::EventLogWriter> events;
  if (config.write_event_log) events.emplace(config.out / "events.log");

  Session session{config, pool ? &*pool : nullptr, pool.has_value(), true, experience ? &*experience : nullptr,
                  events ? &*events : nullptr};
  Rng rng(config.seed);
  RunMetrics metrics;
  try {
    play_games(session, rng, metrics);
  } catch (const LearnerPoisoned&) {
    metrics.aborted = true;
    finish_partial(metrics, config);
    if (experience) experience->flush();
    write_metrics_csv(config.out / "metrics.csv", metrics, config);
    throw;
  }
  if (experience) experience->flush();
  if (events) events->flush();
  if (pool) {
    for (std::uint32_t id : pool->ids()) metrics.weight_norms[id] = pool->main_norm(id);
    pool->save(config.out);
  }
  write_metrics_csv(config.out / "metrics.csv", metrics, config);
  return metrics;
}

LearnerPool replay_offline(const std::filesystem::path& log, const ExperimentConfig& config,
                           const SoccerFeatures& features) {
  config.validate();
  const std::vector<ExperienceRecord> records = read_experience_log(log);
  LearnerPool pool(config, features);
  std::map<std::uint32_t, std::uint64_t> episode;
  for (const ExperienceRecord& r : records) {
    const auto& ids = pool.ids();
    if (std::find(ids.begin(), ids.end(), r.learner) == ids.end())
      throw ParseError("experience log names learner " + std::to_string(r.learner) +
                           " which the configured team does not have", 0);
    if (r.sample.state_t.size() != features.state_variable_count())
      throw ParseError("experience log state size does not match the configured state variables", 0);
    const auto it = episode.find(r.learner);
    if (it == episode.end() || it->second != r.episode) {
      pool.begin_episode(r.learner);
      episode[r.learner] = r.episode;
    }
    pool.update(r.learner, r.sample);
  }
  ensure_dir(config.out);
  pool.save(config.out);
  return pool;
}

RunMetrics evaluate(const std::filesystem::path& checkpoints, const ExperimentConfig& config) {
  config.validate();
  ensure_dir(config.out);
  const SoccerFeatures features(config);
  std::optional<LearnerPool> pool;
  if (config.home == HomePolicy::kLearned) pool.emplace(config, features, checkpoints);
  std::optional<soccer::EventLogWriter> events;
  if (config.write_event_log) events.emplace(config.out / "events.log");
  Session session{config, pool ? &*pool : nullptr, false, false, nullptr, events ? &*events : nullptr};
  Rng rng(config.seed);
  RunMetrics metrics;
  play_games(session, rng, metrics);
  if (pool)
    for (std::uint32_t id : pool->ids()) metrics.weight_norms[id] = pool->main_norm(id);
  write_metrics_csv(config.out / "metrics.csv", metrics, config);
  return metrics;
}

// ---------------------------------------------------------------------------
// Benchmarks

std::vector<std::filesystem::path> run_benchmarks(const std::vector<std::string>& suites,
                                                  const std::filesystem::path& out, std::uint64_t seed) {
  static const std::vector<std::string> kAll = {"baird", "gridworld", "gradient", "bandit"};
  std::vector<std::string> selected;
  for (const std::string& s : suites) {
    if (s == "all") {
      selected = kAll;
      break;
    }
    require(std::find(kAll.begin(), kAll.end(), s) != kAll.end(), "run_benchmarks: unknown suite");
    selected.push_back(s);
  }
  ensure_dir(out);
  std::vector<std::filesystem::path> written;
  for (const std::string& suite : selected) {
    std::vector<bench::MetricRow> rows;
    if (suite == "baird") {
      const bench::PredictionProblem p = bench::baird_environment();
      Eigen::VectorXd w = p.initial_weights;
      const std::vector<double> norms = bench::run_naive_td0(p, 0.01, 5000, w);
      for (std::size_t k = 0; k < norms.size(); ++k) rows.push_back({k + 1, "td0_weight_norm", norms[k]});
      const bench::CriticRun critic = bench::run_frozen_actor_critic(p, 0.005, 0.05, 0.0, 20000, 1e-4);
      for (std::size_t k = 0; k < critic.mspbe_per_sweep.size(); ++k)
        rows.push_back({k + 1, "critic_mspbe", critic.mspbe_per_sweep[k]});
    } else if (suite == "gridworld") {
      const bench::Gridworld g = bench::make_gridworld();
      for (std::size_t k = 0; k < 3; ++k) {
        const bench::GridworldRun run = bench::run_gridworld_greedy_gq(g, trial_seed(seed, k), 200000);
        rows.push_back({k, "policy_match_fraction", run.optimal_fraction});
      }
    } else if (suite == "gradient") {
      const bench::GradientCheck c = bench::gibbs_gradient_check(seed, 100);
      rows.push_back({c.draws, "max_relative_error", c.max_relative_error});
      rows.push_back({c.draws, "max_score_residual", c.max_score_residual});
    } else {
      for (std::size_t k = 0; k < 3; ++k) {
        const bench::BanditRun run = bench::run_offpac_bandit(trial_seed(seed, k), 50000);
        for (std::size_t t = 999; t < run.optimal_prob.size(); t += 1000)
          rows.push_back({t + 1, "pi_optimal_trial" + std::to_string(k), run.optimal_prob[t]});
      }
    }
    const std::filesystem::path path = out / (suite + ".csv");
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    bench::write_metric_csv(f, rows);
    if (!f) throw IoError("failed writing " + path.string());
    written.push_back(path);
  }
  return written;
}

}  // namespace gvf::harness
