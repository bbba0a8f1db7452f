#pragma once

// Point-mass 2D soccer used to learn role assignment. The home team attacks
// towards +x. Agent id 1 of each team is the goalie. Each tick every agent
// walks towards the target of its role; the ball is controlled by the nearest
// agent within the control radius, who either dribbles it towards the goal
// it attacks or loses it to a random scatter.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gvf/policies.hpp"
#include "gvf/tile_coding.hpp"

namespace gvf::soccer {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double norm(Vec2 v);
double distance(Vec2 a, Vec2 b);

/// Heading in (-pi, pi].
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct Agent {
  std::uint32_t id = 0;
  Pose2D pose;

  friend bool operator==(const Agent&, const Agent&) = default;
};

inline constexpr std::uint32_t kGoalieId = 1;

struct Field {
  double length = 30.0;
  double width = 20.0;
  double goal_width = 2.1;

  friend bool operator==(const Field&, const Field&) = default;
};

enum class Team { kHome, kAway };

struct WorldState {
  Vec2 ball;
  std::vector<Agent> teammates;
  std::vector<Agent> opponents;
  Field field;
  std::uint64_t tick = 0;
  int home_score = 0;
  int away_score = 0;

  Vec2 home_goal() const { return {-field.length / 2.0, 0.0}; }
  Vec2 opponent_goal() const { return {field.length / 2.0, 0.0}; }
  const Agent& teammate(std::uint32_t id) const;
  Agent& teammate(std::uint32_t id);

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// The same world seen by the away team: rotated by pi about the centre with
/// the two teams swapped and the score reversed.
WorldState mirrored(const WorldState& world);

enum class Role : std::uint8_t { SK, FL, FR, EX1L, EX1R, ST, EX1M, WL, WR, WM, BL, BR, BM, GK, GKSK };

/// The twelve roles a non-striker field player chooses from, in action-id order.
inline constexpr std::array<Role, 12> kReactiveRoles = {Role::FL,   Role::FR, Role::EX1L, Role::EX1R,
                                                        Role::ST,   Role::EX1M, Role::WL, Role::WR,
                                                        Role::WM,   Role::BL, Role::BR,   Role::BM};
inline constexpr std::size_t kNumActions = kReactiveRoles.size();

Role role_for_action(ActionId action);
ActionId action_for_role(Role role);
std::string_view role_name(Role role);

using RoleAssignment = std::map<std::uint32_t, Role>;

struct SoccerParams {
  Field field;
  double tick_seconds = 0.25;
  int ticks_per_decision = 8;
  double v_max = 0.7;            // m/s, every agent
  double control_radius = 0.5;   // m
  double p_dribble = 0.6;        // per tick
  double dribble_speed = 2.0;    // m/s the ball moves while dribbled
  double scatter_radius = 1.5;   // m, uniform disk on a lost ball
  double goalie_reach = 2.0;     // m, GK becomes GKSK inside it
  double margin = 0.5;           // targets stay this far inside the lines
  double w_angle = 0.5;          // m/rad
  double w_crowd = 0.3;          // m per agent near the ball
  double near_radius = 1.5;      // m
  double step_penalty = 0.01;
  double crowd_penalty = 5.0;
  double crowd_radius = 1.5;     // m between teammates
  double goal_reward = 100.0;
  // Wing (W*) and back (B*) roles sit at fraction f of the home-goal-to-ball
  // vector with lateral offset d * (1 + k (1 - |hb| / length)).
  double wing_fraction = 0.6;
  double wing_offset = 4.0;
  double back_fraction = 0.3;
  double back_offset = 3.0;
  double offset_gain = 1.0;
  double stopper_offset = 2.0;
  double goalie_depth = 1.0;     // m in front of the goal centre
  double kickoff_jitter = 0.5;   // m, uniform per axis

  /// Throws ContractViolation on out-of-range values.
  void validate() const;
};

/// Ball positions are kept on a grid of this spacing so sums of x changes are exact.
inline constexpr double kBallQuantum = 1.0 / 1048576.0;
double quantize(double v);

/// Kickoff formation with the ball at the centre; positions jittered from `rng`.
WorldState kickoff(const SoccerParams& params, std::size_t team_size, Rng& rng, int home_score = 0,
                   int away_score = 0);

/// Target of a reactive role (everything but SK and GKSK) for a home teammate.
Vec2 target_position(Role role, const WorldState& world, std::uint32_t agent_id, const SoccerParams& params);

double striker_cost(std::uint32_t agent_id, const WorldState& world, const SoccerParams& params);

/// Lowest-cost non-goalie home teammate, lowest id on ties.
std::uint32_t assign_striker(const WorldState& world, const SoccerParams& params);

/// GK, or GKSK when the ball is within goalie reach.
Role goalie_role(const WorldState& world, const SoccerParams& params);

/// Throws ContractViolation unless every home teammate has a role, exactly one
/// non-goalie is SK and the goalie holds GK or GKSK.
void validate_assignment(const WorldState& world, const RoleAssignment& assignment);

// ---------------------------------------------------------------------------
// State variables
//
// Order: |hb|, |bo|, angle hbo; for teammate ids n_start..n_end: |a_i b|,
// bearing of the ball from a_i's heading, direction of a_i seen from the ball;
// for the m_max opponents nearest the ball: |c_j b|, direction of c_j seen
// from the ball. Unsigned angles in [0, pi] map to [-pi/2, pi/2] by
// subtracting pi/2; signed angles in (-pi, pi] are halved. Missing opponents
// read as (field diagonal, 0).

std::size_t state_variable_count(std::size_t n_start, std::size_t n_end, std::size_t m_max);

std::vector<double> state_variables(const WorldState& world, std::uint32_t agent_id, std::size_t n_start,
                                    std::size_t n_end, std::size_t m_max);

/// Tile-coder ranges matching state_variables.
std::vector<VariableRange> state_variable_ranges(const Field& field, std::size_t n_start, std::size_t n_end,
                                                 std::size_t m_max);

// ---------------------------------------------------------------------------
// Rewards

/// True when the teammate is within the crowd radius of another teammate.
bool crowded(const WorldState& world, std::uint32_t agent_id, const SoccerParams& params);

/// Ball x progress over one decision interval, minus the step penalty, minus
/// the crowd penalty when `next` has the agent crowded.
double reward_transient(const WorldState& prev, const WorldState& next, std::uint32_t agent_id,
                        const SoccerParams& params);

/// +goal_reward for a home goal, -goal_reward for an away goal.
double reward_terminal(std::optional<Team> goal, const SoccerParams& params);

// ---------------------------------------------------------------------------
// Events

enum class EventType { kKickoff, kGoal, kStriker, kAssign };

struct Event {
  std::uint64_t tick = 0;
  EventType type = EventType::kKickoff;
  std::string payload;

  friend bool operator==(const Event&, const Event&) = default;
};

/// "tick,type,payload"
std::string format_event(const Event& event);
Event parse_event(std::string_view line, std::size_t line_number);
std::string format_assignment(const RoleAssignment& assignment);

class EventLogWriter {
 public:
  explicit EventLogWriter(const std::filesystem::path& path);
  void write(const Event& event);
  void flush();

 private:
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Opponents and the hand-coded baseline

/// Striker by cost, goalie by reach, remaining roles by priority: each role in
/// kHandCodedPriority goes to the nearest unassigned field player.
RoleAssignment hand_coded_assignment(const WorldState& world, const SoccerParams& params);

inline constexpr std::array<Role, 12> kHandCodedPriority = {Role::ST, Role::FL, Role::FR,   Role::BM,
                                                            Role::EX1M, Role::WM, Role::BL, Role::BR,
                                                            Role::WL, Role::WR, Role::EX1L, Role::EX1R};

/// Striker by cost, goalie by reach, uniform reactive roles for the rest.
RoleAssignment random_assignment(const WorldState& world, const SoccerParams& params, Rng& rng);

/// Roles for the away team, keyed by opponent id. `world` is in home coordinates.
class OpponentPolicy {
 public:
  virtual ~OpponentPolicy() = default;
  virtual RoleAssignment assign(const WorldState& world, const RoleAssignment& home, const SoccerParams& params,
                                Rng& rng) const = 0;
  virtual std::string_view name() const = 0;
};

class HandCodedOpponent final : public OpponentPolicy {
 public:
  RoleAssignment assign(const WorldState& world, const RoleAssignment& home, const SoccerParams& params,
                        Rng& rng) const override;
  std::string_view name() const override { return "hand_coded"; }
};

class RandomOpponent final : public OpponentPolicy {
 public:
  RoleAssignment assign(const WorldState& world, const RoleAssignment& home, const SoccerParams& params,
                        Rng& rng) const override;
  std::string_view name() const override { return "random"; }
};

/// Copies the home team's role for each id; striker and goalie follow the usual rules.
class MirrorOpponent final : public OpponentPolicy {
 public:
  RoleAssignment assign(const WorldState& world, const RoleAssignment& home, const SoccerParams& params,
                        Rng& rng) const override;
  std::string_view name() const override { return "mirror"; }
};

/// Throws ContractViolation for an unknown name.
std::unique_ptr<OpponentPolicy> make_opponent(std::string_view name);

// ---------------------------------------------------------------------------
// Simulation

struct TickResult {
  WorldState next;
  std::optional<Team> goal;
  std::vector<Event> events;
  std::vector<std::uint32_t> new_home_strikers;  // home ids that took SK this tick
};

/// One tick. Strikers are re-selected first; a new striker swaps roles with the
/// old one in the given assignments. The goalie roles follow the ball. On a
/// goal the ball stops on the goal line and the score is updated; the caller
/// restarts play.
TickResult step(const WorldState& world, RoleAssignment& home, RoleAssignment& away, const SoccerParams& params,
                Rng& rng);

struct AgentOutcome {
  std::uint32_t id = 0;
  double transient_reward = 0.0;
  double progress = 0.0;  // ball x change over the interval
  bool crowded = false;
  double terminal_reward = 0.0;
  double gamma_next = 0.0;
  bool became_striker = false;
};

struct DecisionResult {
  WorldState end;           // world when the interval ended, before any restart
  WorldState next;          // world play continues from
  std::optional<Team> goal;
  std::vector<AgentOutcome> outcomes;  // one per home field player, by id
  std::vector<Event> events;
  RoleAssignment home;      // assignment in force at the end of the interval
};

/// Runs ticks_per_decision ticks, or fewer when a goal ends the interval, and
/// emits per-agent (r, z, gamma'). A goal gives every agent z = +-goal_reward
/// and gamma' = 0 and restarts from kickoff; an agent that took SK during the
/// interval gets gamma' = 0 and z = 0; otherwise gamma' = `gamma`.
DecisionResult decision_step(const WorldState& world, const RoleAssignment& home, const OpponentPolicy& opponent,
                             const SoccerParams& params, double gamma, Rng& rng);

}  // namespace gvf::soccer
