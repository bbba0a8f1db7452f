#include "gvf/soccer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gvf/errors.hpp"
#include "text_format.hpp"

namespace gvf::soccer {

namespace {

constexpr double kPi = std::numbers::pi;

Vec2 unit_or(Vec2 v, Vec2 fallback) {
  const double n = norm(v);
  return n > 0.0 ? (1.0 / n) * v : fallback;
}

Vec2 clamp_inside(Vec2 p, const Field& field, double margin) {
  const double hx = field.length / 2.0 - margin;
  const double hy = field.width / 2.0 - margin;
  return {std::clamp(p.x, -hx, hx), std::clamp(p.y, -hy, hy)};
}

/// Direction of `to` seen from `from`, relative to +x; zero when they coincide.
double direction(Vec2 from, Vec2 to) {
  const Vec2 d = to - from;
  return (d.x == 0.0 && d.y == 0.0) ? 0.0 : wrap_angle(std::atan2(d.y, d.x));
}

const Agent* find_agent(const std::vector<Agent>& agents, std::uint32_t id) {
  for (const Agent& a : agents)
    if (a.id == id) return &a;
  return nullptr;
}

bool has_field_player(const WorldState& world) {
  return std::any_of(world.teammates.begin(), world.teammates.end(),
                     [](const Agent& a) { return a.id != kGoalieId; });
}

std::uint32_t current_striker(const RoleAssignment& assignment) {
  for (const auto& [id, role] : assignment)
    if (role == Role::SK) return id;
  return 0;
}

/// Re-selects the striker; a change swaps the newcomer's role onto the old striker.
std::optional<std::uint32_t> reselect_striker(const WorldState& view, RoleAssignment& assignment,
                                              const SoccerParams& params) {
  if (!has_field_player(view)) return std::nullopt;
  const std::uint32_t best = assign_striker(view, params);
  const std::uint32_t old = current_striker(assignment);
  if (best == old) return std::nullopt;
  const Role taken = assignment.count(best) ? assignment.at(best) : Role::ST;
  if (old != 0) assignment[old] = taken;
  assignment[best] = Role::SK;
  return best;
}

Vec2 role_target(Role role, const WorldState& view, std::uint32_t id, const SoccerParams& params) {
  if (role == Role::SK || role == Role::GKSK) return view.ball;
  return target_position(role, view, id, params);
}

void move_towards(Agent& agent, Vec2 target, Vec2 ball, const SoccerParams& params) {
  const Vec2 pos = agent.pose.position();
  const Vec2 delta = target - pos;
  const double dist = norm(delta);
  const double stride = std::min(dist, params.v_max * params.tick_seconds);
  Vec2 next = pos;
  if (stride > 0.0) next = pos + (stride / dist) * delta;
  next = clamp_inside(next, params.field, 0.0);
  agent.pose.x = next.x;
  agent.pose.y = next.y;
  if (stride > 1e-12)
    agent.pose.heading = direction(pos, target);
  else if (!(ball == next))
    agent.pose.heading = direction(next, ball);
}

}  // namespace

double norm(Vec2 v) { return std::hypot(v.x, v.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

double quantize(double v) { return std::round(v / kBallQuantum) * kBallQuantum; }

const Agent& WorldState::teammate(std::uint32_t id) const {
  const Agent* a = find_agent(teammates, id);
  if (!a) throw ContractViolation("unknown teammate id " + std::to_string(id));
  return *a;
}

Agent& WorldState::teammate(std::uint32_t id) {
  return const_cast<Agent&>(static_cast<const WorldState&>(*this).teammate(id));
}

WorldState mirrored(const WorldState& world) {
  auto flip = [](std::vector<Agent> agents) {
    for (Agent& a : agents) {
      a.pose.x = -a.pose.x;
      a.pose.y = -a.pose.y;
      a.pose.heading = wrap_angle(a.pose.heading + kPi);
    }
    return agents;
  };
  WorldState m = world;
  m.ball = {-world.ball.x, -world.ball.y};
  m.teammates = flip(world.opponents);
  m.opponents = flip(world.teammates);
  m.home_score = world.away_score;
  m.away_score = world.home_score;
  return m;
}

// ---------------------------------------------------------------------------
// Roles

Role role_for_action(ActionId action) {
  require(action < kNumActions, "role_for_action: action out of range");
  return kReactiveRoles[action];
}

ActionId action_for_role(Role role) {
  const auto it = std::find(kReactiveRoles.begin(), kReactiveRoles.end(), role);
  require(it != kReactiveRoles.end(), "action_for_role: role is not a reactive field role");
  return static_cast<ActionId>(it - kReactiveRoles.begin());
}

std::string_view role_name(Role role) {
  static constexpr std::array<std::string_view, 15> kNames = {"SK", "FL", "FR", "EX1L", "EX1R", "ST", "EX1M", "WL",
                                                              "WR", "WM", "BL", "BR", "BM",   "GK",   "GKSK"};
  return kNames[static_cast<std::size_t>(role)];
}

void SoccerParams::validate() const {
  require(field.length > 0.0 && field.width > 0.0, "soccer: field dimensions must be positive");
  require(field.goal_width > 0.0 && field.goal_width < field.width, "soccer: goal width must fit the field");
  require(tick_seconds > 0.0 && ticks_per_decision > 0, "soccer: tick settings must be positive");
  require(v_max > 0.0 && dribble_speed >= 0.0 && control_radius > 0.0 && scatter_radius >= 0.0,
          "soccer: kinematic settings out of range");
  require(p_dribble >= 0.0 && p_dribble <= 1.0, "soccer: p_dribble must lie in [0, 1]");
  require(margin >= 0.0 && 2.0 * margin < field.width && 2.0 * margin < field.length, "soccer: margin too large");
  require(w_angle >= 0.0 && w_crowd >= 0.0 && near_radius >= 0.0 && crowd_radius >= 0.0 && goalie_reach >= 0.0,
          "soccer: cost settings must be nonnegative");
  require(std::isfinite(step_penalty) && std::isfinite(crowd_penalty) && std::isfinite(goal_reward),
          "soccer: rewards must be finite");
  require(kickoff_jitter >= 0.0 && kickoff_jitter < 2.0, "soccer: kickoff jitter out of range");
}

WorldState kickoff(const SoccerParams& params, std::size_t team_size, Rng& rng, int home_score, int away_score) {
  require(team_size >= 1 && team_size <= 11, "kickoff: team size must lie in [1, 11]");
  std::uniform_real_distribution<double> jitter(-params.kickoff_jitter, params.kickoff_jitter);
  WorldState w;
  w.field = params.field;
  w.home_score = home_score;
  w.away_score = away_score;
  static constexpr double kLanes[3] = {0.0, 4.0, -4.0};
  auto place = [&](std::vector<Agent>& team, double sign) {
    for (std::uint32_t id = 1; id <= team_size; ++id) {
      Vec2 p;
      if (id == kGoalieId) {
        p = {-params.field.length / 2.0 + params.goalie_depth, 0.0};
      } else {
        const std::size_t slot = id - 2;
        p = {-3.0 - 3.0 * static_cast<double>(slot / 3), kLanes[slot % 3]};
        p = p + Vec2{jitter(rng), jitter(rng)};
      }
      p = sign * p;
      Agent a{id, {p.x, p.y, direction(p, {0.0, 0.0})}};
      team.push_back(a);
    }
  };
  place(w.teammates, 1.0);
  place(w.opponents, -1.0);
  return w;
}

Vec2 target_position(Role role, const WorldState& world, std::uint32_t agent_id, const SoccerParams& params) {
  require(role != Role::SK && role != Role::GKSK, "target_position: active roles have no target position");
  const Agent& self = world.teammate(agent_id);
  const Vec2 b = world.ball;
  const Vec2 h = world.home_goal();
  const Vec2 hb = b - h;
  const Vec2 along = unit_or(hb, {1.0, 0.0});
  const Vec2 left{-along.y, along.x};
  const double closeness = 1.0 - std::clamp(norm(hb) / world.field.length, 0.0, 1.0);
  const double gain = 1.0 + params.offset_gain * closeness;
  auto formation = [&](double fraction, double offset) { return h + fraction * hb + (offset * gain) * left; };

  Vec2 t;
  switch (role) {
    case Role::FL: t = b + Vec2{0.0, 2.0}; break;
    case Role::FR: t = b - Vec2{0.0, 2.0}; break;
    case Role::EX1L: t = b + Vec2{0.0, 4.0}; break;
    case Role::EX1R: t = b - Vec2{0.0, 4.0}; break;
    case Role::ST: t = b - Vec2{params.stopper_offset, 0.0}; break;
    case Role::EX1M: {
      const Agent* nearest = nullptr;
      for (const Agent& c : world.opponents)
        if (!nearest || distance(c.pose.position(), self.pose.position()) <
                            distance(nearest->pose.position(), self.pose.position()))
          nearest = &c;
      t = nearest ? 0.5 * (nearest->pose.position() + b) : b - Vec2{params.stopper_offset, 0.0};
      break;
    }
    case Role::WL: t = formation(params.wing_fraction, params.wing_offset); break;
    case Role::WR: t = formation(params.wing_fraction, -params.wing_offset); break;
    case Role::WM: t = formation(params.wing_fraction, 0.0); break;
    case Role::BL: t = formation(params.back_fraction, params.back_offset); break;
    case Role::BR: t = formation(params.back_fraction, -params.back_offset); break;
    case Role::BM: t = formation(params.back_fraction, 0.0); break;
    case Role::GK: t = h + params.goalie_depth * along; break;
    default: t = b; break;
  }
  return clamp_inside(t, world.field, params.margin);
}

double striker_cost(std::uint32_t agent_id, const WorldState& world, const SoccerParams& params) {
  const Agent& self = world.teammate(agent_id);
  const Vec2 a = self.pose.position();
  const double dist = distance(a, world.ball);
  const double bearing = dist > 0.0 ? wrap_angle(direction(a, world.ball) - self.pose.heading) : 0.0;
  int crowd = 0;
  for (const Agent& o : world.teammates)
    if (o.id != agent_id && distance(o.pose.position(), world.ball) < params.near_radius) ++crowd;
  for (const Agent& o : world.opponents)
    if (distance(o.pose.position(), world.ball) < params.near_radius) ++crowd;
  return dist + params.w_angle * std::abs(bearing) + params.w_crowd * crowd;
}

std::uint32_t assign_striker(const WorldState& world, const SoccerParams& params) {
  std::uint32_t best = 0;
  double best_cost = 0.0;
  for (const Agent& a : world.teammates) {
    if (a.id == kGoalieId) continue;
    const double c = striker_cost(a.id, world, params);
    if (best == 0 || c < best_cost || (c == best_cost && a.id < best)) {
      best = a.id;
      best_cost = c;
    }
  }
  require(best != 0, "assign_striker: no field player");
  return best;
}

Role goalie_role(const WorldState& world, const SoccerParams& params) {
  const Agent* g = find_agent(world.teammates, kGoalieId);
  require(g != nullptr, "goalie_role: team has no goalie");
  return distance(g->pose.position(), world.ball) <= params.goalie_reach ? Role::GKSK : Role::GK;
}

void validate_assignment(const WorldState& world, const RoleAssignment& assignment) {
  require(assignment.size() == world.teammates.size(), "RoleAssignment: every teammate needs exactly one role");
  int strikers = 0;
  for (const Agent& a : world.teammates) {
    const auto it = assignment.find(a.id);
    require(it != assignment.end(), "RoleAssignment: teammate without a role");
    const bool goalie_role = it->second == Role::GK || it->second == Role::GKSK;
    if (a.id == kGoalieId)
      require(goalie_role, "RoleAssignment: the goalie must hold GK or GKSK");
    else
      require(!goalie_role, "RoleAssignment: GK and GKSK are reserved for the goalie");
    strikers += it->second == Role::SK ? 1 : 0;
  }
  require(strikers == (has_field_player(world) ? 1 : 0), "RoleAssignment: exactly one striker required");
}

// ---------------------------------------------------------------------------
// State variables

std::size_t state_variable_count(std::size_t n_start, std::size_t n_end, std::size_t m_max) {
  require(n_start >= 1 && n_start <= n_end, "state variables: need 1 <= n_start <= n_end");
  return 3 + 3 * (n_end - n_start + 1) + 2 * m_max;
}

std::vector<double> state_variables(const WorldState& world, std::uint32_t agent_id, std::size_t n_start,
                                    std::size_t n_end, std::size_t m_max) {
  world.teammate(agent_id);
  std::vector<double> out;
  out.reserve(state_variable_count(n_start, n_end, m_max));
  const Vec2 b = world.ball;
  const Vec2 h = world.home_goal();
  const Vec2 o = world.opponent_goal();
  out.push_back(distance(h, b));
  out.push_back(distance(b, o));
  const Vec2 bh = h - b;
  const Vec2 bo = o - b;
  const double hbo = std::atan2(std::abs(bh.x * bo.y - bh.y * bo.x), bh.x * bo.x + bh.y * bo.y);
  out.push_back(hbo - kPi / 2.0);

  for (std::size_t i = n_start; i <= n_end; ++i) {
    const Agent& a = world.teammate(static_cast<std::uint32_t>(i));
    const Vec2 p = a.pose.position();
    const double dist = distance(p, b);
    out.push_back(dist);
    out.push_back(dist > 0.0 ? wrap_angle(direction(p, b) - a.pose.heading) / 2.0 : 0.0);
    out.push_back(direction(b, p) / 2.0);
  }

  std::vector<const Agent*> tracked;
  for (const Agent& c : world.opponents) tracked.push_back(&c);
  std::sort(tracked.begin(), tracked.end(), [&](const Agent* x, const Agent* y) {
    const double dx = distance(x->pose.position(), b);
    const double dy = distance(y->pose.position(), b);
    return dx != dy ? dx < dy : x->id < y->id;
  });
  const double diagonal = std::hypot(world.field.length, world.field.width);
  for (std::size_t j = 0; j < m_max; ++j) {
    if (j < tracked.size()) {
      out.push_back(distance(tracked[j]->pose.position(), b));
      out.push_back(direction(b, tracked[j]->pose.position()) / 2.0);
    } else {
      out.push_back(diagonal);
      out.push_back(0.0);
    }
  }
  return out;
}

std::vector<VariableRange> state_variable_ranges(const Field& field, std::size_t n_start, std::size_t n_end,
                                                 std::size_t m_max) {
  const VariableRange dist{0.0, std::hypot(field.length, field.width)};
  const VariableRange angle{-kPi / 2.0, kPi / 2.0};
  std::vector<VariableRange> r = {dist, dist, angle};
  for (std::size_t i = n_start; i <= n_end; ++i) r.insert(r.end(), {dist, angle, angle});
  for (std::size_t j = 0; j < m_max; ++j) r.insert(r.end(), {dist, angle});
  require(r.size() == state_variable_count(n_start, n_end, m_max), "state_variable_ranges: internal count mismatch");
  return r;
}

// ---------------------------------------------------------------------------
// Rewards

bool crowded(const WorldState& world, std::uint32_t agent_id, const SoccerParams& params) {
  const Vec2 p = world.teammate(agent_id).pose.position();
  for (const Agent& a : world.teammates)
    if (a.id != agent_id && distance(a.pose.position(), p) < params.crowd_radius) return true;
  return false;
}

double reward_transient(const WorldState& prev, const WorldState& next, std::uint32_t agent_id,
                        const SoccerParams& params) {
  const double progress = next.ball.x - prev.ball.x;
  return progress - params.step_penalty - (crowded(next, agent_id, params) ? params.crowd_penalty : 0.0);
}

double reward_terminal(std::optional<Team> goal, const SoccerParams& params) {
  require(goal.has_value(), "reward_terminal: no goal was scored");
  return *goal == Team::kHome ? params.goal_reward : -params.goal_reward;
}

// ---------------------------------------------------------------------------
// Events

namespace {

constexpr std::array<std::string_view, 4> kEventNames = {"kickoff", "goal", "striker", "assign"};

}  // namespace

std::string format_event(const Event& event) {
  return std::to_string(event.tick) + ',' + std::string(kEventNames[static_cast<std::size_t>(event.type)]) + ',' +
         event.payload;
}

Event parse_event(std::string_view line, std::size_t line_number) {
  const std::size_t c1 = line.find(',');
  const std::size_t c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
  if (c2 == std::string_view::npos) throw ParseError("event needs tick,type,payload", line_number);
  Event e;
  e.tick = text::parse_uint<std::uint64_t>(line.substr(0, c1), line_number);
  const std::string_view type = text::trim(line.substr(c1 + 1, c2 - c1 - 1));
  const auto it = std::find(kEventNames.begin(), kEventNames.end(), type);
  if (it == kEventNames.end()) throw ParseError("unknown event type '" + std::string(type) + "'", line_number);
  e.type = static_cast<EventType>(it - kEventNames.begin());
  e.payload = std::string(line.substr(c2 + 1));
  return e;
}

std::string format_assignment(const RoleAssignment& assignment) {
  std::string s;
  for (const auto& [id, role] : assignment) {
    if (!s.empty()) s += ';';
    s += std::to_string(id) + '=' + std::string(role_name(role));
  }
  return s;
}

EventLogWriter::EventLogWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw IoError("cannot open event log " + path.string());
  out_ << "# tick,type,payload\n";
}

void EventLogWriter::write(const Event& event) {
  out_ << format_event(event) << '\n';
  if (!out_) throw IoError("failed writing event log");
}

void EventLogWriter::flush() { out_.flush(); }

// ---------------------------------------------------------------------------
// Assignment policies

RoleAssignment hand_coded_assignment(const WorldState& world, const SoccerParams& params) {
  RoleAssignment out;
  std::vector<std::uint32_t> open;
  const std::uint32_t striker = has_field_player(world) ? assign_striker(world, params) : 0;
  for (const Agent& a : world.teammates) {
    if (a.id == kGoalieId)
      out[a.id] = goalie_role(world, params);
    else if (a.id == striker)
      out[a.id] = Role::SK;
    else
      open.push_back(a.id);
  }
  for (Role role : kHandCodedPriority) {
    if (open.empty()) break;
    auto best = open.begin();
    double best_dist = 0.0;
    for (auto it = open.begin(); it != open.end(); ++it) {
      const double d = distance(world.teammate(*it).pose.position(), target_position(role, world, *it, params));
      if (it == open.begin() || d < best_dist) {
        best = it;
        best_dist = d;
      }
    }
    out[*best] = role;
    open.erase(best);
  }
  return out;
}

RoleAssignment random_assignment(const WorldState& world, const SoccerParams& params, Rng& rng) {
  RoleAssignment out;
  const std::uint32_t striker = has_field_player(world) ? assign_striker(world, params) : 0;
  for (const Agent& a : world.teammates) {
    if (a.id == kGoalieId)
      out[a.id] = goalie_role(world, params);
    else if (a.id == striker)
      out[a.id] = Role::SK;
    else
      out[a.id] = kReactiveRoles[uniform_position(rng, kNumActions)];
  }
  return out;
}

RoleAssignment HandCodedOpponent::assign(const WorldState& world, const RoleAssignment&, const SoccerParams& params,
                                         Rng&) const {
  return hand_coded_assignment(mirrored(world), params);
}

RoleAssignment RandomOpponent::assign(const WorldState& world, const RoleAssignment&, const SoccerParams& params,
                                      Rng& rng) const {
  return random_assignment(mirrored(world), params, rng);
}

RoleAssignment MirrorOpponent::assign(const WorldState& world, const RoleAssignment& home, const SoccerParams& params,
                                      Rng&) const {
  const WorldState view = mirrored(world);
  RoleAssignment out;
  const std::uint32_t striker = has_field_player(view) ? assign_striker(view, params) : 0;
  for (const Agent& a : view.teammates) {
    if (a.id == kGoalieId) {
      out[a.id] = goalie_role(view, params);
    } else if (a.id == striker) {
      out[a.id] = Role::SK;
    } else {
      const auto it = home.find(a.id);
      const bool reactive = it != home.end() &&
                            std::find(kReactiveRoles.begin(), kReactiveRoles.end(), it->second) != kReactiveRoles.end();
      out[a.id] = reactive ? it->second : Role::ST;
    }
  }
  return out;
}

std::unique_ptr<OpponentPolicy> make_opponent(std::string_view name) {
  if (name == "hand_coded") return std::make_unique<HandCodedOpponent>();
  if (name == "random") return std::make_unique<RandomOpponent>();
  if (name == "mirror") return std::make_unique<MirrorOpponent>();
  throw ContractViolation("unknown opponent policy '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Simulation

TickResult step(const WorldState& world, RoleAssignment& home, RoleAssignment& away, const SoccerParams& params,
                Rng& rng) {
  TickResult result;
  result.next = world;
  WorldState& w = result.next;
  const WorldState away_view = mirrored(world);

  if (auto s = reselect_striker(world, home, params)) {
    result.new_home_strikers.push_back(*s);
    result.events.push_back({world.tick, EventType::kStriker, "home:" + std::to_string(*s)});
  }
  if (auto s = reselect_striker(away_view, away, params))
    result.events.push_back({world.tick, EventType::kStriker, "away:" + std::to_string(*s)});
  if (find_agent(world.teammates, kGoalieId)) home[kGoalieId] = goalie_role(world, params);
  if (find_agent(away_view.teammates, kGoalieId)) away[kGoalieId] = goalie_role(away_view, params);

  // Targets come from the tick-start world so both teams move simultaneously.
  for (Agent& a : w.teammates) {
    const auto it = home.find(a.id);
    require(it != home.end(), "step: home teammate without a role");
    move_towards(a, role_target(it->second, world, a.id, params), world.ball, params);
  }
  for (Agent& a : w.opponents) {
    const auto it = away.find(a.id);
    require(it != away.end(), "step: opponent without a role");
    const Vec2 t = -1.0 * role_target(it->second, away_view, a.id, params);
    move_towards(a, t, world.ball, params);
  }

  // Ball: nearest agent inside the control radius, exact ties drawn uniformly.
  struct Candidate {
    const Agent* agent;
    bool home;
  };
  std::vector<Candidate> nearest;
  double best = params.control_radius;
  auto consider = [&](const std::vector<Agent>& team, bool is_home) {
    for (const Agent& a : team) {
      const double d = distance(a.pose.position(), w.ball);
      if (d < best) {
        best = d;
        nearest.clear();
      }
      if (d == best) nearest.push_back({&a, is_home});
    }
  };
  consider(w.teammates, true);
  consider(w.opponents, false);
  const Agent* controller = nullptr;
  bool controller_home = true;
  if (!nearest.empty()) {
    const Candidate& c = nearest.size() == 1 ? nearest.front() : nearest[uniform_position(rng, nearest.size())];
    controller = c.agent;
    controller_home = c.home;
  }
  if (controller) {
    if (uniform01(rng) < params.p_dribble) {
      const Vec2 goal = controller_home ? w.opponent_goal() : w.home_goal();
      const Vec2 to_goal = goal - w.ball;
      const double dist = norm(to_goal);
      const double stride = std::min(dist, params.dribble_speed * params.tick_seconds);
      if (stride > 0.0) w.ball = w.ball + (stride / dist) * to_goal;
    } else {
      const double r = params.scatter_radius * std::sqrt(uniform01(rng));
      const double theta = 2.0 * kPi * uniform01(rng);
      w.ball = w.ball + Vec2{r * std::cos(theta), r * std::sin(theta)};
    }
  }

  w.ball = {quantize(w.ball.x), quantize(w.ball.y)};
  const double hx = w.field.length / 2.0;
  const double hy = w.field.width / 2.0;
  const bool between_posts = std::abs(w.ball.y) <= w.field.goal_width / 2.0;
  if (w.ball.x >= hx && between_posts) {
    result.goal = Team::kHome;
    ++w.home_score;
  } else if (w.ball.x <= -hx && between_posts) {
    result.goal = Team::kAway;
    ++w.away_score;
  }
  w.ball = {std::clamp(w.ball.x, -hx, hx), std::clamp(w.ball.y, -hy, hy)};
  ++w.tick;
  if (result.goal)
    result.events.push_back({w.tick, EventType::kGoal, *result.goal == Team::kHome ? "home" : "away"});
  return result;
}

DecisionResult decision_step(const WorldState& world, const RoleAssignment& home, const OpponentPolicy& opponent,
                             const SoccerParams& params, double gamma, Rng& rng) {
  validate_assignment(world, home);
  require(gamma >= 0.0 && gamma <= 1.0, "decision_step: gamma must lie in [0, 1]");
  DecisionResult result;
  result.home = home;
  RoleAssignment away = opponent.assign(world, home, params, rng);
  result.events.push_back({world.tick, EventType::kAssign, "home:" + format_assignment(result.home)});
  result.events.push_back({world.tick, EventType::kAssign, "away:" + format_assignment(away)});

  std::vector<std::uint32_t> took_sk;
  WorldState cur = world;
  for (int k = 0; k < params.ticks_per_decision; ++k) {
    TickResult t = step(cur, result.home, away, params, rng);
    took_sk.insert(took_sk.end(), t.new_home_strikers.begin(), t.new_home_strikers.end());
    result.events.insert(result.events.end(), t.events.begin(), t.events.end());
    cur = std::move(t.next);
    if (t.goal) {
      result.goal = t.goal;
      break;
    }
  }
  result.end = cur;

  for (const Agent& a : world.teammates) {
    if (a.id == kGoalieId) continue;
    AgentOutcome out;
    out.id = a.id;
    out.progress = result.end.ball.x - world.ball.x;
    out.crowded = crowded(result.end, a.id, params);
    out.transient_reward = reward_transient(world, result.end, a.id, params);
    out.became_striker = std::find(took_sk.begin(), took_sk.end(), a.id) != took_sk.end();
    if (result.goal) {
      out.terminal_reward = reward_terminal(result.goal, params);
      out.gamma_next = 0.0;
    } else {
      out.gamma_next = out.became_striker ? 0.0 : gamma;
    }
    result.outcomes.push_back(out);
  }

  if (result.goal) {
    result.next = kickoff(params, world.teammates.size(), rng, result.end.home_score, result.end.away_score);
    result.next.tick = result.end.tick;
    result.events.push_back({result.next.tick, EventType::kKickoff, ""});
  } else {
    result.next = result.end;
  }
  return result;
}

}  // namespace gvf::soccer
