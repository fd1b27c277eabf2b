#include "cher/envs/nav.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace cher {
namespace {

constexpr double kWallMargin = 1e-6;

void add_box(std::vector<Wall>& walls, Vec2 lo, Vec2 hi) {
  walls.push_back({{lo.x(), lo.y()}, {hi.x(), lo.y()}});
  walls.push_back({{lo.x(), hi.y()}, {hi.x(), hi.y()}});
  walls.push_back({{lo.x(), lo.y()}, {lo.x(), hi.y()}});
  walls.push_back({{hi.x(), lo.y()}, {hi.x(), hi.y()}});
}

}  // namespace

std::string to_string(Arena arena) {
  switch (arena) {
    case Arena::Gather: return "gather";
    case Arena::FourRooms: return "four_rooms";
    case Arena::Maze: return "maze";
  }
  return "?";
}

Arena arena_from_string(const std::string& name) {
  if (name == "gather") return Arena::Gather;
  if (name == "four_rooms") return Arena::FourRooms;
  if (name == "maze") return Arena::Maze;
  throw ValidationError("unknown arena '" + name + "' (expected gather|four_rooms|maze)");
}

void NavConfig::validate() const {
  if (horizon <= 0) throw ValidationError("nav horizon must be > 0");
  if (!(dt > 0.0 && max_speed > 0.0 && max_accel > 0.0))
    throw ValidationError("nav dt, max_speed and max_accel must be > 0");
  if (!(arena_low.array() < arena_high.array()).all())
    throw ValidationError("nav arena bounds are empty");
  for (const auto& w : walls)
    if (w.a.x() != w.b.x() && w.a.y() != w.b.y())
      throw ValidationError("nav walls must be axis-aligned");
  if (apples < 0 || bombs < 0 || pickup_radius <= 0.0 || sensor_bins < 1 || sensor_range <= 0.0)
    throw ValidationError("invalid gather item settings");
  if (success_radius <= 0.0) throw ValidationError("success_radius must be > 0");
  if (arena == Arena::FourRooms && targets.empty())
    throw ValidationError("four_rooms needs at least one target");
}

// 20x20 open space, start at the centre.
NavConfig NavConfig::gather() {
  NavConfig c;
  c.arena = Arena::Gather;
  c.arena_low = {-10.0, -10.0};
  c.arena_high = {10.0, 10.0};
  return c;
}

// Rooms split by walls at x = 10 and y = 10, one doorway per wall segment.
// Start corner (0, 0); targets are the other three corners.
NavConfig NavConfig::four_rooms() {
  NavConfig c;
  c.arena = Arena::FourRooms;
  c.arena_low = {-2.0, -2.0};
  c.arena_high = {22.0, 22.0};
  c.walls = {
      {{10.0, -2.0}, {10.0, 3.0}},  {{10.0, 7.0}, {10.0, 13.0}},  {{10.0, 17.0}, {10.0, 22.0}},
      {{-2.0, 10.0}, {3.0, 10.0}},  {{7.0, 10.0}, {13.0, 10.0}},  {{17.0, 10.0}, {22.0, 10.0}},
  };
  c.targets = {{0.0, 20.0}, {20.0, 0.0}, {20.0, 20.0}};
  return c;
}

// U-shaped corridor: a block fills [-4, 12] x [4, 12] inside [-4, 20]^2.
NavConfig NavConfig::maze() {
  NavConfig c;
  c.arena = Arena::Maze;
  c.arena_low = {-4.0, -4.0};
  c.arena_high = {20.0, 20.0};
  add_box(c.walls, {-4.0, 4.0}, {12.0, 12.0});
  return c;
}

NavConfig NavConfig::preset(Arena arena) {
  switch (arena) {
    case Arena::Gather: return gather();
    case Arena::FourRooms: return four_rooms();
    case Arena::Maze: return maze();
  }
  return four_rooms();
}

bool free_of_walls(const Vec2& p, const NavConfig& config, double clearance) {
  if ((p.array() < config.arena_low.array()).any() || (p.array() > config.arena_high.array()).any())
    return false;
  for (const auto& w : config.walls) {
    const Vec2 lo = w.a.cwiseMin(w.b);
    const Vec2 hi = w.a.cwiseMax(w.b);
    const Vec2 nearest = p.cwiseMax(lo).cwiseMin(hi);
    if ((p - nearest).norm() <= clearance) return false;
  }
  return true;
}

NavState nav_reset(const NavConfig& config, Rng& rng) {
  config.validate();
  NavState s;
  if (config.arena == Arena::Gather) {
    auto place = [&](bool apple) {
      for (;;) {
        Vec2 p{rng.uniform(config.arena_low.x(), config.arena_high.x()),
               rng.uniform(config.arena_low.y(), config.arena_high.y())};
        if (p.norm() < config.item_clearance || !free_of_walls(p, config, 0.0)) continue;
        s.items.push_back({p, apple});
        return;
      }
    };
    for (int i = 0; i < config.apples; ++i) place(true);
    for (int i = 0; i < config.bombs; ++i) place(false);
  } else if (config.arena == Arena::FourRooms) {
    s.target = config.targets[rng.index(config.targets.size())];
  } else {
    s.target = {rng.uniform(config.target_low.x(), config.target_high.x()),
                rng.uniform(config.target_low.y(), config.target_high.y())};
  }
  return s;
}

Vec2 resolve_motion(const Vec2& from, const Vec2& delta, Vec2& velocity, const NavConfig& config) {
  Vec2 p = from;
  for (int axis = 0; axis < 2; ++axis) {
    const int other = 1 - axis;
    const double d = delta[axis];
    double end = p[axis] + d;
    if (d != 0.0) {
      for (const auto& w : config.walls) {
        // walls perpendicular to this axis: constant coordinate along `axis`
        if (w.a[axis] != w.b[axis]) continue;
        const double c = w.a[axis];
        const double lo = std::min(w.a[other], w.b[other]);
        const double hi = std::max(w.a[other], w.b[other]);
        if (p[other] < lo || p[other] > hi) continue;
        if (d > 0.0 && p[axis] < c && end >= c) {
          end = std::min(end, c - kWallMargin);
          velocity[axis] = 0.0;
        } else if (d < 0.0 && p[axis] > c && end <= c) {
          end = std::max(end, c + kWallMargin);
          velocity[axis] = 0.0;
        }
      }
    }
    if (end < config.arena_low[axis]) {
      end = config.arena_low[axis];
      velocity[axis] = 0.0;
    } else if (end > config.arena_high[axis]) {
      end = config.arena_high[axis];
      velocity[axis] = 0.0;
    }
    p[axis] = end;
  }
  return p;
}

NavStepResult nav_step(const NavState& state, const Vec& action, const NavConfig& config) {
  require_shape(action.size() == 2, "nav action must be 2-D");
  NavStepResult r;
  r.state = state;
  NavState& s = r.state;
  Vec2 accel{std::clamp(action[0], -config.max_accel, config.max_accel),
             std::clamp(action[1], -config.max_accel, config.max_accel)};
  Vec2 v = s.velocity + config.dt * accel;
  const double speed = v.norm();
  if (speed > config.max_speed) v *= config.max_speed / speed;
  s.position = resolve_motion(s.position, config.dt * v, v, config);
  s.velocity = v;
  s.step += 1;

  if (config.arena == Arena::Gather) {
    std::vector<Item> kept;
    for (const auto& item : s.items) {
      if ((item.position - s.position).norm() <= config.pickup_radius) {
        r.reward += item.apple ? 1.0 : -1.0;
      } else {
        kept.push_back(item);
      }
    }
    s.items = std::move(kept);
  } else {
    r.reward = -(s.position - s.target).norm();
  }
  r.done = s.step >= config.horizon;
  return r;
}

int nav_observation_dim(const NavConfig& config) {
  return config.arena == Arena::Gather ? 4 + 2 * config.sensor_bins : 6;
}

Vec nav_observation(const NavState& s, const NavConfig& config) {
  Vec obs = Vec::Zero(nav_observation_dim(config));
  obs << s.position, s.velocity, Vec::Zero(obs.size() - 4);
  if (config.arena != Arena::Gather) {
    obs.segment(4, 2) = s.target;
    return obs;
  }
  const int bins = config.sensor_bins;
  for (const auto& item : s.items) {
    const Vec2 d = item.position - s.position;
    const double dist = d.norm();
    if (dist >= config.sensor_range) continue;
    double angle = std::atan2(d.y(), d.x());
    if (angle < 0.0) angle += 2.0 * std::numbers::pi;
    int bin = static_cast<int>(angle / (2.0 * std::numbers::pi) * bins);
    bin = std::min(bin, bins - 1);
    const double intensity = 1.0 - dist / config.sensor_range;
    const int slot = 4 + (item.apple ? 0 : bins) + bin;
    obs[slot] = std::max(obs[slot], intensity);
  }
  return obs;
}

bool nav_success(const NavState& s, const NavConfig& config) {
  if (config.arena == Arena::Gather) return false;
  return (s.position - s.target).norm() <= config.success_radius;
}

NavEnv::NavEnv(NavConfig config) : config_(std::move(config)) { config_.validate(); }

std::string NavEnv::id() const { return to_string(config_.arena); }

Bounds NavEnv::action_bounds() const {
  return {Vec::Constant(2, -config_.max_accel), Vec::Constant(2, config_.max_accel)};
}

Vec NavEnv::reset(Rng& rng) {
  state_ = nav_reset(config_, rng);
  return nav_observation(state_, config_);
}

StepResult NavEnv::step(const Vec& action) {
  NavStepResult r = nav_step(state_, action, config_);
  state_ = std::move(r.state);
  StepResult out;
  out.observation = nav_observation(state_, config_);
  out.reward = r.reward;
  out.truncated = r.done;
  return out;
}

GoalSpec NavEnv::default_goal_spec() const {
  GoalSpec g;
  g.state_indices = {0, 1};
  g.scale = Vec::Constant(2, 10.0);
  g.offset = Vec::Zero(2);
  g.mode = GoalMode::Egocentric;
  return g;
}

double NavEnv::default_reward_scale() const {
  return config_.arena == Arena::Gather ? 10.0 : 0.1;
}

std::vector<Vec> NavEnv::evaluation_targets() const {
  std::vector<Vec> out;
  if (config_.arena == Arena::FourRooms) {
    for (const auto& t : config_.targets) out.emplace_back(t);
  } else if (config_.arena == Arena::Maze) {
    out = {Vec2(16.0, 0.0), Vec2(16.0, 16.0), Vec2(0.0, 16.0)};
  }
  return out;
}

void NavEnv::set_target(const Vec& target) {
  require_shape(target.size() == 2, "nav target must be 2-D");
  state_.target = target;
}

void NavEnv::write_trajectory_header(std::ostream& out) const {
  out << "step,agent,x,y,vx,vy,reward\n";
}

void NavEnv::write_trajectory_rows(std::ostream& out, int step, double reward) const {
  out << step << ",0," << state_.position.x() << ',' << state_.position.y() << ','
      << state_.velocity.x() << ',' << state_.velocity.y() << ',' << reward << '\n';
}

}  // namespace cher
