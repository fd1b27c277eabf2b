#pragma once

#include "cher/envs/environment.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace cher {

using Vec2 = Eigen::Vector2d;

enum class Arena { Gather, FourRooms, Maze };

std::string to_string(Arena arena);
Arena arena_from_string(const std::string& name);

// Axis-aligned wall segment; a and b share either x or y.
struct Wall {
  Vec2 a;
  Vec2 b;
  bool vertical() const { return a.x() == b.x(); }
};

struct NavConfig {
  Arena arena = Arena::FourRooms;
  int horizon = 500;
  double dt = 1.0;
  double max_speed = 1.0;
  double max_accel = 1.0;  // action box is [-max_accel, max_accel]^2
  Vec2 arena_low{-2.0, -2.0};
  Vec2 arena_high{22.0, 22.0};
  std::vector<Wall> walls;
  // Gather
  int apples = 8;
  int bombs = 8;
  double pickup_radius = 1.0;
  double item_clearance = 2.0;  // no items this close to the start
  double sensor_range = 6.0;
  int sensor_bins = 8;
  // Maze / FourRooms
  double success_radius = 5.0;
  std::vector<Vec2> targets;  // FourRooms: drawn uniformly from this list
  Vec2 target_low{-4.0, -4.0};  // Maze: target box
  Vec2 target_high{20.0, 20.0};

  void validate() const;

  static NavConfig gather();
  static NavConfig four_rooms();
  static NavConfig maze();
  static NavConfig preset(Arena arena);
};

struct Item {
  Vec2 position;
  bool apple = true;
};

struct NavState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  std::vector<Item> items;
  Vec2 target = Vec2::Zero();
  int step = 0;
};

struct NavStepResult {
  NavState state;
  double reward = 0.0;
  bool done = false;  // horizon reached
};

NavState nav_reset(const NavConfig& config, Rng& rng);
NavStepResult nav_step(const NavState& state, const Vec& action, const NavConfig& config);

// Moves from `from` by `delta`, one axis at a time, stopping just short of any
// wall that would be crossed. `velocity` components that hit a wall are zeroed.
Vec2 resolve_motion(const Vec2& from, const Vec2& delta, Vec2& velocity, const NavConfig& config);

bool free_of_walls(const Vec2& p, const NavConfig& config, double clearance);

// [x, y, vx, vy, target_x, target_y] for Maze/FourRooms;
// [x, y, vx, vy, apple sensors..., bomb sensors...] for Gather.
Vec nav_observation(const NavState& state, const NavConfig& config);
int nav_observation_dim(const NavConfig& config);
bool nav_success(const NavState& state, const NavConfig& config);

class NavEnv : public Environment {
 public:
  explicit NavEnv(NavConfig config);

  std::string id() const override;
  int observation_dim() const override { return nav_observation_dim(config_); }
  Bounds action_bounds() const override;
  int horizon() const override { return config_.horizon; }

  Vec reset(Rng& rng) override;
  StepResult step(const Vec& action) override;
  Vec observe() const override { return nav_observation(state_, config_); }

  GoalSpec default_goal_spec() const override;
  double default_reward_scale() const override;

  std::vector<Vec> evaluation_targets() const override;
  void set_target(const Vec& target) override;
  bool has_success_metric() const override { return config_.arena != Arena::Gather; }
  bool success() const override { return nav_success(state_, config_); }

  void write_trajectory_header(std::ostream& out) const override;
  void write_trajectory_rows(std::ostream& out, int step, double reward) const override;

  const NavState& state() const { return state_; }
  const NavConfig& config() const { return config_; }

 private:
  NavConfig config_;
  NavState state_;
};

}  // namespace cher
