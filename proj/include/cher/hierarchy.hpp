#pragma once

#include "cher/common.hpp"
#include "cher/mlp.hpp"
#include "cher/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cher {

// Absolute goals name a target state; egocentric goals name a desired change
// relative to the current state.
enum class GoalMode { Absolute, Egocentric };

std::string to_string(GoalMode mode);
GoalMode goal_mode_from_string(const std::string& name);

struct GoalSpec {
  std::vector<int> state_indices;  // state coordinates the goal addresses
  Vec scale;                       // goal = offset + scale * tanh(.)
  Vec offset;
  GoalMode mode = GoalMode::Egocentric;

  int dim() const { return static_cast<int>(state_indices.size()); }
  Bounds bounds() const { return {offset - scale, offset + scale}; }
  // Throws ValidationError when the fields are inconsistent.
  void validate() const;
  // Checks a state is long enough for every index.
  void check_state(const Vec& state) const;
  Vec select(const Vec& state) const;
};

struct HierarchyConfig {
  int meta_period = 10;
  GoalSpec goal;
  double gamma = 0.99;
  double manager_reward_scale = 1.0;

  void validate() const;
};

/// Actor and twin-critic networks (plus targets) for both levels.
///
/// Input layouts: manager actor [s], manager critics [s; g], worker actor
/// [s; g], worker critics [s; g; a]. A flat (non-hierarchical) agent leaves
/// the manager networks empty and uses the worker networks with no goal.
struct Policies {
  Mlp manager_actor, manager_critic1, manager_critic2;
  Mlp manager_actor_target, manager_critic1_target, manager_critic2_target;
  Mlp worker_actor, worker_critic1, worker_critic2;
  Mlp worker_actor_target, worker_critic1_target, worker_critic2_target;

  bool hierarchical() const { return !manager_actor.empty(); }
  int state_dim() const;
  int goal_dim() const;
  int action_dim() const { return worker_actor.output_dim(); }

  static Policies create(int state_dim, const Bounds& action_bounds, const GoalSpec& goal,
                         const std::vector<int>& hidden, Rng& rng);
  static Policies create_flat(int state_dim, const Bounds& action_bounds,
                              const std::vector<int>& hidden, Rng& rng);

  // Visits (name, network) for every network, in a fixed order.
  template <typename Self, typename F>
  static void for_each(Self& self, F&& f) {
    f("manager_actor", self.manager_actor);
    f("manager_critic1", self.manager_critic1);
    f("manager_critic2", self.manager_critic2);
    f("manager_actor_target", self.manager_actor_target);
    f("manager_critic1_target", self.manager_critic1_target);
    f("manager_critic2_target", self.manager_critic2_target);
    f("worker_actor", self.worker_actor);
    f("worker_critic1", self.worker_critic1);
    f("worker_critic2", self.worker_critic2);
    f("worker_actor_target", self.worker_actor_target);
    f("worker_critic1_target", self.worker_critic1_target);
    f("worker_critic2_target", self.worker_critic2_target);
  }
};

// Column-wise concatenation helpers for the input layouts above.
Vec concat(const Vec& a, const Vec& b);
Vec concat(const Vec& a, const Vec& b, const Vec& c);
Mat vstack(const Mat& a, const Mat& b);
Mat vstack(const Mat& a, const Mat& b, const Mat& c);

Vec assign_goal(const Policies& policies, const Vec& state);
Vec worker_action(const Policies& policies, const Vec& state, const Vec& goal);

// h(s_t, g_t, s_{t+1}): identity for absolute goals, g_t - (s_{t+1} - s_t)
// on the goal coordinates for egocentric goals.
Vec transition_goal(const GoalSpec& spec, const Vec& s_t, const Vec& g_t, const Vec& s_next);

// r_w = -||g - s'|| (absolute) or -||g - (s' - s)|| (egocentric), on the goal
// coordinates.
double intrinsic_reward(const GoalSpec& spec, const Vec& s_t, const Vec& g_t, const Vec& s_next);

// d r_w / d g. Zero vector where the distance is exactly zero.
Vec intrinsic_reward_goal_gradient(const GoalSpec& spec, const Vec& s_t, const Vec& g,
                                   const Vec& s_next);

struct ExplorationConfig {
  std::int64_t warmup_steps = 10000;
  double noise_scale = 0.1;  // Gaussian std as a fraction of the half-width
};

// Before warmup_steps: uniform over the box. After: value + N(0, (noise_scale *
// half_width)^2) per coordinate, clipped to the box.
Vec explore(const Vec& value, const Bounds& range, Rng& rng, std::int64_t step_count,
            const ExplorationConfig& config);

}  // namespace cher
