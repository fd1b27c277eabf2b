#pragma once

#include "cher/common.hpp"
#include "cher/hierarchy.hpp"
#include "cher/rng.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace cher {

struct StepResult {
  Vec observation;
  double reward = 0.0;
  bool terminal = false;   // true end of the task (bootstrapping stops)
  bool truncated = false;  // horizon reached
  bool done() const { return terminal || truncated; }
};

/// Episodic environment with a continuous box action space.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual int observation_dim() const = 0;
  virtual Bounds action_bounds() const = 0;
  virtual int horizon() const = 0;

  virtual Vec reset(Rng& rng) = 0;
  virtual StepResult step(const Vec& action) = 0;
  // Observation of the current state (e.g. after set_target).
  virtual Vec observe() const = 0;

  // Goal sub-space and manager reward scale used when no config overrides them.
  virtual GoalSpec default_goal_spec() const = 0;
  virtual double default_reward_scale() const { return 1.0; }

  // Fixed targets reported separately by evaluation (empty when the task has none).
  virtual std::vector<Vec> evaluation_targets() const { return {}; }
  // Overrides the target drawn by the last reset().
  virtual void set_target(const Vec& /*target*/) {}
  virtual bool has_success_metric() const { return false; }
  virtual bool success() const { return false; }

  virtual void write_trajectory_header(std::ostream& out) const = 0;
  virtual void write_trajectory_rows(std::ostream& out, int step, double reward) const = 0;
};

}  // namespace cher
