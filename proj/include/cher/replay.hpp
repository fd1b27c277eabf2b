#pragma once

#include "cher/checkpoint.hpp"
#include "cher/common.hpp"
#include "cher/hierarchy.hpp"
#include "cher/rng.hpp"

#include <cstddef>
#include <deque>
#include <vector>

namespace cher {

/// One manager decision span: up to k worker transitions that share the
/// manager's goal (chained through transition_goal), plus the manager-level
/// transition (states.front(), initial_goal, manager_reward, states.back()).
struct MetaSegment {
  std::vector<Vec> states;  // length() + 1 observations
  std::vector<Vec> goals;   // goal in force at each step
  std::vector<Vec> actions;
  std::vector<double> worker_rewards;
  double manager_reward = 0.0;  // scaled sum of environment rewards over the span
  bool done = false;            // environment terminated inside the span
  bool subgoal_failed = false;  // subgoal test executed and missed (HAC only)
  Vec initial_goal;

  std::size_t length() const { return actions.size(); }
};

// Builds a segment from a rollout span: chains goals from initial_goal,
// recomputes intrinsic rewards and sums the scaled environment reward.
MetaSegment make_segment(const GoalSpec& spec, double manager_reward_scale,
                         std::vector<Vec> states, const Vec& initial_goal,
                         std::vector<Vec> actions, const std::vector<double>& env_rewards,
                         bool done);

// Throws ValidationError when lengths disagree, the span exceeds the meta
// period, values are non-finite or the goals break the transition law.
void validate_segment(const MetaSegment& segment, const GoalSpec& spec, int meta_period);

struct WorkerTransition {
  Vec state, goal, action;
  double reward = 0.0;
  Vec next_state, next_goal;
  bool done = false;
};

// Column-per-sample worker transitions.
struct WorkerBatch {
  Mat states, goals, actions;
  Vec rewards;
  Mat next_states, next_goals;
  Vec dones;

  Eigen::Index size() const { return rewards.size(); }
};

// Column-per-sample manager transitions. first_next_states holds s_1 of each
// span, the observation that followed the manager's first worker action.
struct ManagerBatch {
  Mat states, goals;
  Vec rewards;
  Mat next_states;
  Vec dones;
  Mat first_next_states;
  std::vector<const MetaSegment*> segments;

  Eigen::Index size() const { return rewards.size(); }
};

/// FIFO ring of meta segments.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, GoalSpec spec, int meta_period);

  void store(MetaSegment segment);

  std::size_t size() const { return segments_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return segments_.empty(); }
  // Index 0 is the oldest segment.
  const MetaSegment& at(std::size_t i) const { return segments_.at(i); }
  const GoalSpec& goal_spec() const { return spec_; }
  int meta_period() const { return meta_period_; }

  // (segment, step) pairs drawn uniformly over all stored worker transitions.
  std::vector<std::pair<std::size_t, std::size_t>> sample_transition_indices(std::size_t n,
                                                                             Rng& rng) const;
  std::vector<std::size_t> sample_segment_indices(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  GoalSpec spec_;
  int meta_period_;
  std::deque<MetaSegment> segments_;
};

struct HindsightSampling {
  double probability = 0.5;  // chance a sampled transition is replaced by its hindsight version
};

WorkerBatch sample_worker_batch(const ReplayBuffer& buffer, std::size_t n, Rng& rng,
                                const HindsightSampling* hindsight = nullptr);
ManagerBatch sample_manager_batch(const ReplayBuffer& buffer, std::size_t n, Rng& rng);

WorkerBatch to_batch(const std::vector<WorkerTransition>& transitions);

// HIRO-style candidate goals: the stored goal, the goal implied by the span's
// displacement, then Gaussian samples (std = 0.5 * goal scale) around the
// latter, all clipped to the goal box. Returns min(num_candidates, ...) goals.
std::vector<Vec> hiro_candidates(const MetaSegment& segment, const GoalSpec& spec,
                                 int num_candidates, Rng& rng);
// Sum of squared action errors when the worker replays the span under a goal.
double hiro_score(const MetaSegment& segment, const GoalSpec& spec, const Mlp& worker_actor,
                  const Vec& candidate);
// Index of the lowest-scoring candidate; ties keep the lowest index.
std::size_t hiro_select(const MetaSegment& segment, const GoalSpec& spec,
                        const Mlp& worker_actor, const std::vector<Vec>& candidates);
Vec hiro_relabel(const MetaSegment& segment, const GoalSpec& spec, const Mlp& worker_actor,
                 int num_candidates, Rng& rng);

// The goal an observed span achieved, as seen from its first state.
Vec achieved_goal(const MetaSegment& segment, const GoalSpec& spec);

// Worker transitions relabeled with the goals the span actually reached:
// g_i = s_k - s_i (egocentric) or s_k (absolute) on the goal coordinates.
std::vector<WorkerTransition> hac_hindsight(const MetaSegment& segment, const GoalSpec& spec);

bool subgoal_test_gate(Rng& rng, double rate);

Checkpoint dump_replay(const ReplayBuffer& buffer);
ReplayBuffer restore_replay(const Checkpoint& ckpt);

}  // namespace cher
