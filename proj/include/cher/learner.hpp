#pragma once

#include "cher/common.hpp"
#include "cher/hierarchy.hpp"
#include "cher/optim.hpp"
#include "cher/replay.hpp"
#include "cher/rng.hpp"

namespace cher {

struct UpdateSchedule {
  int worker_critic_every = 1;
  int worker_actor_every = 2;
  int manager_critic_every = 10;
  int manager_actor_every = 20;
  double tau = 5e-3;
  double gamma = 0.99;
  // Target-policy smoothing, as fractions of the action (or goal) half-width.
  double policy_noise = 0.2;
  double noise_clip = 0.5;

  void validate() const;
};

struct LagrangeState {
  double lambda = 0.0;
  double delta = 0.0;
  bool delta_set = false;
  double lambda_lr = 1e-4;
  double lambda_max = 10.0;

  void validate() const;
};

struct OptimConfig {
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
};

/// Policies plus one Adam state per trained network.
struct Agent {
  Policies policies;
  AdamState manager_actor_opt, manager_critic1_opt, manager_critic2_opt;
  AdamState worker_actor_opt, worker_critic1_opt, worker_critic2_opt;

  static Agent create(Policies policies, const OptimConfig& optim);
};

// ---- worker level -------------------------------------------------------

// Clipped Gaussian smoothing noise, one column per sample.
Mat smoothing_noise(const Bounds& range, Eigen::Index n, const UpdateSchedule& schedule, Rng& rng);

// r + gamma * (1 - done) * min(Q1', Q2')(s', g', clip(pi'(s', g') + noise)).
Vec worker_critic_targets(const Policies& policies, const WorkerBatch& batch,
                          const UpdateSchedule& schedule, const Mat& noise);

// Huber regression of both worker critics; returns the mean of their losses.
double update_worker_critic(Agent& agent, const WorkerBatch& batch, const UpdateSchedule& schedule,
                            Rng& noise_rng);

// Ascent direction of mean Q1(s, g, pi_w(s, g)) with respect to the worker actor parameters.
Vec worker_actor_gradient(const Policies& policies, const WorkerBatch& batch);
void update_worker_actor(Agent& agent, const WorkerBatch& batch);
void update_worker_targets(Policies& policies, double tau);

// ---- manager level ------------------------------------------------------

// R + gamma * (1 - done) * min(Q1', Q2')(s_k, clip(pi_m'(s_k) + noise)).
Vec manager_critic_targets(const Policies& policies, const ManagerBatch& batch,
                           const UpdateSchedule& schedule, const Mat& noise);
double update_manager_critic(Agent& agent, const ManagerBatch& batch,
                             const UpdateSchedule& schedule, Rng& noise_rng);

// Plain deterministic policy gradient: mean grad Q_m1(s, pi_m(s)).
Vec manager_dpg_gradient(const Policies& policies, const ManagerBatch& batch);

/// The worker-return term of the cooperative manager gradient.
///
/// For every batch state s with g0 = pi_m(s) and a0 = pi_w(s, g0) the
/// goal cotangent is
///   grad_g r_w(s, g, s1) + (d pi_w(s, g) / d g)^T grad_a Q_w1(s, g0, a)|a=a0
/// at g = g0, where s1 is the observation that followed s. It is chained
/// through the manager actor and averaged over the batch.
Vec cooperative_term(const Policies& policies, const GoalSpec& spec, const ManagerBatch& batch);

// manager_dpg_gradient + lambda * cooperative_term. With lambda == 0 the
// cooperative term is not evaluated at all, so the result is bit-identical
// to the plain gradient.
Vec cooperative_manager_gradient(const Policies& policies, const GoalSpec& spec,
                                 const ManagerBatch& batch, double lambda);

void update_manager_actor(Agent& agent, const GoalSpec& spec, const ManagerBatch& batch,
                          double lambda);
void update_manager_targets(Policies& policies, double tau);

struct ManagerUpdateStats {
  double critic_loss = 0.0;
  double q_w_mean = 0.0;
};

// Critic step always; actor and target step when update_actor is set.
ManagerUpdateStats update_manager(Agent& agent, const LagrangeState& lagrange,
                                  const ManagerBatch& batch, const UpdateSchedule& schedule,
                                  const GoalSpec& spec, Rng& noise_rng, bool update_actor);

// Mean of Q_w1(s0, g0, pi_w(s0, g0)) with g0 = pi_m(s0) over the manager batch.
double worker_value_mean(const Policies& policies, const ManagerBatch& batch);

// lambda <- clamp(lambda + lr * (delta - q_w), 0, lambda_max).
LagrangeState update_lambda(const LagrangeState& state, double q_w);

// (q_hrl - delta) / (q_hrl - q_max); NumericError when q_hrl == q_max.
double cooperation_ratio(double delta, double q_hrl, double q_max);
// Inverse of cooperation_ratio in delta.
double delta_for_cooperation_ratio(double ratio, double q_hrl, double q_max);

}  // namespace cher
