#include "cher/learner.hpp"

#include "cher/loss.hpp"

#include <algorithm>
#include <cmath>

namespace cher {

void UpdateSchedule::validate() const {
  if (worker_critic_every < 1 || worker_actor_every < 1 || manager_critic_every < 1 ||
      manager_actor_every < 1)
    throw ValidationError("update periods must be >= 1");
  if (worker_actor_every % worker_critic_every != 0 ||
      manager_actor_every % manager_critic_every != 0)
    throw ValidationError("actor update periods must be multiples of the critic periods");
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in (0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in (0, 1]");
  if (policy_noise < 0.0 || noise_clip < 0.0)
    throw ValidationError("policy_noise and noise_clip must be >= 0");
}

void LagrangeState::validate() const {
  if (!(lambda_max > 0.0)) throw ValidationError("lambda_max must be > 0");
  if (!(lambda_lr > 0.0)) throw ValidationError("lambda_lr must be > 0");
  if (!(lambda >= 0.0 && lambda <= lambda_max))
    throw ValidationError("lambda must lie in [0, lambda_max]");
}

Agent Agent::create(Policies policies, const OptimConfig& optim) {
  Agent a;
  const AdamConfig actor{optim.actor_lr};
  const AdamConfig critic{optim.critic_lr};
  a.policies = std::move(policies);
  const auto& p = a.policies;
  if (p.hierarchical()) {
    a.manager_actor_opt = AdamState(p.manager_actor.num_params(), actor);
    a.manager_critic1_opt = AdamState(p.manager_critic1.num_params(), critic);
    a.manager_critic2_opt = AdamState(p.manager_critic2.num_params(), critic);
  }
  a.worker_actor_opt = AdamState(p.worker_actor.num_params(), actor);
  a.worker_critic1_opt = AdamState(p.worker_critic1.num_params(), critic);
  a.worker_critic2_opt = AdamState(p.worker_critic2.num_params(), critic);
  return a;
}

namespace {

Vec min_rows(const Mat& a, const Mat& b) { return a.row(0).cwiseMin(b.row(0)).transpose(); }

void check_finite(const Vec& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) throw NumericError(std::string(what) + " is not finite", i);
}

// One Huber step on a critic; returns the batch-mean loss.
double fit_critic(Mlp& critic, AdamState& opt, const Mat& inputs, const Vec& targets) {
  const auto n = static_cast<double>(targets.size());
  const Mlp::Trace tr = critic.trace(inputs);
  LossValue l = huber(tr.output.row(0).transpose(), targets);
  if (!std::isfinite(l.loss)) throw NumericError("critic loss is not finite");
  Mat upstream = (l.grad / n).transpose();
  BatchGradient g = critic.backward(tr, upstream);
  adam_step(critic.mutable_params(), g.param_grads, opt);
  return l.loss / n;
}

// Ascent gradient of mean critic(prefix; actor(actor_in)) through the actor.
// The critic input is [prefix; actor output].
Vec actor_through_critic(const Mlp& actor, const Mlp& critic, const Mat& actor_in,
                         const Mat& prefix) {
  const auto n = static_cast<double>(actor_in.cols());
  const Mlp::Trace at = actor.trace(actor_in);
  const Mlp::Trace ct = critic.trace(vstack(prefix, at.output));
  const BatchGradient cg = critic.backward(ct, Mat::Constant(1, actor_in.cols(), 1.0 / n));
  const Mat dq_da = cg.input_grads.bottomRows(actor.output_dim());
  return actor.backward(at, dq_da).param_grads;
}

}  // namespace

Mat smoothing_noise(const Bounds& range, Eigen::Index n, const UpdateSchedule& schedule, Rng& rng) {
  const Vec half = range.half_width();
  Mat noise(range.dim(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < range.dim(); ++i) {
      const double limit = schedule.noise_clip * half[i];
      const double e = schedule.policy_noise > 0.0
                           ? rng.normal(0.0, schedule.policy_noise * half[i])
                           : 0.0;
      noise(i, j) = std::clamp(e, -limit, limit);
    }
  }
  return noise;
}

Vec worker_critic_targets(const Policies& p, const WorkerBatch& b, const UpdateSchedule& schedule,
                          const Mat& noise) {
  const Bounds range = p.worker_actor.output_bounds();
  const Mat next_in = vstack(b.next_states, b.next_goals);
  Mat next_actions = p.worker_actor_target.forward_batch(next_in) + noise;
  for (Eigen::Index j = 0; j < next_actions.cols(); ++j)
    next_actions.col(j) = range.clip(next_actions.col(j));
  const Mat critic_in = vstack(b.next_states, b.next_goals, next_actions);
  const Vec q_next = min_rows(p.worker_critic1_target.forward_batch(critic_in),
                              p.worker_critic2_target.forward_batch(critic_in));
  Vec y = b.rewards.array() + schedule.gamma * (1.0 - b.dones.array()) * q_next.array();
  check_finite(y, "worker critic target");
  return y;
}

double update_worker_critic(Agent& agent, const WorkerBatch& batch, const UpdateSchedule& schedule,
                            Rng& noise_rng) {
  auto& p = agent.policies;
  const Mat noise =
      smoothing_noise(p.worker_actor.output_bounds(), batch.size(), schedule, noise_rng);
  const Vec y = worker_critic_targets(p, batch, schedule, noise);
  const Mat in = vstack(batch.states, batch.goals, batch.actions);
  const double l1 = fit_critic(p.worker_critic1, agent.worker_critic1_opt, in, y);
  const double l2 = fit_critic(p.worker_critic2, agent.worker_critic2_opt, in, y);
  return 0.5 * (l1 + l2);
}

Vec worker_actor_gradient(const Policies& p, const WorkerBatch& b) {
  return actor_through_critic(p.worker_actor, p.worker_critic1, vstack(b.states, b.goals),
                              vstack(b.states, b.goals));
}

void update_worker_actor(Agent& agent, const WorkerBatch& batch) {
  const Vec g = worker_actor_gradient(agent.policies, batch);
  adam_step(agent.policies.worker_actor.mutable_params(), -g, agent.worker_actor_opt);
}

void update_worker_targets(Policies& p, double tau) {
  polyak_update(p.worker_actor_target, p.worker_actor, tau);
  polyak_update(p.worker_critic1_target, p.worker_critic1, tau);
  polyak_update(p.worker_critic2_target, p.worker_critic2, tau);
}

Vec manager_critic_targets(const Policies& p, const ManagerBatch& b, const UpdateSchedule& schedule,
                           const Mat& noise) {
  const Bounds range = p.manager_actor.output_bounds();
  Mat next_goals = p.manager_actor_target.forward_batch(b.next_states) + noise;
  for (Eigen::Index j = 0; j < next_goals.cols(); ++j)
    next_goals.col(j) = range.clip(next_goals.col(j));
  const Mat critic_in = vstack(b.next_states, next_goals);
  const Vec q_next = min_rows(p.manager_critic1_target.forward_batch(critic_in),
                              p.manager_critic2_target.forward_batch(critic_in));
  Vec y = b.rewards.array() + schedule.gamma * (1.0 - b.dones.array()) * q_next.array();
  check_finite(y, "manager critic target");
  return y;
}

double update_manager_critic(Agent& agent, const ManagerBatch& batch,
                             const UpdateSchedule& schedule, Rng& noise_rng) {
  auto& p = agent.policies;
  const Mat noise =
      smoothing_noise(p.manager_actor.output_bounds(), batch.size(), schedule, noise_rng);
  const Vec y = manager_critic_targets(p, batch, schedule, noise);
  const Mat in = vstack(batch.states, batch.goals);
  const double l1 = fit_critic(p.manager_critic1, agent.manager_critic1_opt, in, y);
  const double l2 = fit_critic(p.manager_critic2, agent.manager_critic2_opt, in, y);
  return 0.5 * (l1 + l2);
}

Vec manager_dpg_gradient(const Policies& p, const ManagerBatch& b) {
  return actor_through_critic(p.manager_actor, p.manager_critic1, b.states, b.states);
}

Vec cooperative_term(const Policies& p, const GoalSpec& spec, const ManagerBatch& b) {
  const Eigen::Index n = b.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Mlp::Trace mt = p.manager_actor.trace(b.states);
  const Mat& goals = mt.output;

  // grad_a Q_w1(s, g0, a) at a0 = pi_w(s, g0), with g0 held fixed.
  const Mat worker_in = vstack(b.states, goals);
  const Mlp::Trace wt = p.worker_actor.trace(worker_in);
  const Mlp::Trace qt = p.worker_critic1.trace(vstack(b.states, goals, wt.output));
  const BatchGradient qg = p.worker_critic1.backward(qt, Mat::Ones(1, n));
  const Mat dq_da = qg.input_grads.bottomRows(p.worker_actor.output_dim());

  // (d pi_w / d g)^T dq_da: the goal rows of the worker actor's input gradient.
  const BatchGradient wg = p.worker_actor.backward(wt, dq_da);
  Mat cotangent = wg.input_grads.bottomRows(spec.dim());

  for (Eigen::Index j = 0; j < n; ++j) {
    cotangent.col(j) += intrinsic_reward_goal_gradient(spec, b.states.col(j), goals.col(j),
                                                       b.first_next_states.col(j));
  }
  return p.manager_actor.backward(mt, cotangent * inv_n).param_grads;
}

Vec cooperative_manager_gradient(const Policies& p, const GoalSpec& spec, const ManagerBatch& b,
                                 double lambda) {
  if (!(lambda >= 0.0)) throw ValidationError("cooperative gradient needs lambda >= 0");
  Vec g = manager_dpg_gradient(p, b);
  if (lambda == 0.0) return g;
  g += lambda * cooperative_term(p, spec, b);
  return g;
}

void update_manager_actor(Agent& agent, const GoalSpec& spec, const ManagerBatch& batch,
                          double lambda) {
  const Vec g = cooperative_manager_gradient(agent.policies, spec, batch, lambda);
  adam_step(agent.policies.manager_actor.mutable_params(), -g, agent.manager_actor_opt);
}

void update_manager_targets(Policies& p, double tau) {
  polyak_update(p.manager_actor_target, p.manager_actor, tau);
  polyak_update(p.manager_critic1_target, p.manager_critic1, tau);
  polyak_update(p.manager_critic2_target, p.manager_critic2, tau);
}

ManagerUpdateStats update_manager(Agent& agent, const LagrangeState& lagrange,
                                  const ManagerBatch& batch, const UpdateSchedule& schedule,
                                  const GoalSpec& spec, Rng& noise_rng, bool update_actor) {
  ManagerUpdateStats stats;
  stats.critic_loss = update_manager_critic(agent, batch, schedule, noise_rng);
  if (update_actor) {
    update_manager_actor(agent, spec, batch, lagrange.lambda);
    update_manager_targets(agent.policies, schedule.tau);
  }
  stats.q_w_mean = worker_value_mean(agent.policies, batch);
  return stats;
}

double worker_value_mean(const Policies& p, const ManagerBatch& b) {
  const Mat goals = p.manager_actor.forward_batch(b.states);
  const Mat actions = p.worker_actor.forward_batch(vstack(b.states, goals));
  return p.worker_critic1.forward_batch(vstack(b.states, goals, actions)).mean();
}

LagrangeState update_lambda(const LagrangeState& state, double q_w) {
  if (!state.delta_set) throw ValidationError("update_lambda requires delta to be set");
  LagrangeState next = state;
  next.lambda = std::clamp(state.lambda + state.lambda_lr * (state.delta - q_w), 0.0,
                           state.lambda_max);
  return next;
}

double cooperation_ratio(double delta, double q_hrl, double q_max) {
  if (q_hrl == q_max) throw NumericError("cooperation ratio undefined when q_hrl == q_max");
  return (q_hrl - delta) / (q_hrl - q_max);
}

double delta_for_cooperation_ratio(double ratio, double q_hrl, double q_max) {
  return q_hrl - ratio * (q_hrl - q_max);
}

}  // namespace cher
