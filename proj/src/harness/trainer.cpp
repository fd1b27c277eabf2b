#include "cher/harness.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace cher {
namespace {

GoalSpec empty_goal_spec() {
  GoalSpec g;
  g.scale = Vec(0);
  g.offset = Vec(0);
  return g;
}

GoalSpec run_goal_spec(const RunConfig& c) {
  return c.hierarchical() ? c.hierarchy.goal : empty_goal_spec();
}

int run_meta_period(const RunConfig& c) { return c.hierarchical() ? c.hierarchy.meta_period : 1; }

// Capacity is configured in transitions; the buffer holds segments.
std::size_t segment_capacity(const RunConfig& c) {
  const auto k = static_cast<std::size_t>(run_meta_period(c));
  return std::max<std::size_t>(1, (c.replay_capacity + k - 1) / k);
}

std::string target_label(const Vec& t) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < t.size(); ++i) out << (i ? "," : "") << t[i];
  return out.str();
}

}  // namespace

EpisodeOutcome run_episode(const Policies& policies, const HierarchyConfig& hierarchy,
                           Environment& env, Rng& rng, const std::optional<Vec>& target,
                           std::ostream* trajectory) {
  EpisodeOutcome out;
  Vec obs = env.reset(rng);
  if (target) {
    env.set_target(*target);
    obs = env.observe();
  }
  const bool hier = policies.hierarchical();
  const GoalSpec& spec = hierarchy.goal;
  Vec goal(0);
  if (trajectory) env.write_trajectory_rows(*trajectory, 0, 0.0);
  for (int t = 0;; ++t) {
    if (hier && t % hierarchy.meta_period == 0) goal = assign_goal(policies, obs);
    const StepResult r = env.step(worker_action(policies, obs, goal));
    if (hier) {
      out.worker_intrinsic_return += intrinsic_reward(spec, obs, goal, r.observation);
      goal = transition_goal(spec, obs, goal, r.observation);
    }
    out.episode_return += r.reward;
    ++out.length;
    obs = r.observation;
    if (trajectory) env.write_trajectory_rows(*trajectory, out.length, r.reward);
    if (r.done()) break;
  }
  out.success = env.has_success_metric() && env.success();
  return out;
}

nlohmann::json EvalSummary::to_json() const {
  nlohmann::json j = {{"episodes", episodes},
                      {"mean_return", mean_return},
                      {"mean_intrinsic_return", mean_intrinsic_return}};
  if (success_rate) j["success_rate"] = *success_rate;
  for (const auto& [label, rate] : target_success) j["target_success"][label] = rate;
  return j;
}

EvalSummary evaluate(const Policies& policies, const HierarchyConfig& hierarchy,
                     Environment& env, int n_episodes, std::uint64_t seed,
                     std::ostream* trajectory) {
  if (n_episodes < 1) throw ValidationError("evaluation needs at least one episode");
  const int state_dim = env.observation_dim();
  const int goal_dim = policies.hierarchical() ? hierarchy.goal.dim() : 0;
  if (policies.worker_actor.input_dim() != state_dim + goal_dim ||
      policies.action_dim() != env.action_bounds().dim() ||
      (policies.hierarchical() && policies.manager_actor.input_dim() != state_dim))
    throw ValidationError("policy shapes do not match environment '" + env.id() + "'");

  Rng rng = Rng::stream(seed, "eval");
  EvalSummary s;
  int successes = 0;
  if (trajectory) env.write_trajectory_header(*trajectory);
  auto run = [&](const std::optional<Vec>& target) {
    const EpisodeOutcome o = run_episode(policies, hierarchy, env, rng, target,
                                         s.episodes == 0 ? trajectory : nullptr);
    ++s.episodes;
    s.mean_return += o.episode_return;
    s.mean_intrinsic_return += o.worker_intrinsic_return;
    successes += o.success ? 1 : 0;
    return o.success;
  };
  const auto targets = env.evaluation_targets();
  if (targets.empty()) {
    for (int e = 0; e < n_episodes; ++e) run(std::nullopt);
  } else {
    for (const Vec& t : targets) {
      int hits = 0;
      for (int e = 0; e < n_episodes; ++e) hits += run(t) ? 1 : 0;
      s.target_success.emplace_back(target_label(t), static_cast<double>(hits) / n_episodes);
    }
  }
  s.mean_return /= s.episodes;
  s.mean_intrinsic_return /= s.episodes;
  if (env.has_success_metric()) s.success_rate = static_cast<double>(successes) / s.episodes;
  return s;
}

Checkpoint make_checkpoint(const RunConfig& config, const Policies& policies,
                           const LagrangeState& lagrange, std::int64_t step) {
  Checkpoint c;
  c.meta = {{"config", to_json(config)},
            {"step", step},
            {"lambda", lagrange.lambda},
            {"delta", lagrange.delta_set ? nlohmann::json(lagrange.delta) : nlohmann::json()}};
  Policies::for_each(policies, [&](const char* name, const Mlp& net) {
    if (!net.empty()) c.networks.emplace_back(name, net);
  });
  return c;
}

Policies policies_from_checkpoint(const Checkpoint& ckpt) {
  Policies p;
  Policies::for_each(p, [&](const char* name, Mlp& net) {
    for (const auto& [n, stored] : ckpt.networks)
      if (n == name) net = stored;
  });
  if (p.worker_actor.empty()) throw ValidationError("checkpoint holds no worker actor");
  return p;
}

EvalSummary evaluate(const Checkpoint& ckpt, int n_episodes, std::uint64_t seed,
                     const std::optional<EnvConfig>& env_override, std::ostream* trajectory) {
  if (!ckpt.meta.contains("config")) throw ValidationError("checkpoint has no run config");
  RunConfig config = parse_run_config(ckpt.meta.at("config"));
  if (env_override) config.env = *env_override;
  const Policies p = policies_from_checkpoint(ckpt);
  auto env = make_environment(config.env);
  return evaluate(p, config.hierarchy, *env, n_episodes, seed, trajectory);
}

Trainer::Trainer(RunConfig config)
    : config_((config.validate(), std::move(config))),
      spec_(run_goal_spec(config_)),
      env_(make_environment(config_.env)),
      lagrange_(config_.initial_lagrange()),
      buffer_(segment_capacity(config_), spec_, run_meta_period(config_)),
      env_rng_(Rng::stream(config_.seed, "env")),
      explore_rng_(Rng::stream(config_.seed, "exploration")),
      replay_rng_(Rng::stream(config_.seed, "replay")),
      relabel_rng_(Rng::stream(config_.seed, "relabel")),
      smoothing_rng_(Rng::stream(config_.seed, "smoothing")),
      hac_rng_(Rng::stream(config_.seed, "subgoal_test")) {
  Rng init = Rng::stream(config_.seed, "init");
  const int sd = env_->observation_dim();
  Policies p = config_.hierarchical()
                   ? Policies::create(sd, env_->action_bounds(), spec_, config_.hidden, init)
                   : Policies::create_flat(sd, env_->action_bounds(), config_.hidden, init);
  agent_ = Agent::create(std::move(p), config_.optim);
}

Checkpoint Trainer::checkpoint() const {
  return make_checkpoint(config_, agent_.policies, lagrange_, env_steps_);
}

void Trainer::begin_segment() {
  seg_states_.assign(1, obs_);
  seg_actions_.clear();
  seg_rewards_.clear();
  testing_subgoal_ = false;
  if (!config_.hierarchical()) {
    goal_ = initial_goal_ = Vec(0);
    return;
  }
  Vec g = assign_goal(agent_.policies, obs_);
  if (config_.algorithm == Algorithm::Hac && env_steps_ >= config_.exploration.warmup_steps &&
      subgoal_test_gate(hac_rng_, config_.hac.subgoal_test_rate)) {
    testing_subgoal_ = true;
  } else {
    g = explore(g, spec_.bounds(), explore_rng_, env_steps_, config_.exploration);
  }
  goal_ = initial_goal_ = g;
}

void Trainer::close_segment(bool terminal) {
  const double scale = config_.hierarchy.manager_reward_scale;
  MetaSegment seg = make_segment(spec_, scale, std::move(seg_states_), initial_goal_,
                                 std::move(seg_actions_), seg_rewards_, terminal);
  if (!config_.hierarchical()) {
    seg.worker_rewards[0] = scale * seg_rewards_[0];
  } else if (testing_subgoal_) {
    seg.subgoal_failed =
        (achieved_goal(seg, spec_) - initial_goal_).norm() > config_.hac.goal_tolerance;
  }
  buffer_.store(std::move(seg));
  seg_states_.clear();
  seg_actions_.clear();
  seg_rewards_.clear();
}

void Trainer::relabel(ManagerBatch& batch) {
  const auto& p = agent_.policies;
  for (Eigen::Index j = 0; j < batch.size(); ++j) {
    const MetaSegment& seg = *batch.segments[static_cast<std::size_t>(j)];
    if (config_.algorithm == Algorithm::Hiro) {
      batch.goals.col(j) = hiro_relabel(seg, spec_, p.worker_actor, config_.hiro_candidates,
                                        relabel_rng_);
    } else if (config_.algorithm == Algorithm::Hac) {
      if (seg.subgoal_failed) {
        // missed subgoal test: keep the proposed goal, penalize it
        batch.rewards[j] -= static_cast<double>(config_.hierarchy.meta_period);
      } else {
        batch.goals.col(j) = spec_.bounds().clip(achieved_goal(seg, spec_));
      }
    }
  }
}

void Trainer::run_updates() {
  if (env_steps_ < std::max<std::int64_t>(config_.exploration.warmup_steps, config_.batch_size))
    return;
  const std::int64_t t = ++train_steps_;
  const auto& sc = config_.schedule;
  const auto n = static_cast<std::size_t>(config_.batch_size);
  if (t % sc.worker_critic_every == 0) {
    const HindsightSampling hindsight{config_.hac.hindsight_probability};
    const WorkerBatch wb = sample_worker_batch(
        buffer_, n, replay_rng_, config_.algorithm == Algorithm::Hac ? &hindsight : nullptr);
    update_worker_critic(agent_, wb, sc, smoothing_rng_);
    if (t % sc.worker_actor_every == 0) {
      update_worker_actor(agent_, wb);
      update_worker_targets(agent_.policies, sc.tau);
    }
  }
  if (config_.hierarchical() && t % sc.manager_critic_every == 0) {
    ManagerBatch mb = sample_manager_batch(buffer_, n, replay_rng_);
    relabel(mb);
    const ManagerUpdateStats stats = update_manager(agent_, lagrange_, mb, sc, spec_,
                                                    smoothing_rng_,
                                                    t % sc.manager_actor_every == 0);
    if (!std::isfinite(stats.q_w_mean)) throw NumericError("worker value estimate is not finite");
    last_q_w_ = stats.q_w_mean;
    if (lagrange_.delta_set) {
      lagrange_ = update_lambda(lagrange_, stats.q_w_mean);
      if (lambda_hook_) lambda_hook_(t, env_steps_, lagrange_, stats.q_w_mean);
    }
  }
}

std::optional<EpisodeOutcome> Trainer::step() {
  if (!episode_active_) {
    obs_ = env_->reset(env_rng_);
    episode_ = {};
    episode_active_ = true;
  }
  if (seg_actions_.empty()) begin_segment();

  Vec a = worker_action(agent_.policies, obs_, goal_);
  if (!testing_subgoal_)
    a = explore(a, env_->action_bounds(), explore_rng_, env_steps_, config_.exploration);
  const StepResult r = env_->step(a);

  seg_actions_.push_back(std::move(a));
  seg_rewards_.push_back(r.reward);
  seg_states_.push_back(r.observation);
  if (config_.hierarchical()) {
    episode_.worker_intrinsic_return += intrinsic_reward(spec_, obs_, goal_, r.observation);
    goal_ = transition_goal(spec_, obs_, goal_, r.observation);
  }
  episode_.episode_return += r.reward;
  ++episode_.length;
  obs_ = r.observation;
  ++env_steps_;

  if (seg_actions_.size() == static_cast<std::size_t>(run_meta_period(config_)) || r.done())
    close_segment(r.terminal);
  run_updates();

  if (!r.done()) return std::nullopt;
  episode_.success = env_->has_success_metric() && env_->success();
  episode_active_ = false;
  return episode_;
}

}  // namespace cher
