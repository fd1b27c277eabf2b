#include "cher/hierarchy.hpp"

#include <cmath>

namespace cher {

std::string to_string(GoalMode mode) {
  return mode == GoalMode::Absolute ? "absolute" : "egocentric";
}

GoalMode goal_mode_from_string(const std::string& name) {
  if (name == "absolute") return GoalMode::Absolute;
  if (name == "egocentric") return GoalMode::Egocentric;
  throw ValidationError("unknown goal mode '" + name + "' (expected absolute|egocentric)");
}

void GoalSpec::validate() const {
  if (scale.size() != dim() || offset.size() != dim())
    throw ValidationError("goal spec: scale/offset length must equal the number of state indices");
  for (int idx : state_indices)
    if (idx < 0) throw ValidationError("goal spec: negative state index");
  if ((scale.array() <= 0.0).any()) throw ValidationError("goal spec: scale must be positive");
}

void GoalSpec::check_state(const Vec& state) const {
  for (int idx : state_indices)
    require_shape(idx < state.size(), "state of length " + std::to_string(state.size()) +
                                          " has no goal coordinate " + std::to_string(idx));
}

Vec GoalSpec::select(const Vec& state) const {
  check_state(state);
  Vec out(dim());
  for (int i = 0; i < dim(); ++i) out[i] = state[state_indices[i]];
  return out;
}

void HierarchyConfig::validate() const {
  if (meta_period < 1) throw ValidationError("meta_period must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in (0, 1]");
  if (!(manager_reward_scale > 0.0)) throw ValidationError("manager_reward_scale must be > 0");
  goal.validate();
}

namespace {

std::vector<int> with_hidden(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

Mlp actor(int in, const std::vector<int>& hidden, const Bounds& range, Rng& rng) {
  return Mlp::fan_in_init(with_hidden(in, hidden, static_cast<int>(range.dim())),
                          OutputActivation::Tanh, range.half_width(), range.center(), rng);
}

Mlp critic(int in, const std::vector<int>& hidden, Rng& rng) {
  return Mlp::fan_in_init(with_hidden(in, hidden, 1), OutputActivation::Identity, Vec::Ones(1),
                          Vec::Zero(1), rng);
}

}  // namespace

int Policies::state_dim() const {
  return hierarchical() ? manager_actor.input_dim() : worker_actor.input_dim();
}

int Policies::goal_dim() const { return hierarchical() ? manager_actor.output_dim() : 0; }

Policies Policies::create(int state_dim, const Bounds& action_bounds, const GoalSpec& goal,
                          const std::vector<int>& hidden, Rng& rng) {
  goal.validate();
  require_shape(state_dim > 0 && action_bounds.dim() > 0, "policies need positive dimensions");
  const int g = goal.dim();
  const int a = static_cast<int>(action_bounds.dim());
  Policies p;
  p.manager_actor = actor(state_dim, hidden, goal.bounds(), rng);
  p.manager_critic1 = critic(state_dim + g, hidden, rng);
  p.manager_critic2 = critic(state_dim + g, hidden, rng);
  p.worker_actor = actor(state_dim + g, hidden, action_bounds, rng);
  p.worker_critic1 = critic(state_dim + g + a, hidden, rng);
  p.worker_critic2 = critic(state_dim + g + a, hidden, rng);
  p.manager_actor_target = p.manager_actor;
  p.manager_critic1_target = p.manager_critic1;
  p.manager_critic2_target = p.manager_critic2;
  p.worker_actor_target = p.worker_actor;
  p.worker_critic1_target = p.worker_critic1;
  p.worker_critic2_target = p.worker_critic2;
  return p;
}

Policies Policies::create_flat(int state_dim, const Bounds& action_bounds,
                               const std::vector<int>& hidden, Rng& rng) {
  require_shape(state_dim > 0 && action_bounds.dim() > 0, "policies need positive dimensions");
  const int a = static_cast<int>(action_bounds.dim());
  Policies p;
  p.worker_actor = actor(state_dim, hidden, action_bounds, rng);
  p.worker_critic1 = critic(state_dim + a, hidden, rng);
  p.worker_critic2 = critic(state_dim + a, hidden, rng);
  p.worker_actor_target = p.worker_actor;
  p.worker_critic1_target = p.worker_critic1;
  p.worker_critic2_target = p.worker_critic2;
  return p;
}

Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

Vec concat(const Vec& a, const Vec& b, const Vec& c) {
  Vec out(a.size() + b.size() + c.size());
  out << a, b, c;
  return out;
}

Mat vstack(const Mat& a, const Mat& b) {
  require_shape(a.cols() == b.cols(), "vstack: column counts differ");
  Mat out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

Mat vstack(const Mat& a, const Mat& b, const Mat& c) {
  require_shape(a.cols() == b.cols() && b.cols() == c.cols(), "vstack: column counts differ");
  Mat out(a.rows() + b.rows() + c.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.middleRows(a.rows(), b.rows()) = b;
  out.bottomRows(c.rows()) = c;
  return out;
}

Vec assign_goal(const Policies& policies, const Vec& state) {
  require_shape(policies.hierarchical(), "assign_goal on a flat agent");
  return policies.manager_actor.forward(state);
}

Vec worker_action(const Policies& policies, const Vec& state, const Vec& goal) {
  require_shape(goal.size() == policies.goal_dim(), "goal dimension mismatch");
  return policies.worker_actor.forward(concat(state, goal));
}

Vec transition_goal(const GoalSpec& spec, const Vec& s_t, const Vec& g_t, const Vec& s_next) {
  require_shape(g_t.size() == spec.dim(), "goal dimension mismatch");
  if (spec.mode == GoalMode::Absolute) {
    spec.check_state(s_t);
    spec.check_state(s_next);
    return g_t;
  }
  // Grouped as g - (s' - s) so a hindsight goal s' - s maps exactly to zero.
  return g_t - (spec.select(s_next) - spec.select(s_t));
}

namespace {

Vec goal_residual(const GoalSpec& spec, const Vec& s_t, const Vec& g, const Vec& s_next) {
  require_shape(g.size() == spec.dim(), "goal dimension mismatch");
  if (spec.mode == GoalMode::Absolute) {
    spec.check_state(s_t);
    return g - spec.select(s_next);
  }
  return g - (spec.select(s_next) - spec.select(s_t));
}

}  // namespace

double intrinsic_reward(const GoalSpec& spec, const Vec& s_t, const Vec& g_t, const Vec& s_next) {
  return -goal_residual(spec, s_t, g_t, s_next).norm();
}

Vec intrinsic_reward_goal_gradient(const GoalSpec& spec, const Vec& s_t, const Vec& g,
                                   const Vec& s_next) {
  Vec d = goal_residual(spec, s_t, g, s_next);
  const double n = d.norm();
  if (n == 0.0) return Vec::Zero(d.size());
  return -d / n;
}

Vec explore(const Vec& value, const Bounds& range, Rng& rng, std::int64_t step_count,
            const ExplorationConfig& config) {
  require_shape(value.size() == range.dim(), "explore: value and range dimensions differ");
  if (step_count < config.warmup_steps) return rng.uniform_vec(range.low, range.high);
  if (config.noise_scale == 0.0) return range.clip(value);
  Vec std = config.noise_scale * range.half_width();
  Vec out = value;
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += rng.normal(0.0, std[i]);
  return range.clip(out);
}

}  // namespace cher
