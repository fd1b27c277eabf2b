#include "cher/envs/ring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace cher {

double idm_acceleration(const IdmParams& p, double speed, double leader_speed, double gap) {
  const double dv = speed - leader_speed;
  const double s_star = p.s0 + std::max(0.0, speed * p.T + speed * dv / (2.0 * std::sqrt(p.a * p.b)));
  const double g = std::max(gap, 1e-3);
  return p.a * (1.0 - std::pow(speed / p.v0, p.delta) - (s_star / g) * (s_star / g));
}

double idm_equilibrium_speed(const IdmParams& p, double gap) {
  // acceleration is decreasing in speed for a uniform platoon; bisect its root
  double lo = 0.0;
  double hi = p.v0;
  if (idm_acceleration(p, lo, lo, gap) <= 0.0) return 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (idm_acceleration(p, mid, mid, gap) > 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

void RingConfig::validate() const {
  if (n_vehicles < 2) throw ValidationError("ring needs at least two vehicles");
  if (!(ring_length_min > 0.0 && ring_length_max >= ring_length_min))
    throw ValidationError("invalid ring length range");
  if (ring_length_min <= n_vehicles * vehicle_length)
    throw ValidationError("ring too short for its vehicles");
  if (!(dt > 0.0) || warmup_steps < 0 || horizon <= 0 || history_len < 1)
    throw ValidationError("invalid ring timing settings");
  if (!(idm.v0 > 0 && idm.T > 0 && idm.a > 0 && idm.b > 0 && idm.s0 >= 0))
    throw ValidationError("IDM parameters must be positive");
  if (accel_noise < 0.0 || vehicle_length <= 0.0 || av_max_accel <= 0.0 || goal_speed_max <= 0.0)
    throw ValidationError("invalid ring vehicle settings");
}

double RingState::gap(int i, double vehicle_length) const {
  const int leader = (i + 1) % size();
  double d = positions[leader] - positions[i];
  if (d < 0.0) d += ring_length;
  if (size() == 1) d = ring_length;
  return d - vehicle_length;
}

double speed_std(const std::vector<double>& speeds) {
  const double n = static_cast<double>(speeds.size());
  const double mean = std::accumulate(speeds.begin(), speeds.end(), 0.0) / n;
  double var = 0.0;
  for (double v : speeds) var += (v - mean) * (v - mean);
  return std::sqrt(var / n);
}

double ring_reward(const std::vector<double>& speeds, const RingConfig& config) {
  const double n = static_cast<double>(speeds.size());
  const double total = std::accumulate(speeds.begin(), speeds.end(), 0.0);
  if (config.mean_speed_reward) return 0.1 * (total / n) * (total / n);
  return (0.1 * total * total) / n;
}

namespace {

AvFeatures av_features(const RingState& s, const RingConfig& c) {
  const int n = s.size();
  const int i = s.av_index;
  const int leader = (i + 1) % n;
  const int follower = (i + n - 1) % n;
  return {s.speeds[i], s.speeds[leader], s.gap(i, c.vehicle_length), s.speeds[follower],
          s.gap(follower, c.vehicle_length)};
}

void reset_history(RingState& s, const RingConfig& c) {
  s.history.assign(static_cast<std::size_t>(c.history_len), av_features(s, c));
}

RingStepResult advance(const RingState& state, const std::vector<double>& accels,
                       const RingConfig& c) {
  RingStepResult r;
  r.state = state;
  RingState& s = r.state;
  const int n = s.size();
  for (int i = 0; i < n; ++i) {
    s.speeds[i] = std::max(0.0, s.speeds[i] + accels[i] * c.dt);
    s.positions[i] = std::fmod(s.positions[i] + s.speeds[i] * c.dt, s.ring_length);
  }
  s.step += 1;
  for (int i = 0; i < n; ++i) {
    if (s.gap(i, c.vehicle_length) < 0.0) s.collided = true;
  }
  s.history.push_front(av_features(s, c));
  while (s.history.size() > static_cast<std::size_t>(c.history_len)) s.history.pop_back();
  if (s.collided) {
    r.done = true;
    r.reward = 0.0;
  } else {
    r.reward = ring_reward(s.speeds, c);
  }
  return r;
}

std::vector<double> human_accels(const RingState& s, const RingConfig& c, Rng& rng) {
  const int n = s.size();
  std::vector<double> acc(n);
  for (int i = 0; i < n; ++i) {
    const int leader = (i + 1) % n;
    acc[i] = idm_acceleration(c.idm, s.speeds[i], s.speeds[leader], s.gap(i, c.vehicle_length));
    if (c.accel_noise > 0.0) acc[i] += rng.normal(0.0, c.accel_noise);
  }
  return acc;
}

}  // namespace

RingState ring_place(const RingConfig& c, double ring_length, double speed, double perturbation) {
  RingState s;
  s.ring_length = ring_length;
  const int n = c.n_vehicles;
  const double spacing = ring_length / n;
  for (int i = 0; i < n; ++i) {
    s.positions.push_back(i * spacing);
    s.speeds.push_back(speed);
  }
  s.speeds[0] = std::max(0.0, speed - perturbation);
  s.av_index = 0;
  s.initial_speed_std = speed_std(s.speeds);
  reset_history(s, c);
  return s;
}

RingState ring_reset(const RingConfig& c, Rng& rng) {
  c.validate();
  const double length = rng.uniform(c.ring_length_min, c.ring_length_max);
  const double gap = length / c.n_vehicles - c.vehicle_length;
  RingState s = ring_place(c, length, idm_equilibrium_speed(c.idm, gap), c.initial_perturbation);
  for (int t = 0; t < c.warmup_steps && !s.collided; ++t) {
    s = ring_step_all_idm(s, c, rng).state;
  }
  s.step = 0;
  reset_history(s, c);
  return s;
}

RingStepResult ring_step_all_idm(const RingState& state, const RingConfig& c, Rng& rng) {
  return advance(state, human_accels(state, c, rng), c);
}

RingStepResult ring_step(const RingState& state, double av_accel, const RingConfig& c,
                         Rng& noise_rng) {
  std::vector<double> acc = human_accels(state, c, noise_rng);
  acc[state.av_index] = std::clamp(av_accel, -c.av_max_accel, c.av_max_accel);
  return advance(state, acc, c);
}

Vec ring_observation(const RingState& s, const RingConfig& c) {
  Vec obs(5 * c.history_len);
  for (int h = 0; h < c.history_len; ++h) {
    const AvFeatures& f = s.history[static_cast<std::size_t>(h)];
    for (int j = 0; j < 5; ++j) obs[5 * h + j] = f[j];
  }
  return obs;
}

RingEnv::RingEnv(RingConfig config) : config_(std::move(config)) { config_.validate(); }

Bounds RingEnv::action_bounds() const {
  return {Vec::Constant(1, -config_.av_max_accel), Vec::Constant(1, config_.av_max_accel)};
}

Vec RingEnv::reset(Rng& rng) {
  state_ = ring_reset(config_, rng);
  noise_rng_ = Rng(rng.engine()());
  episode_step_ = 0;
  return ring_observation(state_, config_);
}

StepResult RingEnv::step(const Vec& action) {
  require_shape(action.size() == 1, "ring action must be 1-D");
  RingStepResult r = ring_step(state_, action[0], config_, noise_rng_);
  state_ = std::move(r.state);
  ++episode_step_;
  StepResult out;
  out.observation = ring_observation(state_, config_);
  out.reward = r.reward;
  out.terminal = r.done;
  out.truncated = !r.done && episode_step_ >= config_.horizon;
  return out;
}

GoalSpec RingEnv::default_goal_spec() const {
  GoalSpec g;
  g.state_indices = {0};  // most recent own speed
  g.scale = Vec::Constant(1, 0.5 * config_.goal_speed_max);
  g.offset = Vec::Constant(1, 0.5 * config_.goal_speed_max);
  g.mode = GoalMode::Absolute;
  return g;
}

void RingEnv::write_trajectory_header(std::ostream& out) const {
  out << "step,vehicle_id,position,speed,reward\n";
}

void RingEnv::write_trajectory_rows(std::ostream& out, int step, double reward) const {
  for (int i = 0; i < state_.size(); ++i) {
    out << step << ',' << i << ',' << state_.positions[i] << ',' << state_.speeds[i] << ','
        << reward << '\n';
  }
}

}  // namespace cher
