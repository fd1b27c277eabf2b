#pragma once

#include "cher/envs/environment.hpp"

#include <array>
#include <deque>
#include <string>
#include <vector>

namespace cher {

// Intelligent driver model parameters (SI units).
struct IdmParams {
  double v0 = 30.0;   // desired speed
  double T = 1.0;     // time headway
  double a = 1.3;     // max acceleration
  double b = 2.0;     // comfortable deceleration
  double s0 = 2.0;    // minimum gap
  double delta = 4.0;
};

double idm_acceleration(const IdmParams& p, double speed, double leader_speed, double gap);
// Speed at which a uniform platoon with this gap is stationary.
double idm_equilibrium_speed(const IdmParams& p, double gap);

struct RingConfig {
  int n_vehicles = 22;
  double ring_length_min = 220.0;
  double ring_length_max = 270.0;
  double dt = 0.2;
  int warmup_steps = 300;
  int horizon = 300;
  IdmParams idm;
  double accel_noise = 0.2;
  double vehicle_length = 5.0;
  double initial_perturbation = 1.0;  // speed removed from one vehicle at reset
  double av_max_accel = 1.0;
  double goal_speed_max = 10.0;
  int history_len = 5;
  bool mean_speed_reward = false;

  void validate() const;
};

// Per-step AV features: own speed, leader speed, leader gap, follower speed, follower gap.
using AvFeatures = std::array<double, 5>;

struct RingState {
  double ring_length = 0.0;
  std::vector<double> positions;  // metres along the ring, in [0, ring_length)
  std::vector<double> speeds;
  int av_index = 0;
  std::deque<AvFeatures> history;  // most recent first
  int step = 0;
  bool collided = false;
  double initial_speed_std = 0.0;  // speed spread right after placement, before warmup

  int size() const { return static_cast<int>(positions.size()); }
  // Bumper-to-bumper gap to the vehicle ahead of i (i + 1 mod n).
  double gap(int i, double vehicle_length) const;
};

double speed_std(const std::vector<double>& speeds);
double ring_reward(const std::vector<double>& speeds, const RingConfig& config);

// Equal spacing at the IDM equilibrium speed, one vehicle slowed, then
// warmup_steps of all-IDM driving (noise included). AV features are reset afterwards.
RingState ring_reset(const RingConfig& config, Rng& rng);
// Places vehicles without warmup.
RingState ring_place(const RingConfig& config, double ring_length, double speed,
                     double perturbation);

struct RingStepResult {
  RingState state;
  double reward = 0.0;
  bool done = false;  // collision
};

// Humans follow IDM plus Gaussian noise; the AV applies av_accel (clipped).
// Euler step: v' = max(0, v + a dt), x' = x + v' dt.
RingStepResult ring_step(const RingState& state, double av_accel, const RingConfig& config,
                         Rng& noise_rng);
// All vehicles under IDM (used by warmup).
RingStepResult ring_step_all_idm(const RingState& state, const RingConfig& config, Rng& noise_rng);

Vec ring_observation(const RingState& state, const RingConfig& config);

class RingEnv : public Environment {
 public:
  explicit RingEnv(RingConfig config);

  std::string id() const override { return "ring"; }
  int observation_dim() const override { return 5 * config_.history_len; }
  Bounds action_bounds() const override;
  int horizon() const override { return config_.horizon; }

  Vec reset(Rng& rng) override;
  StepResult step(const Vec& action) override;
  Vec observe() const override { return ring_observation(state_, config_); }

  GoalSpec default_goal_spec() const override;

  void write_trajectory_header(std::ostream& out) const override;
  void write_trajectory_rows(std::ostream& out, int step, double reward) const override;

  const RingState& state() const { return state_; }
  const RingConfig& config() const { return config_; }

 private:
  RingConfig config_;
  RingState state_;
  Rng noise_rng_;
  int episode_step_ = 0;
};

}  // namespace cher
