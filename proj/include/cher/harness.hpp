#pragma once

#include "cher/checkpoint.hpp"
#include "cher/config.hpp"
#include "cher/learner.hpp"
#include "cher/replay.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cher {

// One line of the metrics stream. `kind` is "episode" for a finished training
// episode and "eval" for a noise-free evaluation pass.
struct MetricsRecord {
  std::string kind = "episode";
  std::int64_t step = 0;
  double episode_return = 0.0;
  std::optional<double> success_rate;
  double worker_intrinsic_return = 0.0;
  double lambda = 0.0;
  std::optional<double> q_w_mean;
  std::map<std::string, double> extra;  // per-target success etc.

  nlohmann::json to_json() const;
};

// Append-only metrics.jsonl plus a metrics.csv mirror. Each record is written
// as one complete line and flushed before the call returns. Wall-clock time
// goes to a separate timing.jsonl so the metrics files stay reproducible.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& dir);
  void write(const MetricsRecord& record);
  void write_timing(std::int64_t step, double wall_time);
  std::int64_t last_step() const { return last_step_; }

 private:
  std::ofstream jsonl_, csv_, timing_;
  std::int64_t last_step_ = -1;
};

// Rolls a policy out without exploration noise. Manager goals are drawn every
// meta_period steps and carried between decisions by the goal-transition law.
struct EpisodeOutcome {
  double episode_return = 0.0;
  double worker_intrinsic_return = 0.0;
  bool success = false;
  int length = 0;
};

EpisodeOutcome run_episode(const Policies& policies, const HierarchyConfig& hierarchy,
                           Environment& env, Rng& rng, const std::optional<Vec>& target = {},
                           std::ostream* trajectory = nullptr);

struct EvalSummary {
  int episodes = 0;
  double mean_return = 0.0;
  double mean_intrinsic_return = 0.0;
  std::optional<double> success_rate;
  // Per evaluation target ("16,0" -> success rate), when the task defines targets.
  std::vector<std::pair<std::string, double>> target_success;

  nlohmann::json to_json() const;
};

// n_episodes noise-free episodes; for tasks with evaluation targets, n_episodes
// per target.
EvalSummary evaluate(const Policies& policies, const HierarchyConfig& hierarchy,
                     Environment& env, int n_episodes, std::uint64_t seed,
                     std::ostream* trajectory = nullptr);
// Loads policies and run config from a checkpoint. `env_override` replaces the
// checkpoint's environment; shapes must match.
EvalSummary evaluate(const Checkpoint& checkpoint, int n_episodes, std::uint64_t seed,
                     const std::optional<EnvConfig>& env_override = {},
                     std::ostream* trajectory = nullptr);

Checkpoint make_checkpoint(const RunConfig& config, const Policies& policies,
                           const LagrangeState& lagrange, std::int64_t step);
Policies policies_from_checkpoint(const Checkpoint& checkpoint);

/// The training loop as a step-at-a-time state machine.
class Trainer {
 public:
  explicit Trainer(RunConfig config);

  // One environment step plus any updates due. Returns the finished episode
  // when this step ended one.
  std::optional<EpisodeOutcome> step();

  std::int64_t env_steps() const { return env_steps_; }
  std::int64_t updates() const { return train_steps_; }
  const RunConfig& config() const { return config_; }
  const Agent& agent() const { return agent_; }
  const LagrangeState& lagrange() const { return lagrange_; }
  const ReplayBuffer& replay() const { return buffer_; }
  std::optional<double> last_q_w() const { return last_q_w_; }

  Checkpoint checkpoint() const;
  // Called after every lambda update with (update index, env step, state, q_w).
  void on_lambda_update(std::function<void(std::int64_t, std::int64_t, const LagrangeState&,
                                           double)> f) {
    lambda_hook_ = std::move(f);
  }

 private:
  void begin_segment();
  void close_segment(bool terminal);
  void run_updates();
  void relabel(ManagerBatch& batch);

  RunConfig config_;
  GoalSpec spec_;  // empty for the flat agent
  std::unique_ptr<Environment> env_;
  Agent agent_;
  LagrangeState lagrange_;
  ReplayBuffer buffer_;
  Rng env_rng_, explore_rng_, replay_rng_, relabel_rng_, smoothing_rng_, hac_rng_;

  std::int64_t env_steps_ = 0;
  std::int64_t train_steps_ = 0;
  std::optional<double> last_q_w_;
  std::function<void(std::int64_t, std::int64_t, const LagrangeState&, double)> lambda_hook_;

  // episode and segment in progress
  bool episode_active_ = false;
  Vec obs_, goal_, initial_goal_;
  EpisodeOutcome episode_;
  std::vector<Vec> seg_states_, seg_actions_;
  std::vector<double> seg_rewards_;
  bool testing_subgoal_ = false;
};

struct TrainResult {
  std::int64_t steps = 0;
  std::optional<EvalSummary> final_eval;
  std::optional<double> final_q_w;
  double final_lambda = 0.0;
  std::filesystem::path final_checkpoint;
  bool diverged = false;
  std::string error;
};

// Writes config.json, metrics.jsonl/.csv, lambda_trace.csv, timing.jsonl and
// ckpt_<step>.ckpt (step 0, every eval_every steps and the final step) under
// config.output_dir. On a non-finite update the run stops, last_sane.ckpt is
// written and the result is marked diverged.
TrainResult train(const RunConfig& config);

struct SweepEntry {
  double ratio = 0.0;
  double delta = 0.0;
  TrainResult result;
};

// One cher-dynamic run per ratio, delta = q_hrl - ratio * (q_hrl - q_max).
// Runs land in <output_dir>/ratio_<r>/, a summary in <output_dir>/sweep.jsonl.
std::vector<SweepEntry> sweep_lambda(const RunConfig& config, const std::vector<double>& ratios);

}  // namespace cher
