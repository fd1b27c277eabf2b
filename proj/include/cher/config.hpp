#pragma once

#include "cher/envs/environment.hpp"
#include "cher/envs/nav.hpp"
#include "cher/envs/ring.hpp"
#include "cher/hierarchy.hpp"
#include "cher/learner.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cher {

enum class Algorithm { Td3Flat, Hrl, CherFixed, CherDynamic, Hiro, Hac };

std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

struct EnvConfig {
  std::string id = "four_rooms";  // gather | four_rooms | maze | ring
  NavConfig nav = NavConfig::four_rooms();
  RingConfig ring;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& config);

struct CooperationConfig {
  std::optional<double> lambda;             // cher-fixed
  std::optional<double> delta;              // cher-dynamic, given directly
  std::optional<double> cooperation_ratio;  // cher-dynamic, delta derived from q_hrl
  std::optional<double> q_hrl;
  double q_max = 0.0;
  double lambda_lr = 1e-4;
  double lambda_max = 10.0;
};

struct HacConfig {
  double subgoal_test_rate = 0.3;
  double hindsight_probability = 0.5;
  double goal_tolerance = 1.0;  // subgoal counts as reached within this distance
};

struct RunConfig {
  Algorithm algorithm = Algorithm::CherDynamic;
  EnvConfig env;
  HierarchyConfig hierarchy;  // goal spec and reward scale default to the environment's
  UpdateSchedule schedule;
  CooperationConfig cooperation;
  OptimConfig optim;
  int batch_size = 128;
  std::vector<int> hidden{256, 256};
  ExplorationConfig exploration;
  std::size_t replay_capacity = 200000;
  int hiro_candidates = 10;
  HacConfig hac;
  std::int64_t total_steps = 1000000;
  std::int64_t eval_every = 50000;
  int eval_episodes = 10;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";

  bool hierarchical() const { return algorithm != Algorithm::Td3Flat; }
  // Lagrange state the run starts from (lambda fixed, or 0 with delta set).
  LagrangeState initial_lagrange() const;
  void validate() const;
};

// Parses and validates a run config. Unknown keys anywhere are rejected.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
// Fully resolved form (every field explicit); parse_run_config(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& config);

}  // namespace cher
