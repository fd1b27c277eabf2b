#include "cher/config.hpp"

#include <fstream>
#include <set>

namespace cher {
namespace {

using nlohmann::json;

// Reads keys from a JSON object and rejects any it was not asked about.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  std::optional<T> optional(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(path_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    return optional<T>(key).value_or(fallback);
  }

  const json* object(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  std::string child(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError(path_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}
std::vector<double> from_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec2 to_vec2(const std::vector<double>& v, const std::string& where) {
  if (v.size() != 2) throw ValidationError(where + ": expected [x, y]");
  return {v[0], v[1]};
}

void parse_nav(Fields& f, NavConfig& c) {
  c.horizon = f.get("horizon", c.horizon);
  c.dt = f.get("dt", c.dt);
  c.max_speed = f.get("max_speed", c.max_speed);
  c.max_accel = f.get("max_accel", c.max_accel);
  if (auto v = f.optional<std::vector<double>>("arena_low")) c.arena_low = to_vec2(*v, "arena_low");
  if (auto v = f.optional<std::vector<double>>("arena_high"))
    c.arena_high = to_vec2(*v, "arena_high");
  if (auto walls = f.optional<std::vector<std::vector<double>>>("walls")) {
    c.walls.clear();
    for (const auto& w : *walls) {
      if (w.size() != 4) throw ValidationError("env.walls: expected [x1, y1, x2, y2]");
      c.walls.push_back({{w[0], w[1]}, {w[2], w[3]}});
    }
  }
  c.apples = f.get("apples", c.apples);
  c.bombs = f.get("bombs", c.bombs);
  c.pickup_radius = f.get("pickup_radius", c.pickup_radius);
  c.item_clearance = f.get("item_clearance", c.item_clearance);
  c.sensor_range = f.get("sensor_range", c.sensor_range);
  c.sensor_bins = f.get("sensor_bins", c.sensor_bins);
  c.success_radius = f.get("success_radius", c.success_radius);
  if (auto targets = f.optional<std::vector<std::vector<double>>>("targets")) {
    c.targets.clear();
    for (const auto& t : *targets) c.targets.push_back(to_vec2(t, "env.targets"));
  }
  if (auto v = f.optional<std::vector<double>>("target_low"))
    c.target_low = to_vec2(*v, "target_low");
  if (auto v = f.optional<std::vector<double>>("target_high"))
    c.target_high = to_vec2(*v, "target_high");
  c.validate();
}

void parse_ring(Fields& f, RingConfig& c) {
  c.n_vehicles = f.get("n_vehicles", c.n_vehicles);
  c.ring_length_min = f.get("ring_length_min", c.ring_length_min);
  c.ring_length_max = f.get("ring_length_max", c.ring_length_max);
  c.dt = f.get("dt", c.dt);
  c.warmup_steps = f.get("warmup_steps", c.warmup_steps);
  c.horizon = f.get("horizon", c.horizon);
  if (const json* idm = f.object("idm")) {
    Fields g(*idm, f.child("idm"));
    c.idm.v0 = g.get("v0", c.idm.v0);
    c.idm.T = g.get("T", c.idm.T);
    c.idm.a = g.get("a", c.idm.a);
    c.idm.b = g.get("b", c.idm.b);
    c.idm.s0 = g.get("s0", c.idm.s0);
    c.idm.delta = g.get("delta", c.idm.delta);
    g.finish();
  }
  c.accel_noise = f.get("accel_noise", c.accel_noise);
  c.vehicle_length = f.get("vehicle_length", c.vehicle_length);
  c.initial_perturbation = f.get("initial_perturbation", c.initial_perturbation);
  c.av_max_accel = f.get("av_max_accel", c.av_max_accel);
  c.goal_speed_max = f.get("goal_speed_max", c.goal_speed_max);
  c.history_len = f.get("history_len", c.history_len);
  c.mean_speed_reward = f.get("mean_speed_reward", c.mean_speed_reward);
  c.validate();
}

json nav_to_json(const NavConfig& c) {
  json walls = json::array();
  for (const auto& w : c.walls) walls.push_back({w.a.x(), w.a.y(), w.b.x(), w.b.y()});
  json targets = json::array();
  for (const auto& t : c.targets) targets.push_back({t.x(), t.y()});
  return {{"horizon", c.horizon},
          {"dt", c.dt},
          {"max_speed", c.max_speed},
          {"max_accel", c.max_accel},
          {"arena_low", {c.arena_low.x(), c.arena_low.y()}},
          {"arena_high", {c.arena_high.x(), c.arena_high.y()}},
          {"walls", walls},
          {"apples", c.apples},
          {"bombs", c.bombs},
          {"pickup_radius", c.pickup_radius},
          {"item_clearance", c.item_clearance},
          {"sensor_range", c.sensor_range},
          {"sensor_bins", c.sensor_bins},
          {"success_radius", c.success_radius},
          {"targets", targets},
          {"target_low", {c.target_low.x(), c.target_low.y()}},
          {"target_high", {c.target_high.x(), c.target_high.y()}}};
}

json ring_to_json(const RingConfig& c) {
  return {{"n_vehicles", c.n_vehicles},
          {"ring_length_min", c.ring_length_min},
          {"ring_length_max", c.ring_length_max},
          {"dt", c.dt},
          {"warmup_steps", c.warmup_steps},
          {"horizon", c.horizon},
          {"idm",
           {{"v0", c.idm.v0},
            {"T", c.idm.T},
            {"a", c.idm.a},
            {"b", c.idm.b},
            {"s0", c.idm.s0},
            {"delta", c.idm.delta}}},
          {"accel_noise", c.accel_noise},
          {"vehicle_length", c.vehicle_length},
          {"initial_perturbation", c.initial_perturbation},
          {"av_max_accel", c.av_max_accel},
          {"goal_speed_max", c.goal_speed_max},
          {"history_len", c.history_len},
          {"mean_speed_reward", c.mean_speed_reward}};
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Td3Flat: return "td3-flat";
    case Algorithm::Hrl: return "hrl";
    case Algorithm::CherFixed: return "cher-fixed";
    case Algorithm::CherDynamic: return "cher-dynamic";
    case Algorithm::Hiro: return "hiro";
    case Algorithm::Hac: return "hac";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (auto a : {Algorithm::Td3Flat, Algorithm::Hrl, Algorithm::CherFixed, Algorithm::CherDynamic,
                 Algorithm::Hiro, Algorithm::Hac})
    if (to_string(a) == name) return a;
  throw ValidationError("unknown algorithm '" + name +
                        "' (expected td3-flat|hrl|cher-fixed|cher-dynamic|hiro|hac)");
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config) {
  if (config.id == "ring") return std::make_unique<RingEnv>(config.ring);
  NavConfig nav = config.nav;
  nav.arena = arena_from_string(config.id);
  return std::make_unique<NavEnv>(nav);
}

LagrangeState RunConfig::initial_lagrange() const {
  LagrangeState s;
  s.lambda_lr = cooperation.lambda_lr;
  s.lambda_max = cooperation.lambda_max;
  if (algorithm == Algorithm::CherFixed) s.lambda = *cooperation.lambda;
  if (algorithm == Algorithm::CherDynamic) {
    s.delta_set = true;
    s.delta = cooperation.delta ? *cooperation.delta
                                : delta_for_cooperation_ratio(*cooperation.cooperation_ratio,
                                                              *cooperation.q_hrl, cooperation.q_max);
  }
  return s;
}

void RunConfig::validate() const {
  const auto& c = cooperation;
  if (algorithm == Algorithm::CherFixed) {
    if (!c.lambda) throw ValidationError("cher-fixed requires cooperation.lambda");
    if (c.delta || c.cooperation_ratio)
      throw ValidationError("cher-fixed takes lambda only; delta/cooperation_ratio are for cher-dynamic");
    if (*c.lambda < 0.0) throw ValidationError("cooperation.lambda must be >= 0");
  } else if (algorithm == Algorithm::CherDynamic) {
    if (c.lambda) throw ValidationError("cher-dynamic adapts lambda; set delta instead");
    if (c.delta.has_value() == c.cooperation_ratio.has_value())
      throw ValidationError("cher-dynamic needs exactly one of cooperation.delta or cooperation.cooperation_ratio");
    if (c.cooperation_ratio) {
      if (!c.q_hrl)
        throw ValidationError(
            "cooperation.cooperation_ratio needs cooperation.q_hrl, the worker's expected "
            "intrinsic return under standard HRL (measure it with an 'hrl' run: final q_w_mean)");
      if (!(*c.cooperation_ratio >= 0.0 && *c.cooperation_ratio < 1.0))
        throw ValidationError("cooperation.cooperation_ratio must lie in [0, 1)");
    }
  } else if (c.lambda || c.delta || c.cooperation_ratio) {
    throw ValidationError(to_string(algorithm) + " takes no cooperation lambda/delta");
  }
  if (!(c.lambda_lr > 0.0 && c.lambda_max > 0.0))
    throw ValidationError("lambda_lr and lambda_max must be > 0");
  hierarchy.validate();
  schedule.validate();
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ValidationError("hidden layer sizes must be >= 1");
  if (replay_capacity < 1) throw ValidationError("replay capacity must be >= 1");
  if (hiro_candidates < 1) throw ValidationError("hiro.num_candidates must be >= 1");
  if (!(hac.subgoal_test_rate >= 0.0 && hac.subgoal_test_rate <= 1.0) ||
      !(hac.hindsight_probability >= 0.0 && hac.hindsight_probability <= 1.0) ||
      !(hac.goal_tolerance > 0.0))
    throw ValidationError("invalid hac settings");
  if (total_steps < 0 || eval_every < 1 || eval_episodes < 1)
    throw ValidationError("total_steps >= 0, eval_every >= 1 and eval_episodes >= 1 required");
  if (exploration.warmup_steps < 0 || exploration.noise_scale < 0.0)
    throw ValidationError("invalid exploration settings");
  if (optim.actor_lr <= 0.0 || optim.critic_lr <= 0.0)
    throw ValidationError("learning rates must be > 0");
  auto environment = make_environment(env);
  const Vec probe = Vec::Zero(environment->observation_dim());
  hierarchy.goal.check_state(probe);
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  Fields top(j, "config");
  c.algorithm = algorithm_from_string(top.get<std::string>("algorithm", to_string(c.algorithm)));
  c.seed = top.get("seed", c.seed);
  c.total_steps = top.get("total_steps", c.total_steps);
  c.eval_every = top.get("eval_every", c.eval_every);
  c.eval_episodes = top.get("eval_episodes", c.eval_episodes);
  c.output_dir = top.get("output_dir", c.output_dir);

  if (const json* env = top.object("env")) {
    Fields f(*env, "config.env");
    c.env.id = f.get<std::string>("id", c.env.id);
    if (c.env.id == "ring") {
      parse_ring(f, c.env.ring);
    } else {
      c.env.nav = NavConfig::preset(arena_from_string(c.env.id));
      parse_nav(f, c.env.nav);
    }
    f.finish();
  }
  auto env = make_environment(c.env);
  c.hierarchy.goal = env->default_goal_spec();
  c.hierarchy.manager_reward_scale = env->default_reward_scale();

  if (const json* h = top.object("hierarchy")) {
    Fields f(*h, "config.hierarchy");
    c.hierarchy.meta_period = f.get("meta_period", c.hierarchy.meta_period);
    c.hierarchy.gamma = f.get("gamma", c.hierarchy.gamma);
    c.hierarchy.manager_reward_scale =
        f.get("manager_reward_scale", c.hierarchy.manager_reward_scale);
    if (const json* g = f.object("goal")) {
      Fields gf(*g, "config.hierarchy.goal");
      auto& goal = c.hierarchy.goal;
      goal.mode = goal_mode_from_string(gf.get<std::string>("mode", to_string(goal.mode)));
      goal.state_indices = gf.get("state_indices", goal.state_indices);
      if (auto s = gf.optional<std::vector<double>>("scale")) goal.scale = to_vec(*s);
      if (auto o = gf.optional<std::vector<double>>("offset")) goal.offset = to_vec(*o);
      gf.finish();
    }
    f.finish();
  }
  c.schedule.gamma = c.hierarchy.gamma;

  if (const json* n = top.object("networks")) {
    Fields f(*n, "config.networks");
    c.hidden = f.get("hidden", c.hidden);
    f.finish();
  }
  if (const json* o = top.object("optim")) {
    Fields f(*o, "config.optim");
    c.optim.actor_lr = f.get("actor_lr", c.optim.actor_lr);
    c.optim.critic_lr = f.get("critic_lr", c.optim.critic_lr);
    c.batch_size = f.get("batch_size", c.batch_size);
    f.finish();
  }
  if (const json* s = top.object("schedule")) {
    Fields f(*s, "config.schedule");
    auto& sc = c.schedule;
    sc.worker_critic_every = f.get("worker_critic_every", sc.worker_critic_every);
    sc.worker_actor_every = f.get("worker_actor_every", sc.worker_actor_every);
    sc.manager_critic_every = f.get("manager_critic_every", sc.manager_critic_every);
    sc.manager_actor_every = f.get("manager_actor_every", sc.manager_actor_every);
    sc.tau = f.get("tau", sc.tau);
    sc.policy_noise = f.get("policy_noise", sc.policy_noise);
    sc.noise_clip = f.get("noise_clip", sc.noise_clip);
    f.finish();
  }
  if (const json* e = top.object("exploration")) {
    Fields f(*e, "config.exploration");
    c.exploration.warmup_steps = f.get("warmup_steps", c.exploration.warmup_steps);
    c.exploration.noise_scale = f.get("noise_scale", c.exploration.noise_scale);
    f.finish();
  }
  if (const json* r = top.object("replay")) {
    Fields f(*r, "config.replay");
    c.replay_capacity = f.get("capacity", c.replay_capacity);
    f.finish();
  }
  if (const json* l = top.object("cooperation")) {
    Fields f(*l, "config.cooperation");
    auto& co = c.cooperation;
    co.lambda = f.optional<double>("lambda");
    co.delta = f.optional<double>("delta");
    co.cooperation_ratio = f.optional<double>("cooperation_ratio");
    co.q_hrl = f.optional<double>("q_hrl");
    co.q_max = f.get("q_max", co.q_max);
    co.lambda_lr = f.get("lambda_lr", co.lambda_lr);
    co.lambda_max = f.get("lambda_max", co.lambda_max);
    f.finish();
  }
  if (const json* h = top.object("hiro")) {
    Fields f(*h, "config.hiro");
    c.hiro_candidates = f.get("num_candidates", c.hiro_candidates);
    f.finish();
  }
  if (const json* h = top.object("hac")) {
    Fields f(*h, "config.hac");
    c.hac.subgoal_test_rate = f.get("subgoal_test_rate", c.hac.subgoal_test_rate);
    c.hac.hindsight_probability = f.get("hindsight_probability", c.hac.hindsight_probability);
    c.hac.goal_tolerance = f.get("goal_tolerance", c.hac.goal_tolerance);
    f.finish();
  }
  top.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  json env = c.env.id == "ring" ? ring_to_json(c.env.ring) : nav_to_json(c.env.nav);
  env["id"] = c.env.id;
  const auto& g = c.hierarchy.goal;
  json cooperation = {{"q_max", c.cooperation.q_max},
                      {"lambda_lr", c.cooperation.lambda_lr},
                      {"lambda_max", c.cooperation.lambda_max}};
  if (c.cooperation.lambda) cooperation["lambda"] = *c.cooperation.lambda;
  if (c.cooperation.delta) cooperation["delta"] = *c.cooperation.delta;
  if (c.cooperation.cooperation_ratio)
    cooperation["cooperation_ratio"] = *c.cooperation.cooperation_ratio;
  if (c.cooperation.q_hrl) cooperation["q_hrl"] = *c.cooperation.q_hrl;
  return {
      {"algorithm", to_string(c.algorithm)},
      {"seed", c.seed},
      {"total_steps", c.total_steps},
      {"eval_every", c.eval_every},
      {"eval_episodes", c.eval_episodes},
      {"output_dir", c.output_dir},
      {"env", env},
      {"hierarchy",
       {{"meta_period", c.hierarchy.meta_period},
        {"gamma", c.hierarchy.gamma},
        {"manager_reward_scale", c.hierarchy.manager_reward_scale},
        {"goal",
         {{"mode", to_string(g.mode)},
          {"state_indices", g.state_indices},
          {"scale", from_vec(g.scale)},
          {"offset", from_vec(g.offset)}}}}},
      {"networks", {{"hidden", c.hidden}}},
      {"optim",
       {{"actor_lr", c.optim.actor_lr},
        {"critic_lr", c.optim.critic_lr},
        {"batch_size", c.batch_size}}},
      {"schedule",
       {{"worker_critic_every", c.schedule.worker_critic_every},
        {"worker_actor_every", c.schedule.worker_actor_every},
        {"manager_critic_every", c.schedule.manager_critic_every},
        {"manager_actor_every", c.schedule.manager_actor_every},
        {"tau", c.schedule.tau},
        {"policy_noise", c.schedule.policy_noise},
        {"noise_clip", c.schedule.noise_clip}}},
      {"exploration",
       {{"warmup_steps", c.exploration.warmup_steps},
        {"noise_scale", c.exploration.noise_scale}}},
      {"replay", {{"capacity", c.replay_capacity}}},
      {"cooperation", cooperation},
      {"hiro", {{"num_candidates", c.hiro_candidates}}},
      {"hac",
       {{"subgoal_test_rate", c.hac.subgoal_test_rate},
        {"hindsight_probability", c.hac.hindsight_probability},
        {"goal_tolerance", c.hac.goal_tolerance}}},
  };
}

}  // namespace cher
