#include "cher/gradcheck.hpp"
#include "cher/harness.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cher;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cher_test_harness" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Small enough to train a few hundred steps in well under a second.
nlohmann::json tiny(const std::string& algorithm) {
  return {
      {"algorithm", algorithm},
      {"env", {{"id", "four_rooms"}, {"horizon", 20}}},
      {"networks", {{"hidden", {8}}}},
      {"optim", {{"batch_size", 8}}},
      {"exploration", {{"warmup_steps", 10}}},
      {"total_steps", 200},
      {"eval_every", 100},
      {"eval_episodes", 1},
      {"seed", 3},
  };
}

RunConfig tiny_config(const std::string& algorithm, const std::string& out) {
  nlohmann::json j = tiny(algorithm);
  j["output_dir"] = scratch(out).string();
  if (algorithm == "cher-fixed") j["cooperation"] = {{"lambda", 0.5}};
  if (algorithm == "cher-dynamic") j["cooperation"] = {{"delta", -5.0}};
  return parse_run_config(j);
}

}  // namespace

TEST_CASE("config: unknown keys and bad values are rejected") {
  nlohmann::json j = tiny("hrl");
  CHECK_NOTHROW(parse_run_config(j));
  j["optim"]["learning_rate"] = 1e-3;
  CHECK_THROWS_AS(parse_run_config(j), ValidationError);
  j = tiny("hrl");
  j["algorithm"] = "sac";
  CHECK_THROWS_AS(parse_run_config(j), ValidationError);
  j = tiny("hrl");
  j["hierarchy"] = {{"meta_period", 0}};
  CHECK_THROWS_AS(parse_run_config(j), ValidationError);
  j = tiny("hrl");
  j["env"]["id"] = "ant_maze";
  CHECK_THROWS_AS(parse_run_config(j), ValidationError);
}

TEST_CASE("config: cooperative algorithms need their settings") {
  nlohmann::json j = tiny("cher-fixed");
  CHECK_THROWS_AS(parse_run_config(j), ValidationError);
  j["cooperation"] = {{"lambda", -1.0}};
  CHECK_THROWS_AS(parse_run_config(j), ValidationError);

  j = tiny("cher-dynamic");
  j["cooperation"] = {{"cooperation_ratio", 0.75}};
  try {
    parse_run_config(j);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("q_hrl") != std::string::npos);
  }
  j["cooperation"]["q_hrl"] = -100.0;
  const RunConfig c = parse_run_config(j);
  const LagrangeState l = c.initial_lagrange();
  CHECK(l.delta_set);
  CHECK(l.delta == doctest::Approx(-25.0));
  CHECK(l.lambda == 0.0);
}

TEST_CASE("config: resolved json round trips") {
  for (const char* alg : {"td3-flat", "hrl", "cher-fixed", "cher-dynamic", "hiro", "hac"}) {
    const RunConfig c = tiny_config(alg, "roundtrip");
    const nlohmann::json j = to_json(c);
    CHECK(to_json(parse_run_config(j)) == j);
  }
  nlohmann::json ring = tiny("hrl");
  ring["env"] = {{"id", "ring"}, {"horizon", 30}, {"warmup_steps", 10}};
  const RunConfig c = parse_run_config(ring);
  CHECK(c.env.ring.horizon == 30);
  CHECK(to_json(parse_run_config(to_json(c))) == to_json(c));
}

TEST_CASE("train with total_steps = 0 writes the initial checkpoint only") {
  RunConfig c = tiny_config("hrl", "zero");
  c.total_steps = 0;
  const TrainResult r = train(c);
  CHECK(r.steps == 0);
  CHECK_FALSE(r.diverged);
  const fs::path dir = c.output_dir;
  CHECK(fs::exists(dir / "ckpt_0.ckpt"));
  CHECK(fs::exists(dir / "config.json"));
  int ckpts = 0;
  for (const auto& e : fs::directory_iterator(dir)) ckpts += e.path().extension() == ".ckpt";
  CHECK(ckpts == 1);
  const auto metrics = lines(dir / "metrics.jsonl");
  REQUIRE(metrics.size() == 1);
  CHECK(nlohmann::json::parse(metrics[0])["kind"] == "eval");
}

TEST_CASE("training output files and schemas") {
  const RunConfig c = tiny_config("cher-dynamic", "schema");
  const TrainResult r = train(c);
  CHECK(r.steps == 200);
  const fs::path dir = c.output_dir;
  for (const char* f : {"ckpt_0.ckpt", "ckpt_100.ckpt", "ckpt_200.ckpt"}) CHECK(fs::exists(dir / f));
  CHECK(r.final_checkpoint == dir / "ckpt_200.ckpt");

  std::int64_t last = -1;
  for (const auto& l : lines(dir / "metrics.jsonl")) {
    const auto j = nlohmann::json::parse(l);
    for (const char* k : {"kind", "step", "episode_return", "worker_intrinsic_return", "lambda"})
      CHECK(j.contains(k));
    CHECK(j["step"].get<std::int64_t>() >= last);
    last = j["step"];
  }
  const auto csv = lines(dir / "metrics.csv");
  CHECK(csv.front() == "kind,step,episode_return,success_rate,worker_intrinsic_return,lambda,q_w_mean");
  CHECK(csv.size() == lines(dir / "metrics.jsonl").size() + 1);

  const auto trace = lines(dir / "lambda_trace.csv");
  REQUIRE(trace.size() > 1);
  CHECK(trace.front() == "update,step,lambda,q_w,delta");
  for (std::size_t i = 1; i < trace.size(); ++i) {
    std::stringstream row(trace[i]);
    std::string cell;
    std::vector<double> v;
    while (std::getline(row, cell, ',')) v.push_back(std::stod(cell));
    REQUIRE(v.size() == 5);
    CHECK(v[2] >= 0.0);
    CHECK(v[2] <= 10.0);
    CHECK(v[4] == -5.0);
  }
  CHECK(fs::exists(dir / "timing.jsonl"));
}

TEST_CASE("training is deterministic for a fixed seed") {
  for (const char* alg : {"hrl", "td3-flat", "hiro", "hac", "cher-dynamic"}) {
    const RunConfig a = tiny_config(alg, std::string("det_a_") + alg);
    const RunConfig b = tiny_config(alg, std::string("det_b_") + alg);
    train(a);
    train(b);
    CHECK(slurp(fs::path(a.output_dir) / "metrics.jsonl") ==
          slurp(fs::path(b.output_dir) / "metrics.jsonl"));
    CHECK(load_checkpoint(fs::path(a.output_dir) / "ckpt_200.ckpt")
              .network("worker_critic1")
              .params() ==
          load_checkpoint(fs::path(b.output_dir) / "ckpt_200.ckpt")
              .network("worker_critic1")
              .params());
  }
}

TEST_CASE("cher-fixed with lambda = 0 reproduces hrl exactly") {
  RunConfig hrl = tiny_config("hrl", "eq_hrl");
  RunConfig cher = tiny_config("cher-fixed", "eq_cher");
  hrl.total_steps = cher.total_steps = 2000;
  hrl.eval_every = cher.eval_every = 2000;
  cher.cooperation.lambda = 0.0;
  Trainer a(hrl), b(cher);
  while (a.updates() < 1000) {
    a.step();
    b.step();
  }
  CHECK(a.updates() == b.updates());
  Policies::for_each(a.agent().policies, [&](const char* name, const Mlp& net) {
    const Mlp* other = nullptr;
    Policies::for_each(b.agent().policies, [&](const char* n, const Mlp& m) {
      if (std::string(n) == name) other = &m;
    });
    CHECK_MESSAGE(net.params() == other->params(), name);
  });
}

TEST_CASE("trainer fills replay with well-formed segments") {
  for (const char* alg : {"hrl", "td3-flat", "hac"}) {
    Trainer t(tiny_config(alg, "segments"));
    for (int i = 0; i < 100; ++i) t.step();
    const ReplayBuffer& buf = t.replay();
    std::size_t transitions = 0;
    for (std::size_t i = 0; i < buf.size(); ++i) {
      CHECK_NOTHROW(validate_segment(buf.at(i), buf.goal_spec(), buf.meta_period()));
      transitions += buf.at(i).length();
    }
    CHECK(transitions == 100);
  }
}

TEST_CASE("evaluate: success rates are fractions and per-target") {
  const RunConfig c = tiny_config("hrl", "eval");
  const TrainResult r = train(c);
  const EvalSummary s = evaluate(load_checkpoint(r.final_checkpoint), 2, 7);
  CHECK(s.episodes == 6);
  REQUIRE(s.success_rate);
  CHECK(*s.success_rate >= 0.0);
  CHECK(*s.success_rate <= 1.0);
  CHECK(s.target_success.size() == 3);
  // same seed, same numbers
  const EvalSummary again = evaluate(load_checkpoint(r.final_checkpoint), 2, 7);
  CHECK(again.mean_return == s.mean_return);
}

TEST_CASE("evaluate: a straight-line policy reaches (20, 0) in an empty arena") {
  NavConfig nav = NavConfig::four_rooms();
  nav.walls.clear();
  nav.horizon = 40;
  NavEnv env(nav);
  Rng rng(1);
  // flat policy that always pushes +x: zero weights, output offset (1, 0)
  Policies p = Policies::create_flat(6, env.action_bounds(), {4}, rng);
  p.worker_actor = Mlp({6, 4, 2}, OutputActivation::Identity, Vec::Zero(2), (Vec(2) << 1.0, 0.0).finished());
  HierarchyConfig h;
  h.meta_period = 1;
  Rng ep(2);
  const EpisodeOutcome o = run_episode(p, h, env, ep, Vec((Vec(2) << 20.0, 0.0).finished()));
  CHECK(o.success);
  CHECK(o.length == 40);
  CHECK(env.state().position.x() == doctest::Approx(22.0));  // pinned at the arena edge
}

TEST_CASE("evaluate: mismatched environments are rejected") {
  const RunConfig c = tiny_config("hrl", "mismatch");
  const TrainResult r = train(c);
  EnvConfig ring;
  ring.id = "ring";
  CHECK_THROWS_AS(evaluate(load_checkpoint(r.final_checkpoint), 1, 0, ring), ValidationError);
  EnvConfig maze;
  maze.id = "maze";
  maze.nav = NavConfig::maze();
  CHECK_NOTHROW(evaluate(load_checkpoint(r.final_checkpoint), 1, 0, maze));
}

TEST_CASE("checkpoint round trip restores every network") {
  Trainer t(tiny_config("cher-fixed", "ckpt"));
  for (int i = 0; i < 50; ++i) t.step();
  const fs::path p = scratch("ckpt_file") / "x.ckpt";
  fs::create_directories(p.parent_path());
  save_checkpoint(p, t.checkpoint());
  const Policies back = policies_from_checkpoint(load_checkpoint(p));
  CHECK(back.manager_actor.params() == t.agent().policies.manager_actor.params());
  CHECK(back.worker_critic2_target.params() == t.agent().policies.worker_critic2_target.params());
}

TEST_CASE("grad-check passes, catches injected faults and skips lambda = 0") {
  GradCheckConfig cfg;
  cfg.num_nets = 20;
  cfg.num_configs = 20;
  const GradCheckReport ok = grad_check(cfg);
  CHECK(ok.passed());
  CHECK(ok.checks.size() == 5);

  cfg.fault = InjectedFault::Mlp;
  CHECK_FALSE(grad_check(cfg).passed());
  cfg.fault = InjectedFault::Cooperative;
  const GradCheckReport bad = grad_check(cfg);
  CHECK_FALSE(bad.passed());
  CHECK(bad.format().find("FAIL cooperative_manager_gradient") != std::string::npos);

  cfg.fault = InjectedFault::None;
  cfg.lambda = 0.0;
  const GradCheckReport skip = grad_check(cfg);
  CHECK(skip.passed());
  CHECK(skip.checks.back().skipped);
  CHECK(skip.format().find("SKIP cooperative_manager_gradient") != std::string::npos);
}

TEST_CASE("sweep-lambda needs q_hrl and maps ratios to deltas") {
  nlohmann::json j = tiny("cher-dynamic");
  j["cooperation"] = {{"delta", -1.0}};
  j["output_dir"] = scratch("sweep").string();
  j["total_steps"] = 20;
  j["eval_every"] = 20;
  RunConfig c = parse_run_config(j);
  try {
    sweep_lambda(c, {0.5});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("q_hrl") != std::string::npos);
  }
  c.cooperation.q_hrl = -40.0;
  c.cooperation.q_max = -10.0;
  CHECK_THROWS_AS(sweep_lambda(c, {1.0}), ValidationError);
  const auto entries = sweep_lambda(c, {0.0, 0.5});
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].delta == doctest::Approx(-40.0));
  CHECK(entries[1].delta == doctest::Approx(-25.0));
  CHECK(lines(fs::path(c.output_dir) / "sweep.jsonl").size() == 2);
}
