// Command-line entry point: train, evaluate, grad-check, sweep-lambda.
#include "cher/gradcheck.hpp"
#include "cher/harness.hpp"
#include "cher/log.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitFailure = 1;     // verification failed / run diverged
constexpr int kExitInvalid = 2;     // bad config or arguments

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::int64_t> steps;

  void add_to(CLI::App* app) {
    app->add_option("--seed", seed, "Override the run seed");
    app->add_option("--out", out, "Override the output directory");
    app->add_option("--steps", steps, "Override total_steps");
  }
  cher::RunConfig apply(cher::RunConfig c) const {
    if (seed) c.seed = *seed;
    if (out) c.output_dir = *out;
    if (steps) c.total_steps = *steps;
    c.validate();
    return c;
  }
};

void print_result(const cher::TrainResult& r) {
  nlohmann::json j = {{"steps", r.steps},
                      {"final_lambda", r.final_lambda},
                      {"final_checkpoint", r.final_checkpoint.string()},
                      {"diverged", r.diverged}};
  if (r.final_q_w) j["final_q_w"] = *r.final_q_w;
  if (r.final_eval) j["final_eval"] = r.final_eval->to_json();
  if (r.diverged) j["error"] = r.error;
  std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cooperative hierarchical reinforcement learning"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;

  auto* train = app.add_subcommand("train", "Train an agent from a JSON run config");
  train->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  overrides.add_to(train);

  std::string checkpoint_path;
  std::optional<int> episodes;
  std::optional<std::string> eval_out;
  std::uint64_t eval_seed = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Noise-free evaluation of a checkpoint");
  evaluate->add_option("--checkpoint", checkpoint_path, "Checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--config", config_path,
                       "Run config whose environment replaces the checkpoint's");
  evaluate->add_option("--episodes", episodes, "Episodes (per target where the task has targets)");
  evaluate->add_option("--seed", eval_seed, "Evaluation seed");
  evaluate->add_option("--out", eval_out, "Directory for eval.json and trajectory.csv");

  cher::GradCheckConfig gc;
  std::string fault = "none";
  std::optional<double> gc_lambda;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient verification");
  grad->add_option("--config", config_path, "Run config (seed and cher-fixed lambda are used)");
  grad->add_option("--seed", gc.seed, "Seed for the random networks");
  grad->add_option("--nets", gc.num_nets, "Random networks for the MLP checks");
  grad->add_option("--configs", gc.num_configs, "Random configurations for the learner checks");
  grad->add_option("--tol", gc.tolerance, "Relative tolerance");
  grad->add_option("--lambda", gc_lambda, "Cooperative weight (0 skips that check)");
  grad->add_option("--inject-fault", fault, "Corrupt an analytic gradient on purpose")
      ->check(CLI::IsMember({"none", "mlp", "cooperative"}));

  std::vector<double> ratios{0.25, 0.5, 0.75};
  std::optional<double> q_hrl;
  auto* sweep = app.add_subcommand("sweep-lambda", "cher-dynamic runs across cooperation ratios");
  sweep->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--ratios", ratios, "Cooperation ratios in [0, 1)")->delimiter(',');
  sweep->add_option("--q-hrl", q_hrl, "Standard-HRL worker return baseline");
  overrides.add_to(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const cher::RunConfig config = overrides.apply(cher::load_run_config(config_path));
      const cher::TrainResult r = cher::train(config);
      print_result(r);
      return r.diverged ? kExitFailure : 0;
    }
    if (*evaluate) {
      const cher::Checkpoint ckpt = cher::load_checkpoint(checkpoint_path);
      std::optional<cher::EnvConfig> env;
      if (!config_path.empty()) env = cher::load_run_config(config_path).env;
      const int n = episodes.value_or(
          ckpt.meta.contains("config") ? ckpt.meta["config"].value("eval_episodes", 10) : 10);
      std::ofstream trajectory;
      if (eval_out) {
        std::filesystem::create_directories(*eval_out);
        trajectory.open(std::filesystem::path(*eval_out) / "trajectory.csv");
      }
      const cher::EvalSummary s =
          cher::evaluate(ckpt, n, eval_seed, env, eval_out ? &trajectory : nullptr);
      const std::string text = s.to_json().dump(2);
      if (eval_out) std::ofstream(std::filesystem::path(*eval_out) / "eval.json") << text << '\n';
      std::cout << text << '\n';
      return 0;
    }
    if (*grad) {
      if (!config_path.empty()) {
        const cher::RunConfig c = cher::load_run_config(config_path);
        if (grad->count("--seed") == 0) gc.seed = c.seed;
        if (c.algorithm == cher::Algorithm::CherFixed) gc.lambda = *c.cooperation.lambda;
      }
      if (gc_lambda) gc.lambda = *gc_lambda;
      gc.fault = fault == "mlp"           ? cher::InjectedFault::Mlp
                 : fault == "cooperative" ? cher::InjectedFault::Cooperative
                                          : cher::InjectedFault::None;
      const cher::GradCheckReport report = cher::grad_check(gc);
      std::cout << report.format();
      const bool ok = report.passed();
      std::cout << (ok ? "grad-check passed\n" : "grad-check FAILED\n");
      return ok ? 0 : kExitFailure;
    }
    if (*sweep) {
      cher::RunConfig config = cher::load_run_config(config_path);
      if (q_hrl) config.cooperation.q_hrl = *q_hrl;
      config = overrides.apply(config);
      const auto entries = cher::sweep_lambda(config, ratios);
      bool diverged = false;
      for (const auto& e : entries) {
        std::cout << "ratio " << e.ratio << " delta " << e.delta << " final lambda "
                  << e.result.final_lambda << '\n';
        diverged = diverged || e.result.diverged;
      }
      return diverged ? kExitFailure : 0;
    }
  } catch (const cher::ValidationError& e) {
    cher::log().error("{}", e.what());
    return kExitInvalid;
  } catch (const cher::Error& e) {
    cher::log().error("{}", e.what());
    return kExitFailure;
  }
  return 0;
}
