#include "cher/harness.hpp"
#include "cher/log.hpp"

#include <chrono>
#include <sstream>

namespace cher {
namespace fs = std::filesystem;
namespace {

std::string num(double x) { return nlohmann::json(x).dump(); }
std::string num(const std::optional<double>& x) { return x ? num(*x) : ""; }

std::ofstream open_truncated(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

void write_line(std::ofstream& out, const std::string& line) {
  out << line << '\n';
  out.flush();
}

}  // namespace

nlohmann::json MetricsRecord::to_json() const {
  nlohmann::json j = {{"kind", kind},
                      {"step", step},
                      {"episode_return", episode_return},
                      {"success_rate", success_rate ? nlohmann::json(*success_rate) : nlohmann::json()},
                      {"worker_intrinsic_return", worker_intrinsic_return},
                      {"lambda", lambda},
                      {"q_w_mean", q_w_mean ? nlohmann::json(*q_w_mean) : nlohmann::json()}};
  for (const auto& [k, v] : extra) j[k] = v;
  return j;
}

MetricsWriter::MetricsWriter(const fs::path& dir)
    : jsonl_(open_truncated(dir / "metrics.jsonl")),
      csv_(open_truncated(dir / "metrics.csv")),
      timing_(open_truncated(dir / "timing.jsonl")) {
  write_line(csv_, "kind,step,episode_return,success_rate,worker_intrinsic_return,lambda,q_w_mean");
}

void MetricsWriter::write(const MetricsRecord& r) {
  if (r.step < last_step_) throw ValidationError("metrics steps must not decrease");
  last_step_ = r.step;
  write_line(jsonl_, r.to_json().dump());
  std::ostringstream row;
  row << r.kind << ',' << r.step << ',' << num(r.episode_return) << ',' << num(r.success_rate)
      << ',' << num(r.worker_intrinsic_return) << ',' << num(r.lambda) << ',' << num(r.q_w_mean);
  write_line(csv_, row.str());
}

void MetricsWriter::write_timing(std::int64_t step, double wall_time) {
  write_line(timing_, nlohmann::json({{"step", step}, {"wall_time", wall_time}}).dump());
}

TrainResult train(const RunConfig& config) {
  config.validate();
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  {
    std::ofstream out = open_truncated(dir / "config.json");
    out << to_json(config).dump(2) << '\n';
  }
  MetricsWriter metrics(dir);
  std::ofstream lambda_trace = open_truncated(dir / "lambda_trace.csv");
  write_line(lambda_trace, "update,step,lambda,q_w,delta");

  Trainer trainer(config);
  trainer.on_lambda_update([&](std::int64_t update, std::int64_t step, const LagrangeState& l,
                               double q_w) {
    write_line(lambda_trace, std::to_string(update) + "," + std::to_string(step) + "," +
                                 num(l.lambda) + "," + num(q_w) + "," + num(l.delta));
  });

  const auto start = std::chrono::steady_clock::now();
  auto eval_env = make_environment(config.env);
  TrainResult result;

  auto checkpoint_and_eval = [&](std::int64_t step) {
    const EvalSummary s = evaluate(trainer.agent().policies, config.hierarchy, *eval_env,
                                   config.eval_episodes, config.seed);
    MetricsRecord r;
    r.kind = "eval";
    r.step = step;
    r.episode_return = s.mean_return;
    r.success_rate = s.success_rate;
    r.worker_intrinsic_return = s.mean_intrinsic_return;
    r.lambda = trainer.lagrange().lambda;
    r.q_w_mean = trainer.last_q_w();
    for (const auto& [label, rate] : s.target_success) r.extra["success_" + label] = rate;
    metrics.write(r);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    metrics.write_timing(step, elapsed);
    result.final_checkpoint = dir / ("ckpt_" + std::to_string(step) + ".ckpt");
    save_checkpoint(result.final_checkpoint, trainer.checkpoint());
    result.final_eval = s;
    log().info("step {} eval return {:.3f}{} lambda {:.4g}", step, s.mean_return,
               s.success_rate ? fmt::format(" success {:.2f}", *s.success_rate) : "",
               trainer.lagrange().lambda);
  };

  checkpoint_and_eval(0);
  try {
    while (trainer.env_steps() < config.total_steps) {
      if (auto ep = trainer.step()) {
        MetricsRecord r;
        r.step = trainer.env_steps();
        r.episode_return = ep->episode_return;
        if (eval_env->has_success_metric()) r.success_rate = ep->success ? 1.0 : 0.0;
        r.worker_intrinsic_return = ep->worker_intrinsic_return;
        r.lambda = trainer.lagrange().lambda;
        r.q_w_mean = trainer.last_q_w();
        metrics.write(r);
        log().debug("step {} episode return {:.3f}", r.step, r.episode_return);
      }
      const std::int64_t s = trainer.env_steps();
      if (s % config.eval_every == 0 || s == config.total_steps) checkpoint_and_eval(s);
    }
  } catch (const NumericError& e) {
    result.diverged = true;
    result.error = e.what();
    // Parameter updates throw before mutating, so the current networks are the last sane ones.
    save_checkpoint(dir / "last_sane.ckpt", trainer.checkpoint());
    log().error("training diverged at step {}: {}", trainer.env_steps(), e.what());
  }
  result.steps = trainer.env_steps();
  result.final_q_w = trainer.last_q_w();
  result.final_lambda = trainer.lagrange().lambda;
  return result;
}

std::vector<SweepEntry> sweep_lambda(const RunConfig& config, const std::vector<double>& ratios) {
  const auto& co = config.cooperation;
  if (!co.q_hrl)
    throw ValidationError(
        "sweep-lambda needs the standard-HRL baseline q_hrl (the worker's expected intrinsic "
        "return without cooperation). Train the same config with \"algorithm\": \"hrl\", read "
        "q_w_mean from the last line of its metrics.jsonl, then set cooperation.q_hrl or pass "
        "--q-hrl.");
  if (ratios.empty()) throw ValidationError("sweep-lambda needs at least one ratio");
  for (double r : ratios)
    if (!(r >= 0.0 && r < 1.0)) throw ValidationError("cooperation ratios must lie in [0, 1)");

  const fs::path base = config.output_dir;
  fs::create_directories(base);
  std::ofstream summary = open_truncated(base / "sweep.jsonl");
  std::vector<SweepEntry> out;
  for (double ratio : ratios) {
    RunConfig c = config;
    c.algorithm = Algorithm::CherDynamic;
    c.cooperation.lambda.reset();
    c.cooperation.delta.reset();
    c.cooperation.cooperation_ratio = ratio;
    c.output_dir = (base / ("ratio_" + num(ratio))).string();
    SweepEntry e;
    e.ratio = ratio;
    e.delta = delta_for_cooperation_ratio(ratio, *co.q_hrl, co.q_max);
    log().info("sweep: ratio {} -> delta {}", ratio, e.delta);
    e.result = train(c);
    nlohmann::json line = {{"ratio", ratio},
                           {"delta", e.delta},
                           {"final_lambda", e.result.final_lambda},
                           {"final_q_w", e.result.final_q_w ? nlohmann::json(*e.result.final_q_w)
                                                            : nlohmann::json()},
                           {"diverged", e.result.diverged},
                           {"run_dir", c.output_dir}};
    if (e.result.final_eval) line["final_eval"] = e.result.final_eval->to_json();
    write_line(summary, line.dump());
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace cher
