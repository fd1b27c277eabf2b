#include "cher/gradcheck.hpp"

#include "cher/learner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cher {

Vec oracle_forward(const Mlp& net, const Vec& params, const Vec& x, std::vector<char>* pattern) {
  const auto& dims = net.layer_dims();
  require_shape(x.size() == dims.front(), "oracle_forward: input size mismatch");
  require_shape(params.size() == net.num_params(), "oracle_forward: parameter count mismatch");
  std::vector<double> in(x.data(), x.data() + x.size());
  Eigen::Index at = 0;
  const int layers = static_cast<int>(dims.size()) - 1;
  for (int l = 0; l < layers; ++l) {
    const int n_in = dims[l];
    const int n_out = dims[l + 1];
    const Eigen::Index w = at;
    const Eigen::Index b = at + static_cast<Eigen::Index>(n_in) * n_out;
    std::vector<double> out(static_cast<std::size_t>(n_out));
    for (int r = 0; r < n_out; ++r) {
      double z = params[b + r];
      for (int c = 0; c < n_in; ++c) z += params[w + r + static_cast<Eigen::Index>(c) * n_out] * in[c];
      if (l + 1 < layers) {
        if (pattern) pattern->push_back(z > 0.0);
        out[r] = z > 0.0 ? z : 0.0;
      } else {
        const double act = net.output_activation() == OutputActivation::Tanh ? std::tanh(z) : z;
        out[r] = net.output_offset()[r] + net.output_scale()[r] * act;
      }
    }
    in = std::move(out);
    at = b + n_out;
  }
  return Eigen::Map<const Vec>(in.data(), static_cast<Eigen::Index>(in.size()));
}

FiniteDifference central_difference(const PatternedObjective& f, const Vec& x, double h) {
  FiniteDifference fd;
  fd.gradient.resize(x.size());
  fd.valid.assign(static_cast<std::size_t>(x.size()), 1);
  Vec probe = x;
  std::vector<char> plus, minus;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    plus.clear();
    minus.clear();
    probe[i] = x[i] + h;
    const double fp = f(probe, &plus);
    probe[i] = x[i] - h;
    const double fm = f(probe, &minus);
    probe[i] = x[i];
    fd.gradient[i] = (fp - fm) / (2.0 * h);
    fd.valid[static_cast<std::size_t>(i)] = plus == minus;
  }
  return fd;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

double worker_q_objective(const Policies& p, const Vec& theta, const WorkerBatch& b,
                          std::vector<char>* pattern) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    const Vec sg = concat(b.states.col(j), b.goals.col(j));
    const Vec a = oracle_forward(p.worker_actor, theta, sg, pattern);
    total += oracle_forward(p.worker_critic1, p.worker_critic1.params(), concat(sg, a), pattern)[0];
  }
  return total / static_cast<double>(b.size());
}

double manager_q_objective(const Policies& p, const Vec& theta, const ManagerBatch& b,
                           std::vector<char>* pattern) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    const Vec s = b.states.col(j);
    const Vec g = oracle_forward(p.manager_actor, theta, s, pattern);
    total += oracle_forward(p.manager_critic1, p.manager_critic1.params(), concat(s, g), pattern)[0];
  }
  return total / static_cast<double>(b.size());
}

double cooperative_surrogate(const Policies& p, const GoalSpec& spec, const Vec& theta,
                             const ManagerBatch& b, std::vector<char>* pattern) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    const Vec s = b.states.col(j);
    const Vec g0 = oracle_forward(p.manager_actor, p.manager_actor.params(), s);
    const Vec g = oracle_forward(p.manager_actor, theta, s, pattern);
    const Vec a = oracle_forward(p.worker_actor, p.worker_actor.params(), concat(s, g), pattern);
    total += intrinsic_reward(spec, s, g, b.first_next_states.col(j));
    total += oracle_forward(p.worker_critic1, p.worker_critic1.params(), concat(s, g0, a), pattern)[0];
  }
  return total / static_cast<double>(b.size());
}

namespace {

void compare(CheckResult& r, const Vec& analytic, const FiniteDifference& fd) {
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    if (!fd.valid[static_cast<std::size_t>(i)]) {
      ++r.skipped_coordinates;
      continue;
    }
    ++r.coordinates;
    r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic[i], fd.gradient[i]));
  }
  ++r.cases;
}

CheckResult named(const char* name) {
  CheckResult r;
  r.name = name;
  return r;
}

std::vector<int> random_hidden(Rng& rng) {
  std::vector<int> h(1 + rng.index(3));
  for (int& w : h) w = 2 + static_cast<int>(rng.index(7));
  return h;
}

Mlp random_net(Rng& rng) {
  std::vector<int> dims{1 + static_cast<int>(rng.index(6))};
  for (int w : random_hidden(rng)) dims.push_back(w);
  const int out = 1 + static_cast<int>(rng.index(4));
  dims.push_back(out);
  const bool tanh = rng.bernoulli(0.5);
  Vec scale = Vec::Ones(out);
  Vec offset = Vec::Zero(out);
  if (rng.bernoulli(0.5)) {
    scale = rng.uniform_vec(Vec::Constant(out, 0.5), Vec::Constant(out, 3.0));
    offset = rng.normal_vec(out);
  }
  return Mlp::fan_in_init(dims, tanh ? OutputActivation::Tanh : OutputActivation::Identity, scale,
                          offset, rng);
}

struct RandomSetup {
  GoalSpec spec;
  Policies policies;
  ManagerBatch manager;
  WorkerBatch worker;
};

RandomSetup random_setup(Rng& rng) {
  RandomSetup r;
  const int sd = 2 + static_cast<int>(rng.index(5));
  const int gd = 1 + static_cast<int>(rng.index(std::min(sd, 3)));
  const int ad = 1 + static_cast<int>(rng.index(3));
  std::vector<int> idx(static_cast<std::size_t>(sd));
  for (int i = 0; i < sd; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  r.spec.state_indices.assign(idx.begin(), idx.begin() + gd);
  r.spec.scale = rng.uniform_vec(Vec::Constant(gd, 0.5), Vec::Constant(gd, 5.0));
  r.spec.offset = rng.normal_vec(gd);
  r.spec.mode = rng.bernoulli(0.5) ? GoalMode::Egocentric : GoalMode::Absolute;
  const Bounds actions{Vec::Constant(ad, -1.0), rng.uniform_vec(Vec::Constant(ad, 0.5),
                                                                Vec::Constant(ad, 2.0))};
  r.policies = Policies::create(sd, actions, r.spec, random_hidden(rng), rng);

  const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.index(8));
  auto gaussian = [&](Eigen::Index rows, double std) {
    Mat m(rows, n);
    for (Eigen::Index j = 0; j < n; ++j) m.col(j) = rng.normal_vec(rows, std);
    return m;
  };
  r.manager.states = gaussian(sd, 2.0);
  r.manager.first_next_states = r.manager.states + gaussian(sd, 1.0);
  r.manager.goals = gaussian(gd, 1.0);
  r.manager.rewards = Vec::Zero(n);
  r.manager.next_states = r.manager.first_next_states;
  r.manager.dones = Vec::Zero(n);
  r.worker.states = gaussian(sd, 2.0);
  r.worker.goals = gaussian(gd, 2.0);
  r.worker.actions = gaussian(ad, 1.0);
  r.worker.rewards = Vec::Zero(n);
  r.worker.next_states = r.worker.states;
  r.worker.next_goals = r.worker.goals;
  r.worker.dones = Vec::Zero(n);
  return r;
}

}  // namespace

bool GradCheckReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [&](const CheckResult& c) { return c.passed(tolerance); });
}

std::string GradCheckReport::format() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    if (c.skipped) {
      out << "SKIP " << c.name << ": " << c.note << '\n';
      continue;
    }
    out << (c.passed(tolerance) ? "PASS " : "FAIL ") << c.name << ": " << c.cases << " cases, "
        << c.coordinates << " coordinates (" << c.skipped_coordinates
        << " at kinks), max rel error " << c.max_rel_error << " (tol " << tolerance << ")\n";
  }
  return out.str();
}

GradCheckReport grad_check(const GradCheckConfig& config) {
  if (config.num_nets < 1 || config.num_configs < 1 || !(config.tolerance > 0.0) ||
      !(config.lambda >= 0.0))
    throw ValidationError("grad-check needs positive counts and tolerance, and lambda >= 0");
  GradCheckReport report;
  report.tolerance = config.tolerance;

  CheckResult params = named("mlp_param_gradient"), inputs = named("mlp_input_gradient");
  Rng net_rng = Rng::stream(config.seed, "gradcheck_nets");
  for (int c = 0; c < config.num_nets; ++c) {
    const Mlp net = random_net(net_rng);
    const Vec x = net_rng.normal_vec(net.input_dim(), 1.5);
    const Vec u = net_rng.normal_vec(net.output_dim());
    GradientBundle g = net.backward(x, u);
    if (config.fault == InjectedFault::Mlp) g.param_grads[0] += 1.0;
    compare(params, g.param_grads,
            central_difference(
                [&](const Vec& th, std::vector<char>* pat) {
                  return u.dot(oracle_forward(net, th, x, pat));
                },
                net.params()));
    compare(inputs, g.input_grads,
            central_difference(
                [&](const Vec& xi, std::vector<char>* pat) {
                  return u.dot(oracle_forward(net, net.params(), xi, pat));
                },
                x));
  }

  CheckResult worker = named("worker_actor_gradient"), manager = named("manager_dpg_gradient"),
              coop = named("cooperative_manager_gradient");
  Rng cfg_rng = Rng::stream(config.seed, "gradcheck_configs");
  for (int c = 0; c < config.num_configs; ++c) {
    const RandomSetup s = random_setup(cfg_rng);
    const Policies& p = s.policies;
    compare(worker, worker_actor_gradient(p, s.worker),
            central_difference(
                [&](const Vec& th, std::vector<char>* pat) {
                  return worker_q_objective(p, th, s.worker, pat);
                },
                p.worker_actor.params()));
    compare(manager, manager_dpg_gradient(p, s.manager),
            central_difference(
                [&](const Vec& th, std::vector<char>* pat) {
                  return manager_q_objective(p, th, s.manager, pat);
                },
                p.manager_actor.params()));
    if (config.lambda == 0.0) continue;
    Vec g = cooperative_manager_gradient(p, s.spec, s.manager, config.lambda);
    if (config.fault == InjectedFault::Cooperative) g[0] += 1.0;
    compare(coop, g,
            central_difference(
                [&](const Vec& th, std::vector<char>* pat) {
                  return manager_q_objective(p, th, s.manager, pat) +
                         config.lambda * cooperative_surrogate(p, s.spec, th, s.manager, pat);
                },
                p.manager_actor.params()));
  }
  if (config.lambda == 0.0) {
    coop.skipped = true;
    coop.note = "lambda = 0, the cooperative term is not evaluated";
  }
  report.checks = {params, inputs, worker, manager, coop};
  return report;
}

}  // namespace cher
