#pragma once

#include "cher/hierarchy.hpp"
#include "cher/mlp.hpp"
#include "cher/replay.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cher {

// Forward pass written out loop by loop from the flat parameter vector, so it
// shares no code with Mlp::forward. When `pattern` is given, one flag per
// hidden unit (pre-activation > 0) is appended to it.
Vec oracle_forward(const Mlp& net, const Vec& params, const Vec& x,
                   std::vector<char>* pattern = nullptr);

// Scalar objective of a parameter vector; appends its ReLU pattern when asked.
using PatternedObjective = std::function<double(const Vec& params, std::vector<char>* pattern)>;

struct FiniteDifference {
  Vec gradient;
  // false where the ReLU pattern differs between x + h e_i and x - h e_i, i.e.
  // the difference straddles a kink and says nothing about the derivative.
  std::vector<char> valid;
};

FiniteDifference central_difference(const PatternedObjective& f, const Vec& x, double h = 1e-6);

// |a - b| / max(|a|, |b|, 1e-3)
double relative_error(double a, double b);

// Objectives whose gradients the learner computes analytically, each a mean
// over the batch and evaluated with oracle_forward.
//   worker:      Q_w1(s, g, pi_w(s, g; theta))
//   manager:     Q_m1(s, pi_m(s; theta))
//   cooperative: r_w(s, pi_m(s; theta), s1) + Q_w1(s, g0, pi_w(s, pi_m(s; theta)))
//                with g0 = pi_m(s) frozen at the current parameters
double worker_q_objective(const Policies& p, const Vec& worker_actor_params, const WorkerBatch& b,
                          std::vector<char>* pattern = nullptr);
double manager_q_objective(const Policies& p, const Vec& manager_actor_params,
                           const ManagerBatch& b, std::vector<char>* pattern = nullptr);
double cooperative_surrogate(const Policies& p, const GoalSpec& spec,
                             const Vec& manager_actor_params, const ManagerBatch& b,
                             std::vector<char>* pattern = nullptr);

enum class InjectedFault { None, Mlp, Cooperative };

struct GradCheckConfig {
  int num_nets = 100;
  int num_configs = 100;
  double tolerance = 1e-4;
  double lambda = 1.0;  // weight of the cooperative term; 0 skips that check
  std::uint64_t seed = 0;
  InjectedFault fault = InjectedFault::None;
};

struct CheckResult {
  std::string name;
  int cases = 0;
  long coordinates = 0;
  long skipped_coordinates = 0;  // kinks
  double max_rel_error = 0.0;
  bool skipped = false;
  std::string note;

  bool passed(double tolerance) const { return skipped || max_rel_error <= tolerance; }
};

struct GradCheckReport {
  double tolerance = 1e-4;
  std::vector<CheckResult> checks;

  bool passed() const;
  std::string format() const;  // one line per check
};

GradCheckReport grad_check(const GradCheckConfig& config);

}  // namespace cher
