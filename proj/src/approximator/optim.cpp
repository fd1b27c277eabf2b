#include "cher/optim.hpp"

#include <cmath>
#include <string>

namespace cher {

AdamState::AdamState(Eigen::Index num_params, AdamConfig cfg)
    : first_moment(Vec::Zero(num_params)), second_moment(Vec::Zero(num_params)), config(cfg) {
  if (!(cfg.learning_rate > 0.0) || !(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0) || !(cfg.epsilon > 0.0))
    throw ValidationError("invalid Adam hyperparameters");
}

void adam_step(Vec& params, const Vec& grads, AdamState& state) {
  require_shape(params.size() == grads.size() && params.size() == state.first_moment.size() &&
                    params.size() == state.second_moment.size(),
                "adam: parameter, gradient and moment sizes differ");
  for (Eigen::Index i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i]))
      throw NumericError("adam: non-finite gradient at index " + std::to_string(i), i);
  }
  const auto& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  state.first_moment = c.beta1 * state.first_moment + (1.0 - c.beta1) * grads;
  state.second_moment =
      c.beta2 * state.second_moment + (1.0 - c.beta2) * grads.cwiseProduct(grads);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  params.array() -= c.learning_rate * (state.first_moment.array() / correction1) /
                    ((state.second_moment.array() / correction2).sqrt() + c.epsilon);
}

}  // namespace cher
