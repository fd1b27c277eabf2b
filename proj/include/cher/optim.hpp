#pragma once

#include "cher/common.hpp"

#include <cstdint>

namespace cher {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Vec first_moment;
  Vec second_moment;
  std::int64_t step_count = 0;
  AdamConfig config;

  AdamState() = default;
  AdamState(Eigen::Index num_params, AdamConfig cfg);
};

// One bias-corrected Adam descent step: params -= lr * m_hat / (sqrt(v_hat) + eps).
// Throws NumericError (carrying the offending index) on a non-finite gradient;
// neither params nor state are touched in that case.
void adam_step(Vec& params, const Vec& grads, AdamState& state);

}  // namespace cher
