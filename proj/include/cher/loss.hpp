#pragma once

#include "cher/common.hpp"

namespace cher {

struct LossValue {
  double loss = 0.0;
  Vec grad;  // d loss / d pred
};

inline constexpr double kHuberThreshold = 1.0;

// Summed Huber loss: 0.5 d^2 for |d| <= 1, |d| - 0.5 beyond.
LossValue huber(const Vec& pred, const Vec& target);

}  // namespace cher
