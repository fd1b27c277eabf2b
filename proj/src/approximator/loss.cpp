#include "cher/loss.hpp"

#include <cmath>

namespace cher {

LossValue huber(const Vec& pred, const Vec& target) {
  require_shape(pred.size() == target.size(), "huber: prediction and target lengths differ");
  LossValue out;
  out.grad.resize(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    if (std::abs(d) <= kHuberThreshold) {
      out.loss += 0.5 * d * d;
      out.grad[i] = d;
    } else {
      out.loss += kHuberThreshold * (std::abs(d) - 0.5 * kHuberThreshold);
      out.grad[i] = d > 0.0 ? kHuberThreshold : -kHuberThreshold;
    }
  }
  return out;
}

}  // namespace cher
