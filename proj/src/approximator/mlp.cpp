#include "cher/mlp.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace cher {

std::string to_string(OutputActivation act) {
  return act == OutputActivation::Tanh ? "tanh" : "identity";
}

OutputActivation output_activation_from_string(const std::string& name) {
  if (name == "tanh") return OutputActivation::Tanh;
  if (name == "identity") return OutputActivation::Identity;
  throw ValidationError("unknown output activation '" + name + "'");
}

Mlp::Mlp(std::vector<int> layer_dims, OutputActivation output_activation, Vec output_scale,
         Vec output_offset)
    : dims_(std::move(layer_dims)),
      activation_(output_activation),
      scale_(std::move(output_scale)),
      offset_(std::move(output_offset)) {
  validate();
  Eigen::Index total = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(dims_[l] + 1) * dims_[l + 1];
  }
  params_ = Vec::Zero(total);
}

Mlp::Mlp(std::vector<int> layer_dims, OutputActivation output_activation)
    : Mlp(layer_dims, output_activation, Vec::Ones(layer_dims.empty() ? 0 : layer_dims.back()),
          Vec::Zero(layer_dims.empty() ? 0 : layer_dims.back())) {}

void Mlp::validate() const {
  require_shape(dims_.size() >= 2, "mlp needs at least an input and an output dimension");
  for (int d : dims_) require_shape(d > 0, "mlp layer dimensions must be positive");
  require_shape(scale_.size() == dims_.back() && offset_.size() == dims_.back(),
                "mlp output scale/offset must match output dimension");
}

Mlp Mlp::fan_in_init(std::vector<int> layer_dims, OutputActivation output_activation,
                     Vec output_scale, Vec output_offset, Rng& rng) {
  Mlp net(std::move(layer_dims), output_activation, std::move(output_scale),
          std::move(output_offset));
  for (int l = 0; l < net.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(net.dims_[l]));
    auto w = net.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
    auto b = net.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.uniform(-bound, bound);
  }
  return net;
}

void Mlp::set_params(const Vec& params) {
  require_shape(params.size() == params_.size(), "parameter vector size mismatch");
  params_ = params;
}

Eigen::Map<const Mat> Mlp::weight(int layer) const {
  return {params_.data() + weight_offset(layer), dims_[layer + 1], dims_[layer]};
}
Eigen::Map<const Vec> Mlp::bias(int layer) const {
  return {params_.data() + bias_offset(layer), dims_[layer + 1]};
}
Eigen::Map<Mat> Mlp::weight(int layer) {
  return {params_.data() + weight_offset(layer), dims_[layer + 1], dims_[layer]};
}
Eigen::Map<Vec> Mlp::bias(int layer) {
  return {params_.data() + bias_offset(layer), dims_[layer + 1]};
}

bool Mlp::same_architecture(const Mlp& other) const {
  return dims_ == other.dims_ && activation_ == other.activation_;
}

Bounds Mlp::output_bounds() const {
  if (activation_ == OutputActivation::Tanh) {
    Vec half = scale_.cwiseAbs();
    return {offset_ - half, offset_ + half};
  }
  const double inf = std::numeric_limits<double>::infinity();
  return {Vec::Constant(output_dim(), -inf), Vec::Constant(output_dim(), inf)};
}

Vec Mlp::forward(const Vec& x) const {
  Mat out = forward_batch(x);
  return out.col(0);
}

Mat Mlp::forward_batch(const Mat& x) const {
  require_shape(!empty(), "forward on an empty network");
  require_shape(x.rows() == input_dim(),
                "input has " + std::to_string(x.rows()) + " rows, network expects " +
                    std::to_string(input_dim()));
  Mat a = x;
  for (int l = 0; l < num_layers(); ++l) {
    Mat z = weight(l) * a;
    z.colwise() += bias(l);
    if (l + 1 < num_layers()) {
      a = z.cwiseMax(0.0);
    } else {
      if (activation_ == OutputActivation::Tanh) z = z.array().tanh();
      a = (z.array().colwise() * scale_.array()).colwise() + offset_.array();
    }
  }
  return a;
}

Mlp::Trace Mlp::trace(const Mat& x) const {
  require_shape(!empty(), "forward on an empty network");
  require_shape(x.rows() == input_dim(),
                "input has " + std::to_string(x.rows()) + " rows, network expects " +
                    std::to_string(input_dim()));
  Trace t;
  t.inputs.reserve(num_layers());
  t.pre.reserve(num_layers());
  Mat a = x;
  for (int l = 0; l < num_layers(); ++l) {
    t.inputs.push_back(a);
    Mat z = weight(l) * a;
    z.colwise() += bias(l);
    t.pre.push_back(z);
    if (l + 1 < num_layers()) {
      a = z.cwiseMax(0.0);
    } else {
      if (activation_ == OutputActivation::Tanh) z = z.array().tanh();
      a = (z.array().colwise() * scale_.array()).colwise() + offset_.array();
    }
  }
  t.output = std::move(a);
  return t;
}

BatchGradient Mlp::backward(const Trace& trace, const Mat& upstream) const {
  require_shape(upstream.rows() == output_dim() && upstream.cols() == trace.output.cols(),
                "upstream gradient shape does not match network output");
  BatchGradient g;
  g.param_grads = Vec::Zero(params_.size());

  const int last = num_layers() - 1;
  Mat delta = upstream.array().colwise() * scale_.array();
  if (activation_ == OutputActivation::Tanh) {
    delta.array() *= 1.0 - trace.pre[last].array().tanh().square();
  }
  for (int l = last; l >= 0; --l) {
    Eigen::Map<Mat> dw(g.param_grads.data() + weight_offset(l), dims_[l + 1], dims_[l]);
    Eigen::Map<Vec> db(g.param_grads.data() + bias_offset(l), dims_[l + 1]);
    dw.noalias() = delta * trace.inputs[l].transpose();
    db = delta.rowwise().sum();
    Mat upstream_in = weight(l).transpose() * delta;
    if (l > 0) {
      delta = (trace.pre[l - 1].array() > 0.0).select(upstream_in.array(), 0.0).matrix();
    } else {
      g.input_grads = std::move(upstream_in);
    }
  }
  return g;
}

GradientBundle Mlp::backward(const Vec& x, const Vec& upstream) const {
  BatchGradient g = backward(trace(x), upstream);
  return {std::move(g.param_grads), g.input_grads.col(0)};
}

void polyak_update(Mlp& target, const Mlp& online, double tau) {
  require_shape(target.same_architecture(online), "polyak update across different architectures");
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("polyak tau must lie in (0, 1]");
  if (tau == 1.0) {
    target.mutable_params() = online.params();
    return;
  }
  target.mutable_params() = tau * online.params() + (1.0 - tau) * target.params();
}

}  // namespace cher
