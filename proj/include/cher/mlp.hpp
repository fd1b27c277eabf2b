#pragma once

#include "cher/common.hpp"
#include "cher/rng.hpp"

#include <string>
#include <vector>

namespace cher {

enum class OutputActivation { Tanh, Identity };

std::string to_string(OutputActivation act);
OutputActivation output_activation_from_string(const std::string& name);

// Gradients of upstream . f(x) for a single input.
struct GradientBundle {
  Vec param_grads;
  Vec input_grads;
};

// Gradients for a batch (one sample per column). Parameter gradients are
// summed over the batch; input gradients are kept per sample.
struct BatchGradient {
  Vec param_grads;
  Mat input_grads;
};

/// Fully connected network: ReLU hidden layers, and an output layer
/// y = offset + scale * act(W x + b) with act in {tanh, identity}.
///
/// All parameters live in one flat vector (per layer: column-major weight
/// block followed by the bias), which is what the optimizer, Polyak
/// averaging and the checkpoint format operate on.
class Mlp {
 public:
  // Intermediate values of a batched forward pass, needed by backward().
  struct Trace {
    std::vector<Mat> inputs;  // inputs[l] is the input to layer l
    std::vector<Mat> pre;     // pre-activations of every layer
    Mat output;
  };

  Mlp() = default;
  // All parameters zero.
  Mlp(std::vector<int> layer_dims, OutputActivation output_activation, Vec output_scale,
      Vec output_offset);
  Mlp(std::vector<int> layer_dims, OutputActivation output_activation);

  // Weights and biases uniform in +-1/sqrt(fan_in).
  static Mlp fan_in_init(std::vector<int> layer_dims, OutputActivation output_activation,
                         Vec output_scale, Vec output_offset, Rng& rng);

  int input_dim() const { return dims_.empty() ? 0 : dims_.front(); }
  int output_dim() const { return dims_.empty() ? 0 : dims_.back(); }
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  Eigen::Index num_params() const { return params_.size(); }
  bool empty() const { return dims_.empty(); }

  const std::vector<int>& layer_dims() const { return dims_; }
  OutputActivation output_activation() const { return activation_; }
  const Vec& output_scale() const { return scale_; }
  const Vec& output_offset() const { return offset_; }

  const Vec& params() const { return params_; }
  Vec& mutable_params() { return params_; }
  void set_params(const Vec& params);

  Eigen::Map<const Mat> weight(int layer) const;
  Eigen::Map<const Vec> bias(int layer) const;
  Eigen::Map<Mat> weight(int layer);
  Eigen::Map<Vec> bias(int layer);

  bool same_architecture(const Mlp& other) const;
  // Output range for a tanh head; unbounded heads report +-inf.
  Bounds output_bounds() const;

  Vec forward(const Vec& x) const;
  Mat forward_batch(const Mat& x) const;
  Trace trace(const Mat& x) const;

  GradientBundle backward(const Vec& x, const Vec& upstream) const;
  BatchGradient backward(const Trace& trace, const Mat& upstream) const;

 private:
  Eigen::Index weight_offset(int layer) const { return offsets_[layer]; }
  Eigen::Index bias_offset(int layer) const {
    return offsets_[layer] + static_cast<Eigen::Index>(dims_[layer]) * dims_[layer + 1];
  }
  void validate() const;

  std::vector<int> dims_;
  std::vector<Eigen::Index> offsets_;
  OutputActivation activation_ = OutputActivation::Identity;
  Vec scale_;
  Vec offset_;
  Vec params_;
};

// target <- tau * online + (1 - tau) * target
void polyak_update(Mlp& target, const Mlp& online, double tau);

}  // namespace cher
