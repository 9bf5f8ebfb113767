#pragma once

#include <string>
#include <vector>

#include "gfp/autodiff.hpp"

namespace gfp::ad {

struct ParamTensor {
  std::string name;
  Mat value;
  Mat grad;             // same shape, zeroed between steps
  bool has_grad = false;
};

struct ParamSet {
  std::vector<ParamTensor> tensors;

  std::size_t total_values() const;
  void zero_grads();
  void alloc_grads();  // sizes grad buffers to match values
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr_decay_per_epoch = 0.92;  // multiplicative, applied by end_epoch()
};

/// Adam with bias correction. The configured decay acts on the learning rate
/// once per epoch; gradients are zeroed after each step.
class Adam {
 public:
  Adam(const ParamSet& params, const AdamConfig& cfg);

  /// Throws "no gradients" unless every tensor has a populated gradient.
  /// Tensors update independently, so extra threads keep results identical.
  void step(ParamSet& params, int threads = 1);

  void end_epoch() { lr_ *= cfg_.lr_decay_per_epoch; }

  double current_lr() const { return lr_; }
  long step_count() const { return step_; }

 private:
  AdamConfig cfg_;
  double lr_;
  long step_ = 0;
  std::vector<Mat> m_, v_;
};

}  // namespace gfp::ad
