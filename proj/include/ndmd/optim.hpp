#pragma once

#include <vector>

#include "ndmd/dense.hpp"
#include "ndmd/nn.hpp"

namespace ndmd::optim {

/// Adam hyperparameters. Defaults are the training configuration used
/// throughout: decay is folded into the gradient as g <- g + wd * p.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-15;
  double weight_decay = 1e-6;
};

/// Bias-corrected Adam over a ParamSet. Moments are kept per tensor and
/// the step counter is shared, so two consecutive step() calls reproduce
/// a scripted two-step trace bit for bit.
class Adam {
 public:
  Adam(const nn::ParamSet& shape, const AdamConfig& cfg = {});

  /// One update in place. grads must match params tensor-for-tensor.
  /// Throws DivergenceError naming the first tensor with a non-finite
  /// gradient.
  void step(nn::ParamSet& params, const std::vector<RealMat>& grads,
            double lr);

  long steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<RealMat> m_, v_;
  long t_ = 0;
};

/// Cosine annealing: min + (base - min) * (1 + cos(pi * epoch / total)) / 2.
double cosine_lr(double base_lr, double min_lr, long epoch, long total_epochs);

}  // namespace ndmd::optim
