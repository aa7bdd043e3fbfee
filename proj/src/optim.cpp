#include "ndmd/optim.hpp"

#include <cmath>
#include <string>

#include "ndmd/errors.hpp"

namespace ndmd::optim {

Adam::Adam(const nn::ParamSet& shape, const AdamConfig& cfg) : cfg_(cfg) {
  m_.reserve(shape.tensors.size());
  v_.reserve(shape.tensors.size());
  for (const RealMat& t : shape.tensors) {
    m_.emplace_back(t.rows, t.cols);
    v_.emplace_back(t.rows, t.cols);
  }
}

void Adam::step(nn::ParamSet& params, const std::vector<RealMat>& grads,
                double lr) {
  if (params.tensors.size() != m_.size() || grads.size() != m_.size())
    throw ShapeError("adam_step: tensor count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < m_.size(); ++i) {
    RealMat& p = params.tensors[i];
    const RealMat& gin = grads[i];
    if (gin.rows != p.rows || gin.cols != p.cols)
      throw ShapeError("adam_step: gradient shape mismatch at tensor " +
                       std::to_string(i));
    if (!all_finite(gin))
      throw DivergenceError(
          "adam_step: non-finite gradient at tensor " + std::to_string(i),
          static_cast<long>(i));
    RealMat& m = m_[i];
    RealMat& v = v_[i];
    for (size_t j = 0; j < p.size(); ++j) {
      const double g = gin.v[j] + cfg_.weight_decay * p.v[j];
      m.v[j] = cfg_.beta1 * m.v[j] + (1.0 - cfg_.beta1) * g;
      v.v[j] = cfg_.beta2 * v.v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m.v[j] / c1;
      const double vhat = v.v[j] / c2;
      p.v[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double cosine_lr(double base_lr, double min_lr, long epoch,
                 long total_epochs) {
  if (total_epochs <= 0 || epoch < 0 || epoch > total_epochs)
    throw Error("cosine_lr: epoch out of range");
  const double phase =
      M_PI * static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return min_lr + (base_lr - min_lr) * (1.0 + std::cos(phase)) / 2.0;
}

}  // namespace ndmd::optim
