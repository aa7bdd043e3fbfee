#pragma once

#include <vector>

#include "ndmd/ad.hpp"
#include "ndmd/dense.hpp"
#include "ndmd/rng.hpp"

namespace ndmd::nn {

enum class Activation { Sine, Elu };

/// Shape and activation of one MLP. hidden_layers counts the activated
/// layers, so the net has hidden_layers + 1 affine stages.
struct NetworkSpec {
  int input_dim = 1;
  int hidden_width = 64;
  int hidden_layers = 3;
  int output_dim = 2;
  Activation activation = Activation::Sine;
  /// Frequency multiplier on every sine pre-activation. Ignored by ELU nets.
  double omega0 = 30.0;

  /// Throws ShapeError if any dimension is non-positive.
  void validate() const;
  /// Number of affine stages.
  int stage_count() const { return hidden_layers + 1; }
  /// Total trainable scalars (weights + biases).
  long param_count() const;
};

/// Flat parameter storage: W0, b0, W1, b1, ... with Wk of shape in x out
/// (row-major) and bk of shape 1 x out, matching Tape::affine.
struct ParamSet {
  std::vector<RealMat> tensors;

  long scalar_count() const;
  bool all_finite() const;
};

/// Fresh parameters for a spec. Sine nets get SIREN-style ranges: first
/// layer uniform in [-1/fan_in, 1/fan_in], deeper weights uniform in
/// [-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0]. ELU nets and all
/// biases draw uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]. Draw order
/// is fixed (layer by layer, weights row-major then bias) so one seed
/// gives one bitwise-identical network.
ParamSet init_params(const NetworkSpec& spec, Rng& rng);

/// Zeroes the final affine stage so the net starts as the zero map.
void zero_output_stage(const NetworkSpec& spec, ParamSet& params);

/// Registers every tensor as a differentiable leaf, in storage order.
std::vector<ad::Var> bind_params(ad::Tape& tape, const ParamSet& params);

/// Runs the net on the tape. inputs is batch x input_dim; the result is
/// batch x output_dim. Throws DivergenceError naming the stage whose
/// output is the first non-finite one.
ad::Var mlp_forward(ad::Tape& tape, const NetworkSpec& spec,
                    const std::vector<ad::Var>& params, ad::Var inputs);

/// Tape-free forward pass for frozen banks and deployment. Same math as
/// mlp_forward; only the final output is checked for finiteness.
RealMat mlp_eval(const NetworkSpec& spec, const ParamSet& params,
                 const RealMat& inputs);

}  // namespace ndmd::nn
