#include "ndmd/nn.hpp"

#include <cmath>
#include <string>

#include "ndmd/errors.hpp"
#include "ndmd/kernels.hpp"

namespace ndmd::nn {

void NetworkSpec::validate() const {
  if (input_dim <= 0 || hidden_width <= 0 || hidden_layers <= 0 ||
      output_dim <= 0)
    throw ShapeError("NetworkSpec: all dimensions must be positive");
}

long NetworkSpec::param_count() const {
  long total = 0;
  int fan_in = input_dim;
  for (int l = 0; l < stage_count(); ++l) {
    const int fan_out = (l == hidden_layers) ? output_dim : hidden_width;
    total += static_cast<long>(fan_in + 1) * fan_out;
    fan_in = fan_out;
  }
  return total;
}

long ParamSet::scalar_count() const {
  long total = 0;
  for (const RealMat& t : tensors) total += static_cast<long>(t.size());
  return total;
}

bool ParamSet::all_finite() const {
  for (const RealMat& t : tensors)
    if (!ndmd::all_finite(t)) return false;
  return true;
}

ParamSet init_params(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  ParamSet p;
  int fan_in = spec.input_dim;
  for (int l = 0; l < spec.stage_count(); ++l) {
    const int fan_out =
        (l == spec.hidden_layers) ? spec.output_dim : spec.hidden_width;
    double wb = 1.0 / std::sqrt(static_cast<double>(fan_in));
    if (spec.activation == Activation::Sine)
      wb = (l == 0) ? 1.0 / fan_in
                    : std::sqrt(6.0 / fan_in) / spec.omega0;
    RealMat w(fan_in, fan_out);
    for (size_t i = 0; i < w.size(); ++i) w.v[i] = rng.uniform(-wb, wb);
    const double bb = 1.0 / std::sqrt(static_cast<double>(fan_in));
    RealMat b(1, fan_out);
    for (size_t i = 0; i < b.size(); ++i) b.v[i] = rng.uniform(-bb, bb);
    p.tensors.push_back(std::move(w));
    p.tensors.push_back(std::move(b));
    fan_in = fan_out;
  }
  return p;
}

void zero_output_stage(const NetworkSpec& spec, ParamSet& params) {
  const int nt = 2 * spec.stage_count();
  if (static_cast<int>(params.tensors.size()) != nt)
    throw ShapeError("zero_output_stage: params do not match spec");
  for (int i = nt - 2; i < nt; ++i)
    std::fill(params.tensors[i].v.begin(), params.tensors[i].v.end(), 0.0);
}

std::vector<ad::Var> bind_params(ad::Tape& tape, const ParamSet& params) {
  std::vector<ad::Var> vars;
  vars.reserve(params.tensors.size());
  for (const RealMat& t : params.tensors) vars.push_back(tape.leaf(t));
  return vars;
}

namespace {

void check_stage(const RealMat& h, int stage) {
  if (!ndmd::all_finite(h))
    throw DivergenceError(
        "mlp_forward: non-finite output of affine stage " +
            std::to_string(stage),
        stage);
}

}  // namespace

ad::Var mlp_forward(ad::Tape& tape, const NetworkSpec& spec,
                    const std::vector<ad::Var>& params, ad::Var inputs) {
  spec.validate();
  if (static_cast<int>(params.size()) != 2 * spec.stage_count())
    throw ShapeError("mlp_forward: wrong parameter tensor count");
  if (tape.value(inputs).cols != spec.input_dim)
    throw ShapeError("mlp_forward: input width does not match spec");
  ad::Var h = inputs;
  for (int l = 0; l < spec.stage_count(); ++l) {
    h = tape.affine(h, params[2 * l], params[2 * l + 1]);
    check_stage(tape.value(h), l);
    if (l == spec.hidden_layers) break;
    h = spec.activation == Activation::Sine ? tape.sin_act(h, spec.omega0)
                                            : tape.elu_act(h);
  }
  return h;
}

RealMat mlp_eval(const NetworkSpec& spec, const ParamSet& params,
                 const RealMat& inputs) {
  spec.validate();
  if (static_cast<int>(params.tensors.size()) != 2 * spec.stage_count())
    throw ShapeError("mlp_eval: wrong parameter tensor count");
  if (inputs.cols != spec.input_dim)
    throw ShapeError("mlp_eval: input width does not match spec");
  const int batch = inputs.rows;
  RealMat h = inputs;
  RealMat scratch;
  for (int l = 0; l < spec.stage_count(); ++l) {
    const RealMat& w = params.tensors[2 * l];
    const RealMat& b = params.tensors[2 * l + 1];
    if (w.rows != h.cols) throw ShapeError("mlp_eval: weight shape mismatch");
    RealMat out(batch, w.cols);
    for (int i = 0; i < batch; ++i)
      for (int j = 0; j < w.cols; ++j) out(i, j) = b(0, j);
    kernels::gemm(false, false, batch, w.cols, h.cols, 1.0, h.data(), h.cols,
                  w.data(), w.cols, 1.0, out.data(), out.cols);
    if (l == spec.hidden_layers) {
      h = std::move(out);
      break;
    }
    const int n = static_cast<int>(out.size());
    if (spec.activation == Activation::Sine) {
      scratch = RealMat(out.rows, out.cols);
      kernels::scale(n, spec.omega0, out.data());
      h = RealMat(out.rows, out.cols);
      kernels::sincos(n, out.data(), h.data(), scratch.data());
    } else {
      h = RealMat(out.rows, out.cols);
      kernels::elu(n, out.data(), h.data());
    }
  }
  if (!ndmd::all_finite(h))
    throw DivergenceError("mlp_eval: non-finite network output",
                          spec.hidden_layers);
  return h;
}

}  // namespace ndmd::nn
