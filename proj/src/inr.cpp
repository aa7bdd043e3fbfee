#include "ndmd/inr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ndmd/errors.hpp"
#include "ndmd/numerics.hpp"
#include "ndmd/optim.hpp"
#include "ndmd/parallel.hpp"
#include "ndmd/rng.hpp"

namespace ndmd {

namespace {

constexpr double kExpLimit = 709.0;  // exp overflows just past this

/// exp(omega * t), written exactly like the tape propagator so the two
/// paths agree bit for bit. Throws when the growing exponent overflows.
cplx gain_at(cplx omega, double t, int mode, const char* who) {
  const double x = omega.real() * t;
  if (x > kExpLimit)
    throw DivergenceError(std::string(who) +
                              ": mode exponent exceeds the double range",
                          mode);
  return std::exp(x) * cplx(std::cos(omega.imag() * t),
                            std::sin(omega.imag() * t));
}

/// Columns j0..j1 of the transposed frame block: frame rows become complex
/// columns with zero imaginary part.
DenseMatrix frame_cols(const RealMat& frames, int j0, int j1) {
  const int n = frames.cols;
  DenseMatrix m(n, j1 - j0);
  for (int i = 0; i < n; ++i)
    for (int j = j0; j < j1; ++j) m(i, j - j0) = cplx(frames(j, i), 0.0);
  return m;
}

DenseMatrix frame_cols_at(const RealMat& frames, const std::vector<int>& rows) {
  const int n = frames.cols;
  DenseMatrix m(n, static_cast<int>(rows.size()));
  for (int i = 0; i < n; ++i)
    for (size_t j = 0; j < rows.size(); ++j)
      m(i, static_cast<int>(j)) = cplx(frames(rows[j], i), 0.0);
  return m;
}

ad::CVar cslice(ad::Tape& tape, ad::CVar x, int j0, int j1) {
  return {tape.slice_cols(x.re, j0, j1), tape.slice_cols(x.im, j0, j1)};
}

/// Networks read [normalized coordinates | normalized code] per sample row.
RealMat net_inputs(const InrModel& model, const RealMat& points,
                   const std::vector<double>& code) {
  const RealMat xn = model.point_map.apply(points);
  RealMat crow(1, static_cast<int>(code.size()), code);
  const RealMat cn = model.code_map.apply(crow);
  RealMat in(points.rows, xn.cols + cn.cols);
  for (int i = 0; i < in.rows; ++i) {
    for (int a = 0; a < xn.cols; ++a) in(i, a) = xn(i, a);
    for (int a = 0; a < cn.cols; ++a) in(i, xn.cols + a) = cn(0, a);
  }
  return in;
}

/// Raw columns of one stage at pre-normalized inputs: one complex column
/// per channel pair of the basis net.
DenseMatrix stage_columns(const ModePairNets& nets, const RealMat& inputs,
                          bool paired) {
  const RealMat out = nn::mlp_eval(nets.phi_spec, nets.phi, inputs);
  DenseMatrix cand(out.rows, paired ? 1 : 2);
  for (int i = 0; i < out.rows; ++i) {
    cand(i, 0) = cplx(out(i, 0), out(i, 1));
    if (!paired) cand(i, 1) = cplx(out(i, 2), out(i, 3));
  }
  return cand;
}

/// The first n stages assembled into a bank at the given inputs, applying
/// the same sequential deflation the training loop used.
DenseMatrix assemble_bank(const InrModel& model, const RealMat& inputs,
                          int n) {
  const int rows = inputs.rows;
  DenseMatrix bank(rows, 2 * n);
  for (int s = 0; s < n; ++s) {
    DenseMatrix cand = stage_columns(model.stages[s], inputs, model.paired);
    if (model.deflated && s > 0) {
      DenseMatrix frozen(rows, 2 * s);
      for (int i = 0; i < rows; ++i)
        for (int q = 0; q < s; ++q) {
          frozen(i, q) = bank(i, q);
          frozen(i, s + q) = bank(i, n + q);
        }
      cand = deflate(frozen, cand);
    }
    for (int i = 0; i < rows; ++i) {
      bank(i, s) = cand(i, 0);
      bank(i, n + s) = model.paired ? std::conj(cand(i, 0)) : cand(i, 1);
    }
  }
  return bank;
}

/// The first n stages' rates under one code, partners included.
std::vector<cplx> assemble_rates(const InrModel& model,
                                 const RealMat& code_inputs, int n) {
  std::vector<cplx> omega(2 * n);
  for (int s = 0; s < n; ++s) {
    const RealMat out =
        nn::mlp_eval(model.stages[s].lam_spec, model.stages[s].lam,
                     code_inputs);
    omega[s] = cplx(out(0, 0), out(0, 1));
    omega[n + s] =
        model.paired ? std::conj(omega[s]) : cplx(out(0, 2), out(0, 3));
  }
  return omega;
}

void check_frames(const ModeBank& bank, const RealMat& frames,
                  const char* who) {
  if (frames.rows < 2)
    throw ShapeError(std::string(who) + ": need at least two frames");
  if (frames.cols != bank.phi.rows)
    throw ShapeError(std::string(who) +
                     ": frames and bank disagree on the sample points");
}

/// Scales column j of z by gains[k] per row k and multiplies by the bank:
/// the shared prediction kernel of both losses.
DenseMatrix predict(const DenseMatrix& phi, const std::vector<cplx>& gains,
                    const DenseMatrix& z) {
  DenseMatrix zs(z.rows, z.cols);
  for (int k = 0; k < z.rows; ++k)
    for (int j = 0; j < z.cols; ++j) zs(k, j) = gains[k] * z(k, j);
  return matmul(phi, zs);
}

double mean_sq_residual(const DenseMatrix& pred, const DenseMatrix& target) {
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const cplx d = pred.v[i] - target.v[i];
    acc += d.real() * d.real() + d.imag() * d.imag();
  }
  return acc / static_cast<double>(pred.size());
}

InrModel make_skeleton(const TrajectorySet& data, const TrainConfig& config) {
  if (data.items.empty()) throw Error("train: dataset has no trajectories");
  if (data.dims.empty() || data.dims.size() != data.extents.size())
    throw ShapeError("train: dataset grid shape is incomplete");
  long cells = 1;
  for (int d : data.dims) cells *= d;
  const double dt = data.items[0].dt;
  const size_t code_dim = data.items[0].code.size();
  if (code_dim == 0) throw Error("train: trajectories carry no code");
  for (const Trajectory& t : data.items) {
    if (t.frames.rows < 2) throw Error("train: trajectory shorter than two frames");
    if (t.frames.cols != cells)
      throw ShapeError("train: frame width does not match the grid");
    if (t.code.size() != code_dim)
      throw ShapeError("train: inconsistent code dimensions across trajectories");
    if (std::abs(t.dt - dt) > 1e-12 * std::max(1.0, std::abs(dt)))
      throw Error("train: trajectories disagree on the frame spacing");
  }
  if (dt <= 0.0) throw Error("train: frame spacing must be positive");

  InrModel model;
  model.benchmark = data.benchmark;
  model.dims = data.dims;
  model.extents = data.extents;
  model.dt = dt;
  model.paired = config.ablation != Ablation::no_conjugate;
  model.deflated = config.ablation != Ablation::no_deflation &&
                   config.ablation != Ablation::penalty_orth;

  model.point_map.offset.resize(data.dims.size());
  model.point_map.scale.resize(data.dims.size());
  for (size_t a = 0; a < data.dims.size(); ++a) {
    if (data.extents[a] <= 0.0) throw Error("train: non-positive grid extent");
    model.point_map.offset[a] = 0.5 * data.extents[a];
    model.point_map.scale[a] = 2.0 / data.extents[a];
  }

  int n_train = config.train_count >= 0 ? config.train_count : data.n_train;
  n_train = std::min<int>(n_train, static_cast<int>(data.items.size()));
  if (n_train <= 0) throw Error("train: no training trajectories in the split");
  model.code_map.offset.resize(code_dim);
  model.code_map.scale.resize(code_dim);
  for (size_t a = 0; a < code_dim; ++a) {
    double lo = data.items[0].code[a], hi = lo;
    for (int j = 1; j < n_train; ++j) {
      lo = std::min(lo, data.items[j].code[a]);
      hi = std::max(hi, data.items[j].code[a]);
    }
    model.code_map.offset[a] = 0.5 * (lo + hi);
    model.code_map.scale[a] = hi > lo ? 2.0 / (hi - lo) : 0.0;
  }
  return model;
}

/// Per-trajectory training inputs. total_pairs sizes the fluid-cell check;
/// frozen_stages is how many already-trained stages to bake into constants
/// (zero for joint training).
std::vector<StageBatchItem> prepare_items(const InrModel& model,
                                          const TrajectorySet& data,
                                          int n_train, int total_pairs,
                                          int frozen_stages) {
  const RealMat points = grid_points(data.dims, data.extents);
  std::vector<StageBatchItem> items(n_train);
  for (int j = 0; j < n_train; ++j) {
    const Trajectory& traj = data.items[j];
    const std::vector<int> cells = fluid_cells(traj.solid, traj.frames.cols);
    if (static_cast<int>(cells.size()) < 2 * total_pairs)
      throw ShapeError("train: fewer fluid cells than bank columns");
    RealMat pts(static_cast<int>(cells.size()), points.cols);
    for (size_t i = 0; i < cells.size(); ++i)
      for (int a = 0; a < points.cols; ++a)
        pts(static_cast<int>(i), a) = points(cells[i], a);
    StageBatchItem item;
    item.frames = restrict_columns(traj.frames, cells);
    item.inputs = net_inputs(model, pts, traj.code);
    RealMat crow(1, static_cast<int>(traj.code.size()), traj.code);
    item.code_inputs = model.code_map.apply(crow);
    if (frozen_stages > 0) {
      item.frozen_bank = assemble_bank(model, item.inputs, frozen_stages);
      item.frozen_omega = assemble_rates(model, item.code_inputs, frozen_stages);
    }
    items[j] = std::move(item);
  }
  return items;
}

/// Fresh stage networks drawn from the stage's child stream. The rate net
/// starts as the zero map so every mode opens at omega = 0 (a neutral
/// propagator): random growth rates would overflow exp on long horizons
/// before the first update.
ModePairNets init_stage(const InrModel& model, const TrainConfig& config,
                        int stage, int input_dim, int code_dim) {
  ModePairNets nets;
  nets.phi_spec.input_dim = input_dim;
  nets.phi_spec.hidden_width = config.phi_width;
  nets.phi_spec.hidden_layers = config.phi_depth;
  nets.phi_spec.output_dim = model.paired ? 2 : 4;
  nets.phi_spec.activation = nn::Activation::Sine;
  nets.phi_spec.omega0 = config.omega0;
  nets.lam_spec.input_dim = code_dim;
  nets.lam_spec.hidden_width = config.lam_width;
  nets.lam_spec.hidden_layers = config.lam_depth;
  nets.lam_spec.output_dim = model.paired ? 2 : 4;
  nets.lam_spec.activation = nn::Activation::Elu;
  Rng rng = Rng(config.seed).child(static_cast<std::uint64_t>(stage));
  nets.phi = nn::init_params(nets.phi_spec, rng);
  nets.lam = nn::init_params(nets.lam_spec, rng);
  nn::zero_output_stage(nets.lam_spec, nets.lam);
  return nets;
}

/// Logs (once per pair) when two rates land within 1e-8 of each other at a
/// training code. Diagnostic only; nothing is repaired.
void log_rate_collisions(InrModel& model,
                         const std::vector<StageBatchItem>& items, int built,
                         int stage_label, int epoch,
                         std::set<std::pair<int, int>>& logged) {
  if (built < 2) return;
  for (const StageBatchItem& item : items) {
    const std::vector<cplx> w = assemble_rates(model, item.code_inputs, built);
    for (int i = 0; i < built; ++i)
      for (int j = i + 1; j < built; ++j) {
        if (std::abs(w[i] - w[j]) >= 1e-8) continue;
        if (!logged.insert({i, j}).second) continue;
        char buf[176];
        if (stage_label < 0)
          std::snprintf(buf, sizeof(buf),
                        "joint epoch %d: rates %d and %d collide within 1e-8",
                        epoch, i, j);
        else
          std::snprintf(buf, sizeof(buf),
                        "stage %d epoch %d: rates %d and %d collide within "
                        "1e-8; basis stays separated by deflation",
                        stage_label, epoch, i, j);
        model.diagnostics.emplace_back(buf);
      }
  }
}

/// Shared epoch driver for sequential and joint training. `trainable`
/// lists the stages whose parameters update; items must be prepared for
/// the stage being built (frozen banks for sequential, none for joint).
void run_epochs(InrModel& model, std::vector<StageBatchItem>& items,
                int stage, const TrainConfig& config, int built,
                int stage_label) {
  const std::vector<int> trainable = [&] {
    std::vector<int> s;
    if (stage < 0)
      for (int q = 0; q < model.pair_count(); ++q) s.push_back(q);
    else
      s.push_back(stage);
    return s;
  }();

  std::vector<optim::Adam> phi_opt, lam_opt;
  phi_opt.reserve(trainable.size());
  lam_opt.reserve(trainable.size());
  for (int s : trainable) {
    phi_opt.emplace_back(model.stages[s].phi);
    lam_opt.emplace_back(model.stages[s].lam);
  }

  const int n_items = static_cast<int>(items.size());
  const int epochs = config.epochs_per_stage;
  std::vector<double> curve;
  curve.reserve(epochs);
  std::set<std::pair<int, int>> logged;

  for (int e = 0; e < epochs; ++e) {
    const double lr_p = optim::cosine_lr(config.lr_phi, config.lr_min, e, epochs);
    const double lr_l =
        optim::cosine_lr(config.lr_lambda, config.lr_min, e, epochs);
    double epoch_loss = 0.0;

    for (int start = 0; start < n_items; start += config.batch) {
      const int m = std::min(config.batch, n_items - start);
      std::vector<std::vector<RealMat>> phi_g(m), lam_g(m);
      std::vector<double> losses(m, 0.0);
      parallel_for(m, config.workers, [&](int bi) {
        ad::Tape tape;
        const StageGraph graph =
            build_stage_graph(tape, model, stage, items[start + bi], config);
        const double value = tape.value(graph.loss)(0, 0);
        if (!std::isfinite(value)) {
          const std::string where =
              stage_label < 0 ? std::string("joint phase")
                              : "stage " + std::to_string(stage_label);
          throw DivergenceError("train: loss left the finite range (" + where +
                                    ", epoch " + std::to_string(e) +
                                    ", trajectory " +
                                    std::to_string(start + bi) + ")",
                                std::max(stage_label, 0));
        }
        losses[bi] = value;
        tape.backward(graph.loss);
        phi_g[bi].reserve(graph.phi_vars.size());
        for (ad::Var v : graph.phi_vars) phi_g[bi].push_back(tape.grad(v));
        lam_g[bi].reserve(graph.lam_vars.size());
        for (ad::Var v : graph.lam_vars) lam_g[bi].push_back(tape.grad(v));
      });

      // deterministic reduction: slot order, then the batch mean
      std::vector<RealMat> phi_mean = phi_g[0], lam_mean = lam_g[0];
      for (int bi = 1; bi < m; ++bi) {
        for (size_t t = 0; t < phi_mean.size(); ++t)
          phi_mean[t] = phi_mean[t] + phi_g[bi][t];
        for (size_t t = 0; t < lam_mean.size(); ++t)
          lam_mean[t] = lam_mean[t] + lam_g[bi][t];
      }
      const double inv = 1.0 / m;
      for (RealMat& g : phi_mean)
        for (double& x : g.v) x *= inv;
      for (RealMat& g : lam_mean)
        for (double& x : g.v) x *= inv;
      for (double l : losses) epoch_loss += l;

      // scatter the flat gradient lists back to each trainable stage
      size_t p_at = 0, l_at = 0;
      for (size_t q = 0; q < trainable.size(); ++q) {
        ModePairNets& nets = model.stages[trainable[q]];
        const size_t np = nets.phi.tensors.size();
        const size_t nl = nets.lam.tensors.size();
        std::vector<RealMat> gp(phi_mean.begin() + p_at,
                                phi_mean.begin() + p_at + np);
        std::vector<RealMat> gl(lam_mean.begin() + l_at,
                                lam_mean.begin() + l_at + nl);
        phi_opt[q].step(nets.phi, gp, lr_p);
        lam_opt[q].step(nets.lam, gl, lr_l);
        p_at += np;
        l_at += nl;
      }
    }

    curve.push_back(epoch_loss / n_items);
    log_rate_collisions(model, items, built, stage_label, e, logged);
  }
  model.stage_loss.push_back(std::move(curve));
}

}  // namespace

void TrainConfig::validate() const {
  if (pairs < 1) throw Error("train config: need at least one mode pair");
  if (alpha < 0.0 || beta < 0.0)
    throw Error("train config: loss weights must be non-negative");
  if (alpha + beta <= 0.0)
    throw Error("train config: at least one loss weight must be positive");
  if (epochs_per_stage < 1) throw Error("train config: epochs must be positive");
  if (batch < 1) throw Error("train config: batch size must be positive");
  if (lr_phi <= 0.0 || lr_lambda <= 0.0 || lr_min < 0.0)
    throw Error("train config: learning rates must be positive");
  if (penalty_weight < 0.0)
    throw Error("train config: penalty weight must be non-negative");
  if (workers < 1) throw Error("train config: need at least one worker");
  if (phi_width < 1 || phi_depth < 1 || lam_width < 1 || lam_depth < 1)
    throw Error("train config: network sizes must be positive");
}

RealMat AxisMap::apply(const RealMat& x) const {
  if (x.cols != static_cast<int>(offset.size()))
    throw ShapeError("axis map: column count does not match the axes");
  RealMat y(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int a = 0; a < x.cols; ++a)
      y(i, a) = (x(i, a) - offset[a]) * scale[a];
  return y;
}

RealMat grid_points(const std::vector<int>& dims,
                    const std::vector<double>& extents) {
  if (dims.empty() || dims.size() != extents.size())
    throw ShapeError("grid points: dims and extents must match");
  long n = 1;
  for (int d : dims) {
    if (d < 1) throw ShapeError("grid points: non-positive dimension");
    n *= d;
  }
  const int nd = static_cast<int>(dims.size());
  RealMat pts(static_cast<int>(n), nd);
  for (long c = 0; c < n; ++c) {
    long rem = c;
    for (int a = 0; a < nd; ++a) {
      const long idx = rem % dims[a];
      rem /= dims[a];
      pts(static_cast<int>(c), a) =
          extents[a] * static_cast<double>(idx) / dims[a];
    }
  }
  return pts;
}

std::vector<int> fluid_cells(const RealMat& solid, long cell_count) {
  std::vector<int> cells;
  if (solid.size() == 0) {
    cells.resize(cell_count);
    for (long i = 0; i < cell_count; ++i) cells[i] = static_cast<int>(i);
    return cells;
  }
  if (static_cast<long>(solid.size()) != cell_count)
    throw ShapeError("fluid cells: mask size does not match the grid");
  for (long i = 0; i < cell_count; ++i)
    if (solid.v[i] == 0.0) cells.push_back(static_cast<int>(i));
  return cells;
}

RealMat restrict_columns(const RealMat& frames, const std::vector<int>& cells) {
  RealMat out(frames.rows, static_cast<int>(cells.size()));
  for (int i = 0; i < frames.rows; ++i)
    for (size_t j = 0; j < cells.size(); ++j) {
      if (cells[j] < 0 || cells[j] >= frames.cols)
        throw ShapeError("restrict columns: cell index out of range");
      out(i, static_cast<int>(j)) = frames(i, cells[j]);
    }
  return out;
}

ModeBank eval_basis(const InrModel& model, const RealMat& points,
                    const std::vector<double>& code) {
  if (model.stages.empty()) throw Error("eval basis: the model has no stages");
  const int p = model.pair_count();
  if (points.rows < 2 * p)
    throw ShapeError("eval basis: need at least as many points as columns");
  ModeBank bank;
  bank.paired = model.paired;
  bank.phi = assemble_bank(model, net_inputs(model, points, code), p);
  return bank;
}

Spectrum eval_spectrum(const InrModel& model, const std::vector<double>& code) {
  if (model.stages.empty())
    throw Error("eval spectrum: the model has no stages");
  RealMat crow(1, static_cast<int>(code.size()), code);
  Spectrum s;
  s.omega = assemble_rates(model, model.code_map.apply(crow),
                           model.pair_count());
  s.dt = model.dt;
  return s;
}

ModalCoefficients project(const ModeBank& bank, const std::vector<double>& u,
                          double t) {
  if (static_cast<int>(u.size()) != bank.phi.rows)
    throw ShapeError("project: state length does not match the bank points");
  DenseMatrix b(bank.phi.rows, 1);
  for (int i = 0; i < b.rows; ++i) b(i, 0) = cplx(u[i], 0.0);
  DenseMatrix z;
  try {
    z = least_squares_solve(bank.phi, b);
  } catch (const IllConditionedError& e) {
    throw IllConditionedError(
        "project: the mode bank is ill-conditioned at these sample points",
        e.condition);
  }
  ModalCoefficients coeffs;
  coeffs.t = t;
  coeffs.z.resize(z.rows);
  for (int k = 0; k < z.rows; ++k) coeffs.z[k] = z(k, 0);
  return coeffs;
}

Rollout rollout(const ModeBank& bank, const Spectrum& spectrum,
                const ModalCoefficients& coeffs,
                const std::vector<double>& deltas) {
  const int n = bank.phi.rows;
  const int k = bank.phi.cols;
  if (static_cast<int>(spectrum.omega.size()) != k)
    throw ShapeError("rollout: spectrum and bank disagree on the mode count");
  if (static_cast<int>(coeffs.z.size()) != k)
    throw ShapeError("rollout: coefficients and bank disagree on the mode count");
  Rollout result;
  result.frames = RealMat(static_cast<int>(deltas.size()), n);
  std::vector<cplx> zs(k);
  for (size_t r = 0; r < deltas.size(); ++r) {
    for (int q = 0; q < k; ++q)
      zs[q] = gain_at(spectrum.omega[q], deltas[r], q, "rollout") * coeffs.z[q];
    for (int i = 0; i < n; ++i) {
      cplx acc(0.0, 0.0);
      for (int q = 0; q < k; ++q) acc += bank.phi(i, q) * zs[q];
      result.frames(static_cast<int>(r), i) = acc.real();
      result.max_imag = std::max(result.max_imag, std::abs(acc.imag()));
    }
  }
  return result;
}

DenseMatrix deflate(const DenseMatrix& frozen, const DenseMatrix& candidate) {
  if (frozen.cols == 0) return candidate;
  if (frozen.rows != candidate.rows)
    throw ShapeError("deflate: frozen bank and candidate rows differ");
  const QrPivoted qr(frozen);
  return candidate - matmul(frozen, qr.solve(candidate));
}

double loss_short(const ModeBank& bank, const Spectrum& spectrum,
                  const RealMat& frames) {
  check_frames(bank, frames, "short loss");
  const int steps = frames.rows - 1;
  const DenseMatrix u_prev = frame_cols(frames, 0, steps);
  const DenseMatrix u_next = frame_cols(frames, 1, steps + 1);
  const DenseMatrix z = least_squares_solve(bank.phi, u_prev);
  std::vector<cplx> gains(bank.phi.cols);
  for (int q = 0; q < bank.phi.cols; ++q)
    gains[q] = gain_at(spectrum.omega[q], spectrum.dt, q, "short loss");
  return mean_sq_residual(predict(bank.phi, gains, z), u_next);
}

double loss_long(const ModeBank& bank, const Spectrum& spectrum,
                 const RealMat& frames, int horizons) {
  check_frames(bank, frames, "long loss");
  const std::vector<int> js = long_horizon_steps(frames.rows - 1, horizons);
  const DenseMatrix z0 = least_squares_solve(bank.phi, frame_cols(frames, 0, 1));
  const DenseMatrix target = frame_cols_at(frames, js);
  DenseMatrix zs(bank.phi.cols, static_cast<int>(js.size()));
  std::vector<cplx> gains(bank.phi.cols);
  for (size_t h = 0; h < js.size(); ++h) {
    const double t = js[h] * spectrum.dt;
    for (int q = 0; q < bank.phi.cols; ++q)
      gains[q] = gain_at(spectrum.omega[q], t, q, "long loss");
    for (int q = 0; q < bank.phi.cols; ++q)
      zs(q, static_cast<int>(h)) = gains[q] * z0(q, 0);
  }
  return mean_sq_residual(matmul(bank.phi, zs), target);
}

double mixed_loss(double alpha, double beta, const ModeBank& bank,
                  const Spectrum& spectrum, const RealMat& frames,
                  int horizons) {
  if (alpha < 0.0 || beta < 0.0 || alpha + beta <= 0.0)
    throw Error("mixed loss: weights must be non-negative and not both zero");
  double total = 0.0;
  if (alpha > 0.0) total += alpha * loss_short(bank, spectrum, frames);
  if (beta > 0.0) total += beta * loss_long(bank, spectrum, frames, horizons);
  return total;
}

std::vector<int> long_horizon_steps(int last, int want) {
  std::vector<int> js;
  if (last < 1) return js;
  if (want <= 0 || want >= last) {
    js.resize(last);
    for (int j = 1; j <= last; ++j) js[j - 1] = j;
    return js;
  }
  const int step = std::max(1, last / want);
  for (int j = last; j >= 1; j -= step) js.push_back(j);
  std::reverse(js.begin(), js.end());
  return js;
}

StageGraph build_stage_graph(ad::Tape& tape, const InrModel& model, int stage,
                             const StageBatchItem& item,
                             const TrainConfig& config) {
  const bool joint = stage < 0;
  const int total = model.pair_count();
  if (joint && model.deflated)
    throw Error("train: joint training never deflates; check the ablation");
  if (!joint && (stage >= total))
    throw Error("train: stage is not initialized in the model");
  if (!joint && item.frozen_bank.cols != 2 * stage)
    throw ShapeError("train: frozen bank does not match the stage");
  const int n = item.inputs.rows;
  const int t_count = item.frames.rows;
  if (t_count < 2) throw ShapeError("train: need at least two frames");
  if (item.frames.cols != n)
    throw ShapeError("train: frames and inputs disagree on the sample points");
  const int built = joint ? total : stage + 1;
  const double dt = model.dt;
  const double alpha = config.alpha;
  const double beta = config.ablation == Ablation::no_long ? 0.0 : config.beta;

  StageGraph graph;
  const ad::Var inputs = tape.constant(item.inputs);
  const ad::Var code_in = tape.constant(item.code_inputs);

  // trainable columns and rates, one slot per built stage
  std::vector<ad::CVar> first(built), second(built);
  std::vector<ad::CVar> rate(built), rate_partner(built);
  const std::vector<int> candidates = [&] {
    std::vector<int> s;
    if (joint)
      for (int q = 0; q < built; ++q) s.push_back(q);
    else
      s.push_back(stage);
    return s;
  }();

  ad::CVar frozen{{-1}, {-1}};
  if (!joint && stage > 0) frozen = tape.cconstant(item.frozen_bank);

  for (int s : candidates) {
    const ModePairNets& nets = model.stages[s];
    const std::vector<ad::Var> phi_vars = nn::bind_params(tape, nets.phi);
    const std::vector<ad::Var> lam_vars = nn::bind_params(tape, nets.lam);
    graph.phi_vars.insert(graph.phi_vars.end(), phi_vars.begin(),
                          phi_vars.end());
    graph.lam_vars.insert(graph.lam_vars.end(), lam_vars.begin(),
                          lam_vars.end());

    const ad::Var phi_out =
        nn::mlp_forward(tape, nets.phi_spec, phi_vars, inputs);
    ad::CVar cand = {tape.slice_cols(phi_out, 0, 1),
                     tape.slice_cols(phi_out, 1, 2)};
    ad::CVar cand_b{{-1}, {-1}};
    if (!model.paired)
      cand_b = {tape.slice_cols(phi_out, 2, 3), tape.slice_cols(phi_out, 3, 4)};
    if (model.deflated && s > 0) {
      if (!model.paired) {
        const ad::CVar both = tape.deflate(frozen, tape.cconcat_cols(cand, cand_b));
        cand = cslice(tape, both, 0, 1);
        cand_b = cslice(tape, both, 1, 2);
      } else {
        cand = tape.deflate(frozen, cand);
      }
    }
    first[s] = cand;
    second[s] = model.paired ? tape.cconj(cand) : cand_b;

    const ad::Var lam_out =
        nn::mlp_forward(tape, nets.lam_spec, lam_vars, code_in);
    rate[s] = {tape.slice_cols(lam_out, 0, 1), tape.slice_cols(lam_out, 1, 2)};
    rate_partner[s] =
        model.paired
            ? tape.cconj(rate[s])
            : ad::CVar{tape.slice_cols(lam_out, 2, 3),
                       tape.slice_cols(lam_out, 3, 4)};
  }

  if (!joint && stage > 0) {
    for (int s = 0; s < stage; ++s) {
      first[s] = cslice(tape, frozen, s, s + 1);
      second[s] = cslice(tape, frozen, stage + s, stage + s + 1);
      RealMat wre(1, 1), wim(1, 1), vre(1, 1), vim(1, 1);
      wre(0, 0) = item.frozen_omega[s].real();
      wim(0, 0) = item.frozen_omega[s].imag();
      vre(0, 0) = item.frozen_omega[stage + s].real();
      vim(0, 0) = item.frozen_omega[stage + s].imag();
      rate[s] = {tape.constant(wre), tape.constant(wim)};
      rate_partner[s] = {tape.constant(vre), tape.constant(vim)};
    }
  }

  ad::CVar bank = first[0];
  for (int s = 1; s < built; ++s) bank = tape.cconcat_cols(bank, first[s]);
  for (int s = 0; s < built; ++s) bank = tape.cconcat_cols(bank, second[s]);

  ad::CVar rates_row = rate[0];
  for (int s = 1; s < built; ++s)
    rates_row = tape.cconcat_cols(rates_row, rate[s]);
  for (int s = 0; s < built; ++s)
    rates_row = tape.cconcat_cols(rates_row, rate_partner[s]);
  const ad::CVar rates = {tape.transpose(rates_row.re),
                          tape.transpose(rates_row.im)};

  const int steps = t_count - 1;
  const ad::CVar u_prev = tape.cconstant(frame_cols(item.frames, 0, steps));
  const ad::CVar u_next =
      tape.cconstant(frame_cols(item.frames, 1, steps + 1));

  ad::Var short_term{-1};
  ad::CVar z_all{{-1}, {-1}};
  if (alpha > 0.0) {
    const ad::CVar e1 = tape.modal_evolve(rates, {dt});
    if (!config.autoregressive_short) {
      z_all = tape.complex_lstsq(bank, u_prev);
      const ad::CVar gains =
          tape.cmatmul(e1, tape.cconstant(DenseMatrix::from_real(
                               RealMat::ones(1, steps))));
      const ad::CVar pred = tape.cmatmul(bank, tape.chadamard(gains, z_all));
      short_term = tape.scale(tape.csumsq(tape.csub(pred, u_next)),
                              1.0 / (static_cast<double>(n) * steps));
    } else {
      // chained variant: each step projects the previous prediction
      ad::CVar u_hat = cslice(tape, u_prev, 0, 1);
      ad::Var acc{-1};
      for (int i = 0; i < steps; ++i) {
        const ad::CVar zi = tape.complex_lstsq(bank, u_hat);
        const ad::CVar pred = tape.cmatmul(bank, tape.chadamard(e1, zi));
        const ad::Var term =
            tape.csumsq(tape.csub(pred, cslice(tape, u_next, i, i + 1)));
        acc = acc.ok() ? tape.add(acc, term) : term;
        u_hat = {pred.re, tape.scale(pred.im, 0.0)};
      }
      short_term =
          tape.scale(acc, 1.0 / (static_cast<double>(n) * steps));
    }
  }

  ad::Var long_term{-1};
  if (beta > 0.0) {
    const std::vector<int> js = long_horizon_steps(steps, config.long_horizons);
    std::vector<double> times(js.size());
    for (size_t h = 0; h < js.size(); ++h) times[h] = js[h] * dt;
    const ad::CVar z0 = (alpha > 0.0 && !config.autoregressive_short)
                            ? cslice(tape, z_all, 0, 1)
                            : tape.complex_lstsq(bank, cslice(tape, u_prev, 0, 1));
    const ad::CVar evolved = tape.modal_evolve(rates, times);
    const ad::CVar z_rep =
        tape.cmatmul(z0, tape.cconstant(DenseMatrix::from_real(RealMat::ones(
                             1, static_cast<int>(js.size())))));
    const ad::CVar pred = tape.cmatmul(bank, tape.chadamard(evolved, z_rep));
    const ad::CVar target = tape.cconstant(frame_cols_at(item.frames, js));
    long_term = tape.scale(
        tape.csumsq(tape.csub(pred, target)),
        1.0 / (static_cast<double>(n) * static_cast<double>(js.size())));
  }

  if (short_term.ok() && long_term.ok())
    graph.loss = tape.add(tape.scale(short_term, alpha),
                          tape.scale(long_term, beta));
  else if (short_term.ok())
    graph.loss = tape.scale(short_term, alpha);
  else
    graph.loss = tape.scale(long_term, beta);

  if (joint && config.ablation == Ablation::penalty_orth &&
      config.penalty_weight > 0.0 && built > 1) {
    // cross-Gram penalty with gradient-stopped norm scaling: its gradient
    // only steers column directions, never the overall magnitude
    std::vector<double> norms(built);
    for (int s = 0; s < built; ++s)
      norms[s] = tape.value(tape.csumsq(first[s]))(0, 0);
    ad::Var pen{-1};
    for (int i = 0; i < built; ++i)
      for (int j = i + 1; j < built; ++j) {
        const double denom = norms[i] * norms[j];
        if (denom <= 1e-300) continue;
        const ad::CVar ai = {tape.transpose(first[i].re),
                             tape.scale(tape.transpose(first[i].im), -1.0)};
        const ad::Var overlap =
            tape.scale(tape.csumsq(tape.cmatmul(ai, first[j])), 1.0 / denom);
        pen = pen.ok() ? tape.add(pen, overlap) : overlap;
      }
    if (pen.ok())
      graph.loss =
          tape.add(graph.loss, tape.scale(pen, config.penalty_weight));
  }
  return graph;
}

void train_stage(InrModel& model, const TrajectorySet& data, int stage,
                 const TrainConfig& config) {
  config.validate();
  if (stage < 0) throw Error("train stage: stage index must be non-negative");
  if (static_cast<int>(model.stages.size()) != stage)
    throw Error("train stage: stages below this one must already be trained");
  if (model.dims.empty()) model = make_skeleton(data, config);
  for (const ModePairNets& nets : model.stages)
    if (!nets.frozen) throw Error("train stage: earlier stages must be frozen");

  int n_train = config.train_count >= 0 ? config.train_count : data.n_train;
  n_train = std::min<int>(n_train, static_cast<int>(data.items.size()));
  if (n_train <= 0) throw Error("train stage: no training trajectories");

  std::vector<StageBatchItem> items =
      prepare_items(model, data, n_train, stage + 1, stage);
  const int input_dim = items[0].inputs.cols;
  const int code_dim = items[0].code_inputs.cols;
  model.stages.push_back(init_stage(model, config, stage, input_dim, code_dim));

  run_epochs(model, items, stage, config, stage + 1, stage);
  model.stages[stage].frozen = true;
}

InrModel train_all(const TrajectorySet& data, const TrainConfig& config) {
  config.validate();
  const bool joint = config.ablation == Ablation::no_deflation ||
                     config.ablation == Ablation::penalty_orth;
  if (!joint) {
    InrModel model;
    for (int p = 0; p < config.pairs; ++p)
      train_stage(model, data, p, config);
    return model;
  }

  InrModel model = make_skeleton(data, config);
  int n_train = config.train_count >= 0 ? config.train_count : data.n_train;
  n_train = std::min<int>(n_train, static_cast<int>(data.items.size()));
  if (n_train <= 0) throw Error("train: no training trajectories");

  // all stages exist up front; one joint phase updates every parameter each
  // epoch, so each net sees the same number of updates as in staged runs
  std::vector<StageBatchItem> items =
      prepare_items(model, data, n_train, config.pairs, 0);
  const int input_dim = items[0].inputs.cols;
  const int code_dim = items[0].code_inputs.cols;
  for (int p = 0; p < config.pairs; ++p)
    model.stages.push_back(init_stage(model, config, p, input_dim, code_dim));

  run_epochs(model, items, -1, config, config.pairs, -1);
  for (ModePairNets& nets : model.stages) nets.frozen = true;
  return model;
}

}  // namespace ndmd
