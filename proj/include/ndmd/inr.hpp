#pragma once

#include <string>
#include <vector>

#include "ndmd/ad.hpp"
#include "ndmd/dense.hpp"
#include "ndmd/nn.hpp"
#include "ndmd/trajectory.hpp"

namespace ndmd {

/// Training-protocol ablations. `none` is the full pipeline: stage-wise
/// training with deflation and conjugate-paired modes.
///  - no_deflation: all stages trained jointly, candidates never projected.
///  - no_conjugate: each stage emits two independent complex modes instead
///    of a mode and its conjugate.
///  - no_long: forces beta = 0 (one-step transitions only).
///  - penalty_orth: joint training where orthogonality is only encouraged
///    by a squared cross-Gram penalty; the penalty normalization uses
///    gradient-stopped column norms, so this variant is a heuristic rather
///    than an exact substitute for deflation.
enum class Ablation { none, no_deflation, no_conjugate, no_long, penalty_orth };

struct TrainConfig {
  int pairs = 2;  // P: trained stages; the bank carries 2P columns
  double alpha = 0.9;
  double beta = 0.1;
  int epochs_per_stage = 500;
  int batch = 16;
  double lr_phi = 1e-4;
  double lr_lambda = 1e-3;
  double lr_min = 1e-6;
  /// Long-horizon subsampling: the loss sums over about this many horizons
  /// (always ending at the final frame). <= 0 sums over every horizon.
  int long_horizons = 32;
  std::uint64_t seed = 1;
  /// Overrides the dataset's own train/held-out split when >= 0.
  int train_count = -1;
  Ablation ablation = Ablation::none;
  double penalty_weight = 1e-2;
  /// Chains one-step predictions through re-projection instead of feeding
  /// ground-truth frames into the short loss. Off by default.
  bool autoregressive_short = false;
  int workers = 1;

  int phi_width = 64;
  int phi_depth = 3;
  int lam_width = 64;
  int lam_depth = 3;
  double omega0 = 30.0;  // sine frequency multiplier for the basis nets

  /// Throws Error on non-positive sizes, negative weights, or alpha+beta=0.
  void validate() const;
};

/// One trained stage: a basis net mapping (x, xi) to the real and imaginary
/// channels of its mode, and a rate net mapping xi to the continuous
/// eigenvalue (growth rate, angular frequency). Without conjugate pairing
/// both nets emit two independent channels/rates.
struct ModePairNets {
  nn::NetworkSpec phi_spec;
  nn::NetworkSpec lam_spec;
  nn::ParamSet phi;
  nn::ParamSet lam;
  bool frozen = false;
};

/// Per-axis affine map (x - offset) * scale used to normalize coordinates
/// and codes onto [-1, 1] before they reach the networks. A zero scale
/// collapses a constant axis to 0.
struct AxisMap {
  std::vector<double> offset;
  std::vector<double> scale;

  /// Applies the map row-wise; x must have one column per axis.
  RealMat apply(const RealMat& x) const;
};

/// A trained model: the stage networks plus everything needed to rebuild
/// banks and spectra on any point set (input normalization, grid shape,
/// frame spacing). This is the checkpointed state.
struct InrModel {
  std::string benchmark;
  std::vector<int> dims;
  std::vector<double> extents;
  double dt = 0.0;
  bool paired = true;    // conjugate columns implied by each stage
  bool deflated = true;  // stages projected against their predecessors
  AxisMap point_map;
  AxisMap code_map;
  std::vector<ModePairNets> stages;
  /// Mean training loss per epoch, one curve per stage (a single curve for
  /// joint ablations).
  std::vector<std::vector<double>> stage_loss;
  std::vector<std::string> diagnostics;

  int pair_count() const { return static_cast<int>(stages.size()); }
  int mode_count() const { return 2 * pair_count(); }
};

/// Mode bank evaluated at N sample points: column p holds mode p, column
/// p + P its partner (the exact conjugate when paired). N >= 2P always.
struct ModeBank {
  DenseMatrix phi;
  bool paired = true;

  int pair_count() const { return phi.cols / 2; }
};

/// Continuous rates matching the bank columns: omega[p + P] is the exact
/// conjugate of omega[p] when paired. dt is the native frame spacing.
struct Spectrum {
  std::vector<cplx> omega;
  double dt = 0.0;

  int pair_count() const { return static_cast<int>(omega.size()) / 2; }
};

/// Least-squares coefficients of one frame in a bank, tagged with the time
/// they were projected at. For real frames on a paired bank, z[p + P]
/// agrees with conj(z[p]) to solver accuracy.
struct ModalCoefficients {
  std::vector<cplx> z;
  double t = 0.0;
};

/// Forecast frames (one row per requested elapsed time) plus the largest
/// imaginary residual discarded when taking the real part.
struct Rollout {
  RealMat frames;
  double max_imag = 0.0;
};

/// Physical coordinates of every cell of a uniform grid, row-major with
/// dims[0] the fastest axis, as an N x ndim matrix. Periodic axes place
/// cell i at extent * i / n.
RealMat grid_points(const std::vector<int>& dims,
                    const std::vector<double>& extents);

/// Indices of the cells a solid mask keeps (all of them when the mask is
/// empty). cell_count guards against shape drift.
std::vector<int> fluid_cells(const RealMat& solid, long cell_count);

/// frames with only the listed cells kept, in list order.
RealMat restrict_columns(const RealMat& frames, const std::vector<int>& cells);

/// Evaluates every stage at the given physical points under code xi and
/// assembles the bank: raw columns, sequential deflation against earlier
/// columns (when the model trains that way), partner columns appended.
/// Throws ShapeError when fewer points than columns are requested.
ModeBank eval_basis(const InrModel& model, const RealMat& points,
                    const std::vector<double>& code);

/// Evaluates every stage's rate net at code xi; partners are exact
/// conjugates when paired.
Spectrum eval_spectrum(const InrModel& model, const std::vector<double>& code);

/// z = argmin ||phi z - u||_2 via the rank-checked least-squares solve, so
/// an ill-conditioned bank surfaces as IllConditionedError.
ModalCoefficients project(const ModeBank& bank, const std::vector<double>& u,
                          double t = 0.0);

/// u(t + delta) = Re(phi diag(exp(omega delta)) z), one row per delta.
/// Negative elapsed times hindcast. Throws DivergenceError naming the first
/// mode whose exponent overflows.
Rollout rollout(const ModeBank& bank, const Spectrum& spectrum,
                const ModalCoefficients& coeffs,
                const std::vector<double>& deltas);

/// candidate minus its least-squares projection onto the frozen columns.
/// An empty frozen bank returns the candidate unchanged.
DenseMatrix deflate(const DenseMatrix& frozen, const DenseMatrix& candidate);

/// Teacher-forced one-step loss: every frame is projected, advanced one
/// step, and compared against its successor. Mean over steps and cells.
/// frames is T x N on the bank's points, spaced by spectrum.dt.
double loss_short(const ModeBank& bank, const Spectrum& spectrum,
                  const RealMat& frames);

/// Long-horizon loss: only frame 0 is projected, then evolved to each
/// selected horizon. horizons <= 0 uses every step. Mean over horizons and
/// cells; overflowing modes throw DivergenceError.
double loss_long(const ModeBank& bank, const Spectrum& spectrum,
                 const RealMat& frames, int horizons = 0);

/// alpha * loss_short + beta * loss_long; a zero weight skips its term
/// entirely so an unstable long rollout cannot poison a short-only loss.
double mixed_loss(double alpha, double beta, const ModeBank& bank,
                  const Spectrum& spectrum, const RealMat& frames,
                  int horizons = 0);

/// The horizon subset loss_long sums over: about `want` steps ending at
/// `last`, every step when want <= 0 or the trajectory is short.
std::vector<int> long_horizon_steps(int last, int want);

/// One trajectory prepared for a training stage: frames restricted to its
/// fluid cells, normalized network inputs for those cells, and the frozen
/// columns/rates of the earlier stages evaluated under this code.
struct StageBatchItem {
  RealMat frames;
  RealMat inputs;       // N x (point dims + code dims)
  RealMat code_inputs;  // 1 x code dims, for the rate nets
  DenseMatrix frozen_bank;
  std::vector<cplx> frozen_omega;
};

/// The training loss as a tape graph, with handles to the trainable
/// parameters in storage order. stage < 0 trains every stage jointly (the
/// no-deflation ablations); otherwise only stage's networks are bound.
struct StageGraph {
  ad::Var loss;
  std::vector<ad::Var> phi_vars;
  std::vector<ad::Var> lam_vars;
};

StageGraph build_stage_graph(ad::Tape& tape, const InrModel& model, int stage,
                             const StageBatchItem& item,
                             const TrainConfig& config);

/// Trains stage `stage` (0-based) on the set's training block: fresh nets
/// from the stage-seeded RNG, Adam with cosine annealing, earlier stages
/// frozen. Appends the stage to the model and records its loss curve.
/// Throws DivergenceError when the loss leaves the finite range.
void train_stage(InrModel& model, const TrajectorySet& data, int stage,
                 const TrainConfig& config);

/// Runs the full protocol for config.pairs stages (or one joint phase for
/// the no-deflation ablations) and returns the trained model.
InrModel train_all(const TrajectorySet& data, const TrainConfig& config);

}  // namespace ndmd
