#pragma once

#include <string>
#include <vector>

#include "ndmd/dense.hpp"

namespace ndmd {

/// Rank-r dynamic mode decomposition of one uniformly sampled snapshot
/// sequence. Modes are unit columns; mu and omega = log(mu)/dt pair with
/// them; amplitudes are the least-squares fit of the first snapshot in the
/// mode basis. Entries are sorted by descending |amplitude|.
struct DmdModel {
  int rank = 0;
  std::vector<cplx> mu;
  std::vector<cplx> omega;
  DenseMatrix modes;  // state_dim x rank
  double dt = 0.0;
  std::vector<cplx> amplitudes;
  std::vector<std::string> warnings;
};

/// Fits the reduced operator U_r^H X' V_r S_r^{-1} to the snapshot rows
/// (one row per frame, time-ordered) and lifts its eigenvectors to state
/// space through X'. A trailing zero singular value shrinks the rank with a
/// warning; a zero eigenvalue falls back to the projected lift U_r w.
DmdModel dmd_fit(const RealMat& snapshots, int rank, double dt);

/// Same fit from explicit snapshot pairs: row k of x advances to row k of
/// xp. Lets pairs pooled across several sequences share one operator
/// without a bogus seam pair.
DmdModel dmd_fit_pairs(const RealMat& x, const RealMat& xp, int rank,
                       double dt);

/// x_k = Psi diag(mu^k) (Psi^+ x0), real part. k = 0 projects x0 onto the
/// mode span.
std::vector<double> dmd_predict(const DmdModel& model,
                                const std::vector<double>& x0, long k);

/// Principal-branch log(mu)/dt. Zero eigenvalues and dt <= 0 are rejected.
std::vector<cplx> continuous_eigs(const std::vector<cplx>& mu, double dt);

}  // namespace ndmd
