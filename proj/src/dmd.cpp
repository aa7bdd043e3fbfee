#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ndmd/dmd.hpp"
#include "ndmd/errors.hpp"
#include "ndmd/numerics.hpp"

namespace ndmd {

std::vector<cplx> continuous_eigs(const std::vector<cplx>& mu, double dt) {
  if (!(dt > 0.0)) throw Error("continuous_eigs: dt must be positive");
  std::vector<cplx> omega(mu.size());
  for (size_t j = 0; j < mu.size(); ++j) {
    if (mu[j] == cplx(0.0))
      throw Error("continuous_eigs: zero eigenvalue has no logarithm");
    omega[j] = std::log(mu[j]) / dt;
  }
  return omega;
}

namespace {

/// Shared tail of the fit once the pair matrices are assembled: columns of
/// x advance to columns of xp, and x0 anchors the amplitude fit.
DmdModel fit_pair_columns(const DenseMatrix& x, const DenseMatrix& xp,
                          int rank, double dt, const std::vector<double>& x0) {
  const int n = x.rows, m = x.cols;
  DmdModel model;
  Svd f = svd_truncated(x, rank);
  int r = rank;
  while (r > 0 && f.sigma[r - 1] <= f.sigma[0] * 1e-13) --r;
  if (r == 0) throw IllConditionedError("dmd_fit: snapshot matrix is zero", 0.0);
  if (r < rank) {
    model.warnings.push_back(
        "rank reduced to " + std::to_string(r) +
        ": trailing singular values vanish");
    f = svd_truncated(x, r);
  }

  // B = X' V S^{-1}, so the reduced operator is U^H B and the exact-DMD
  // lift of an eigenvector w is B w / mu
  DenseMatrix b(n, r);
  for (int j = 0; j < r; ++j)
    for (int k = 0; k < m; ++k) {
      const cplx scaled = std::conj(f.v(k, j)) / f.sigma[j];
      if (scaled == cplx(0.0)) continue;
      for (int i = 0; i < n; ++i) b(i, j) += xp(i, k) * scaled;
    }
  const DenseMatrix reduced = matmul_adj_left(f.u, b);
  const Eig eig = eig_dense(reduced);

  model.rank = r;
  model.dt = dt;
  model.mu = eig.values;
  model.modes = DenseMatrix(n, r);
  const DenseMatrix lifted = matmul(b, eig.vectors);
  const DenseMatrix projected = matmul(f.u, eig.vectors);
  double mu_scale = 0.0;
  for (const cplx& mu : model.mu) mu_scale = std::max(mu_scale, std::abs(mu));
  for (int j = 0; j < r; ++j) {
    double norm = 0.0;
    for (int i = 0; i < n; ++i) norm += std::norm(lifted(i, j));
    norm = std::sqrt(norm);
    // a vanishing eigenvalue leaves only round-off in its lift, so dividing
    // by it would manufacture a garbage direction
    const bool degenerate =
        std::abs(model.mu[j]) <= mu_scale * 1e-14 || norm == 0.0;
    if (degenerate)
      model.warnings.push_back("mode " + std::to_string(j) +
                               " lifted through the projected basis: its "
                               "eigenvalue vanishes");
    double pnorm = 0.0;
    if (degenerate)
      for (int i = 0; i < n; ++i) pnorm += std::norm(projected(i, j));
    const double scale = degenerate ? 1.0 / std::sqrt(pnorm) : 1.0 / norm;
    for (int i = 0; i < n; ++i)
      model.modes(i, j) = (degenerate ? projected(i, j) : lifted(i, j)) * scale;
  }

  DenseMatrix x1(n, 1);
  for (int i = 0; i < n; ++i) x1(i, 0) = x0[i];
  const DenseMatrix amp = least_squares_solve(model.modes, x1);

  std::vector<int> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a2, int b2) {
    return std::abs(amp(a2, 0)) > std::abs(amp(b2, 0));
  });

  DmdModel sorted = model;
  sorted.amplitudes.resize(r);
  sorted.omega.resize(r);
  for (int j = 0; j < r; ++j) {
    const int src = order[j];
    sorted.mu[j] = model.mu[src];
    sorted.amplitudes[j] = amp(src, 0);
    for (int i = 0; i < n; ++i) sorted.modes(i, j) = model.modes(i, src);
    // an exactly nilpotent direction has no finite decay rate
    sorted.omega[j] = sorted.mu[j] == cplx(0.0)
                          ? cplx(-std::numeric_limits<double>::infinity(), 0.0)
                          : std::log(sorted.mu[j]) / dt;
  }
  return sorted;
}

}  // namespace

DmdModel dmd_fit(const RealMat& snapshots, int rank, double dt) {
  const int frames = snapshots.rows, n = snapshots.cols;
  const int m = frames - 1;
  if (rank < 1) throw ShapeError("dmd_fit: rank must be at least 1");
  if (frames < rank + 1)
    throw ShapeError("dmd_fit: need at least rank + 1 snapshots");
  if (rank > std::min(n, m))
    throw ShapeError("dmd_fit: rank exceeds the snapshot matrix");
  if (!(dt > 0.0)) throw Error("dmd_fit: dt must be positive");

  DenseMatrix x(n, m), xp(n, m);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < n; ++i) {
      x(i, k) = snapshots(k, i);
      xp(i, k) = snapshots(k + 1, i);
    }
  std::vector<double> x0(n);
  for (int i = 0; i < n; ++i) x0[i] = snapshots(0, i);
  return fit_pair_columns(x, xp, rank, dt, x0);
}

DmdModel dmd_fit_pairs(const RealMat& x_rows, const RealMat& xp_rows, int rank,
                       double dt) {
  const int m = x_rows.rows, n = x_rows.cols;
  if (xp_rows.rows != m || xp_rows.cols != n)
    throw ShapeError("dmd_fit_pairs: pair matrices must match");
  if (rank < 1) throw ShapeError("dmd_fit_pairs: rank must be at least 1");
  if (rank > std::min(n, m))
    throw ShapeError("dmd_fit_pairs: rank exceeds the pair matrix");
  if (!(dt > 0.0)) throw Error("dmd_fit_pairs: dt must be positive");

  DenseMatrix x(n, m), xp(n, m);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < n; ++i) {
      x(i, k) = x_rows(k, i);
      xp(i, k) = xp_rows(k, i);
    }
  std::vector<double> x0(n);
  for (int i = 0; i < n; ++i) x0[i] = x_rows(0, i);
  return fit_pair_columns(x, xp, rank, dt, x0);
}

std::vector<double> dmd_predict(const DmdModel& model,
                                const std::vector<double>& x0, long k) {
  const int n = model.modes.rows, r = model.rank;
  if (static_cast<int>(x0.size()) != n)
    throw ShapeError("dmd_predict: state size does not match the modes");
  if (k < 0) throw ShapeError("dmd_predict: step count must be nonnegative");

  DenseMatrix rhs(n, 1);
  for (int i = 0; i < n; ++i) rhs(i, 0) = x0[i];
  const DenseMatrix z = least_squares_solve(model.modes, rhs);

  std::vector<cplx> scaled(r);
  for (int j = 0; j < r; ++j) {
    // complex pow goes through exp(k log mu), which NaNs at mu = 0
    cplx gain(1.0);
    if (k > 0)
      gain = model.mu[j] == cplx(0.0)
                 ? cplx(0.0)
                 : std::pow(model.mu[j], static_cast<double>(k));
    scaled[j] = gain * z(j, 0);
  }

  std::vector<double> out(n, 0.0);
  for (int j = 0; j < r; ++j) {
    if (scaled[j] == cplx(0.0)) continue;
    for (int i = 0; i < n; ++i)
      out[i] += (model.modes(i, j) * scaled[j]).real();
  }
  return out;
}

}  // namespace ndmd
