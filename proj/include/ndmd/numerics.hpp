#pragma once

#include <vector>

#include "ndmd/dense.hpp"

namespace ndmd {

/// Thin SVD, A = U diag(sigma) V^H with sigma descending. Computed by
/// one-sided Jacobi on the taller factor; with exact rank deficiency the
/// trailing singular values are exactly zero and the matching U columns are
/// an orthonormal completion. Each U column is phase-fixed so its
/// largest-magnitude entry is real and positive.
struct Svd {
  DenseMatrix u;
  std::vector<double> sigma;
  DenseMatrix v;
};

Svd svd(const DenseMatrix& a, int max_sweeps = 60);

/// Top-r factors of the thin SVD. Trailing zero singular values are allowed;
/// non-finite input is rejected.
Svd svd_truncated(const DenseMatrix& a, int r);

/// Householder QR with column pivoting, A P = Q R. Serves both the
/// least-squares solve and the Gram-matrix solves the training gradients
/// need; cond() is the cheap |R_00|/|R_kk| estimate used for the
/// ill-conditioned-basis check.
class QrPivoted {
 public:
  explicit QrPivoted(const DenseMatrix& a);

  /// argmin_x ||A x - b||_F, column by column. Rank-deficient trailing
  /// pivots contribute zero components (basic solution).
  DenseMatrix solve(const DenseMatrix& b) const;

  /// (A^H A)^{-1} m via two triangular solves against R.
  DenseMatrix gram_solve(const DenseMatrix& m) const;

  double cond() const;
  int rank(double rtol = 1e-12) const;
  const std::vector<int>& perm() const { return perm_; }
  const DenseMatrix& r() const { return r_; }

  /// Q^H b (thin: first cols(A) rows are the least-squares RHS).
  DenseMatrix apply_qh(const DenseMatrix& b) const;

 private:
  int m_ = 0, n_ = 0;
  std::vector<std::vector<cplx>> house_;  // reflector k spans rows k..m-1
  std::vector<double> tau_;
  DenseMatrix r_;  // n x n upper triangle of the factorization
  std::vector<int> perm_;
};

/// argmin_X ||A X - B||_F for a numerically full-rank A; throws
/// IllConditionedError (with the R-diagonal condition estimate) when the
/// smallest pivot falls below 1e-12 of the largest.
DenseMatrix least_squares_solve(const DenseMatrix& a, const DenseMatrix& b);

/// Least-squares pseudoinverse of a tall basis, for export and analysis.
/// Solve paths should call least_squares_solve instead of forming this.
DenseMatrix basis_pinv(const DenseMatrix& phi);

/// Eigen decomposition of a small dense square matrix (n <= 64): complex
/// Schur form via Hessenberg reduction plus shifted QR, then triangular
/// back-substitution for the vectors. Values are sorted by descending
/// magnitude (ties: descending real, then imaginary part); vectors are unit
/// norm with the largest entry real positive. Throws NonConvergenceError
/// past 100*n QR steps.
struct Eig {
  std::vector<cplx> values;
  DenseMatrix vectors;  // column j pairs with values[j]
};

Eig eig_dense(const DenseMatrix& a);

}  // namespace ndmd
