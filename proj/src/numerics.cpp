#include "ndmd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ndmd/errors.hpp"
#include "ndmd/kernels.hpp"

namespace ndmd {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double* raw(std::vector<cplx>& v) { return reinterpret_cast<double*>(v.data()); }
const double* raw(const std::vector<cplx>& v) {
  return reinterpret_cast<const double*>(v.data());
}

double col_norm2(const std::vector<cplx>& v, int from = 0) {
  return kernels::sumsq(static_cast<int>(2 * (v.size() - from)),
                        raw(v) + 2 * from);
}

cplx col_dotc(const std::vector<cplx>& x, const std::vector<cplx>& y, int from = 0) {
  double re, im;
  kernels::zdotc(static_cast<int>(x.size() - from), raw(x) + 2 * from,
                 raw(y) + 2 * from, &re, &im);
  return cplx(re, im);
}

std::vector<std::vector<cplx>> to_cols(const DenseMatrix& a) {
  std::vector<std::vector<cplx>> cols(a.cols, std::vector<cplx>(a.rows));
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) cols[j][i] = a(i, j);
  return cols;
}

/// Rotate the phase of each (U, V) column pair so the largest-magnitude
/// U entry is real and positive. Keeps U sigma V^H unchanged.
void fix_phases(DenseMatrix& u, DenseMatrix& v) {
  for (int j = 0; j < u.cols; ++j) {
    int imax = 0;
    double best = -1.0;
    for (int i = 0; i < u.rows; ++i) {
      const double m = std::norm(u(i, j));
      if (m > best) {
        best = m;
        imax = i;
      }
    }
    if (best <= 0.0) continue;
    const cplx z = u(imax, j);
    const cplx ph = std::conj(z) / std::abs(z);
    for (int i = 0; i < u.rows; ++i) u(i, j) *= ph;
    for (int i = 0; i < v.rows; ++i) v(i, j) *= ph;
  }
}

}  // namespace

Svd svd(const DenseMatrix& a, int max_sweeps) {
  if (a.rows <= 0 || a.cols <= 0) throw ShapeError("svd: empty matrix");
  const bool flip = a.rows < a.cols;
  const DenseMatrix work_in = flip ? a.adjoint() : a;
  const int m = work_in.rows, n = work_in.cols;

  auto w = to_cols(work_in);
  std::vector<std::vector<cplx>> v(n, std::vector<cplx>(n, cplx(0, 0)));
  for (int j = 0; j < n; ++j) v[j][j] = cplx(1, 0);

  std::vector<double> norm2(n);
  bool converged = (n == 1);
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (int j = 0; j < n; ++j) norm2[j] = col_norm2(w[j]);
    bool rotated = false;
    const double debris = std::pow(std::max(m, n) * kEps, 2);
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double aa = norm2[p], bb = norm2[q];
        if (aa == 0.0 || bb == 0.0) continue;
        // a column annihilated by an earlier rotation leaves round-off whose
        // direction is meaningless; rotating against it cycles forever, and
        // anything this small lands under the rank cutoff regardless
        if (std::min(aa, bb) <= std::max(aa, bb) * debris) continue;
        const cplx cpq = col_dotc(w[p], w[q]);
        const double cmag = std::abs(cpq);
        if (cmag <= 1e-15 * std::sqrt(aa * bb)) continue;
        rotated = true;

        // absorb the phase of <w_p, w_q> into column q, then rotate real
        const cplx ph = std::conj(cpq) / cmag;
        kernels::zscal(m, raw(w[q]), ph.real(), ph.imag());
        kernels::zscal(n, raw(v[q]), ph.real(), ph.imag());

        const double zeta = (bb - aa) / (2.0 * cmag);
        const double t =
            (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        kernels::zrot(m, raw(w[p]), raw(w[q]), cs, sn);
        kernels::zrot(n, raw(v[p]), raw(v[q]), cs, sn);
        norm2[p] = cs * cs * aa - 2.0 * cs * sn * cmag + sn * sn * bb;
        norm2[q] = sn * sn * aa + 2.0 * cs * sn * cmag + cs * cs * bb;
      }
    }
    if (!rotated) converged = true;
  }
  if (!converged) throw NonConvergenceError("svd: Jacobi sweeps did not converge");

  std::vector<double> sig(n);
  for (int j = 0; j < n; ++j) sig[j] = std::sqrt(col_norm2(w[j]));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return sig[i] > sig[j]; });

  const double smax = sig[order[0]];
  const double cutoff = smax * std::max(m, n) * kEps;

  Svd out;
  out.u = DenseMatrix(m, n);
  out.v = DenseMatrix(n, n);
  out.sigma.resize(n);
  std::vector<int> dead;
  for (int jj = 0; jj < n; ++jj) {
    const int j = order[jj];
    if (sig[j] <= cutoff) {
      out.sigma[jj] = 0.0;
      dead.push_back(jj);
      for (int i = 0; i < n; ++i) out.v(i, jj) = v[j][i];
      continue;
    }
    out.sigma[jj] = sig[j];
    const double inv = 1.0 / sig[j];
    for (int i = 0; i < m; ++i) out.u(i, jj) = w[j][i] * inv;
    for (int i = 0; i < n; ++i) out.v(i, jj) = v[j][i];
  }

  // orthonormal completion for exactly deficient columns
  for (int jj : dead) {
    for (int e = 0; e < m; ++e) {
      std::vector<cplx> cand(m, cplx(0, 0));
      cand[e] = cplx(1, 0);
      for (int pass = 0; pass < 2; ++pass)
        for (int c = 0; c < n; ++c) {
          if (out.sigma[c] == 0.0 && c >= jj) continue;  // not yet filled
          cplx d(0, 0);
          for (int i = 0; i < m; ++i) d += std::conj(out.u(i, c)) * cand[i];
          for (int i = 0; i < m; ++i) cand[i] -= d * out.u(i, c);
        }
      double nn = 0.0;
      for (const cplx& z : cand) nn += std::norm(z);
      if (nn > 0.25) {
        const double inv = 1.0 / std::sqrt(nn);
        for (int i = 0; i < m; ++i) out.u(i, jj) = cand[i] * inv;
        break;
      }
    }
  }

  if (flip) std::swap(out.u, out.v);
  fix_phases(out.u, out.v);
  return out;
}

Svd svd_truncated(const DenseMatrix& a, int r) {
  if (r < 1 || r > std::min(a.rows, a.cols))
    throw ShapeError("svd_truncated: rank " + std::to_string(r) +
                     " out of range for " + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols));
  if (!a.all_finite()) throw Error("svd_truncated: non-finite input");
  Svd full = svd(a);
  if (r == static_cast<int>(full.sigma.size())) return full;
  Svd out;
  out.sigma.assign(full.sigma.begin(), full.sigma.begin() + r);
  out.u = DenseMatrix(full.u.rows, r);
  out.v = DenseMatrix(full.v.rows, r);
  for (int i = 0; i < full.u.rows; ++i)
    for (int j = 0; j < r; ++j) out.u(i, j) = full.u(i, j);
  for (int i = 0; i < full.v.rows; ++i)
    for (int j = 0; j < r; ++j) out.v(i, j) = full.v(i, j);
  return out;
}

// ---- QR with column pivoting -------------------------------------------------

QrPivoted::QrPivoted(const DenseMatrix& a) : m_(a.rows), n_(a.cols) {
  if (m_ <= 0 || n_ <= 0) throw ShapeError("qr: empty matrix");
  if (m_ < n_) throw ShapeError("qr: expected rows >= cols");
  auto work = to_cols(a);
  perm_.resize(n_);
  std::iota(perm_.begin(), perm_.end(), 0);
  r_ = DenseMatrix(n_, n_);
  house_.assign(n_, {});
  tau_.assign(n_, 0.0);

  std::vector<double> rem(n_);
  for (int j = 0; j < n_; ++j) rem[j] = col_norm2(work[j]);

  for (int k = 0; k < n_; ++k) {
    int jmax = k;
    for (int j = k + 1; j < n_; ++j)
      if (rem[j] > rem[jmax]) jmax = j;
    if (jmax != k) {
      std::swap(work[k], work[jmax]);
      std::swap(rem[k], rem[jmax]);
      std::swap(perm_[k], perm_[jmax]);
      for (int i = 0; i < k; ++i) std::swap(r_(i, k), r_(i, jmax));
    }

    const double normx = std::sqrt(col_norm2(work[k], k));
    if (normx == 0.0) {
      r_(k, k) = cplx(0, 0);
      continue;
    }
    const cplx x0 = work[k][k];
    const cplx phase = std::abs(x0) == 0.0 ? cplx(1, 0) : x0 / std::abs(x0);
    const cplx alpha = -phase * normx;

    std::vector<cplx> vk(work[k].begin() + k, work[k].end());
    vk[0] -= alpha;
    const double vnorm2 = col_norm2(vk);
    const double tk = 2.0 / vnorm2;
    r_(k, k) = alpha;

    const int len = m_ - k;
    for (int j = k + 1; j < n_; ++j) {
      cplx wj;
      {
        double re, im;
        kernels::zdotc(len, raw(vk), raw(work[j]) + 2 * k, &re, &im);
        wj = cplx(re, im);
      }
      const cplx coef = -tk * wj;
      kernels::zaxpy(len, coef.real(), coef.imag(), raw(vk), raw(work[j]) + 2 * k);
      r_(k, j) = work[j][k];
      rem[j] = col_norm2(work[j], k + 1);
    }
    house_[k] = std::move(vk);
    tau_[k] = tk;
  }
}

DenseMatrix QrPivoted::apply_qh(const DenseMatrix& b) const {
  if (b.rows != m_) throw ShapeError("qr: rhs row count mismatch");
  DenseMatrix y = b;
  for (int k = 0; k < n_; ++k) {
    if (tau_[k] == 0.0) continue;
    const auto& v = house_[k];
    for (int j = 0; j < y.cols; ++j) {
      cplx w(0, 0);
      for (int i = 0; i < m_ - k; ++i) w += std::conj(v[i]) * y(k + i, j);
      w *= tau_[k];
      for (int i = 0; i < m_ - k; ++i) y(k + i, j) -= w * v[i];
    }
  }
  return y;
}

int QrPivoted::rank(double rtol) const {
  const double top = std::abs(r_(0, 0));
  if (top == 0.0) return 0;
  int r = 0;
  while (r < n_ && std::abs(r_(r, r)) > rtol * top) ++r;
  return r;
}

double QrPivoted::cond() const {
  const double top = std::abs(r_(0, 0));
  const double bot = std::abs(r_(n_ - 1, n_ - 1));
  if (bot == 0.0) return std::numeric_limits<double>::infinity();
  return top / bot;
}

DenseMatrix QrPivoted::solve(const DenseMatrix& b) const {
  const DenseMatrix y = apply_qh(b);
  const int rk = rank();
  DenseMatrix xp(n_, b.cols);
  for (int j = 0; j < b.cols; ++j) {
    for (int i = rk - 1; i >= 0; --i) {
      cplx acc = y(i, j);
      for (int p = i + 1; p < rk; ++p) acc -= r_(i, p) * xp(p, j);
      xp(i, j) = acc / r_(i, i);
    }
  }
  DenseMatrix x(n_, b.cols);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < b.cols; ++j) x(perm_[i], j) = xp(i, j);
  return x;
}

DenseMatrix QrPivoted::gram_solve(const DenseMatrix& mrhs) const {
  if (mrhs.rows != n_) throw ShapeError("gram_solve: rhs row count mismatch");
  if (rank() < n_) throw IllConditionedError("gram_solve: singular Gram matrix", cond());
  DenseMatrix w(n_, mrhs.cols);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < mrhs.cols; ++j) w(i, j) = mrhs(perm_[i], j);
  // R^H z = w (forward), R y = z (backward)
  DenseMatrix z(n_, mrhs.cols);
  for (int j = 0; j < mrhs.cols; ++j)
    for (int i = 0; i < n_; ++i) {
      cplx acc = w(i, j);
      for (int p = 0; p < i; ++p) acc -= std::conj(r_(p, i)) * z(p, j);
      z(i, j) = acc / std::conj(r_(i, i));
    }
  DenseMatrix y(n_, mrhs.cols);
  for (int j = 0; j < mrhs.cols; ++j)
    for (int i = n_ - 1; i >= 0; --i) {
      cplx acc = z(i, j);
      for (int p = i + 1; p < n_; ++p) acc -= r_(i, p) * y(p, j);
      y(i, j) = acc / r_(i, i);
    }
  DenseMatrix out(n_, mrhs.cols);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < mrhs.cols; ++j) out(perm_[i], j) = y(i, j);
  return out;
}

DenseMatrix least_squares_solve(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows < a.cols) throw ShapeError("least_squares_solve: A must be tall");
  if (a.rows != b.rows) throw ShapeError("least_squares_solve: row mismatch");
  const QrPivoted qr(a);
  if (qr.rank(1e-12) < a.cols)
    throw IllConditionedError("least_squares_solve: basis numerically rank-deficient",
                              qr.cond());
  return qr.solve(b);
}

DenseMatrix basis_pinv(const DenseMatrix& phi) {
  return least_squares_solve(phi, DenseMatrix::identity(phi.rows));
}

// ---- eigensolver ---------------------------------------------------------------

namespace {

struct Givens {
  double c;
  cplx s;
};

Givens make_givens(cplx f, cplx g) {
  if (g == cplx(0, 0)) return {1.0, cplx(0, 0)};
  if (f == cplx(0, 0)) return {0.0, std::conj(g) / std::abs(g)};
  const double d = std::sqrt(std::norm(f) + std::norm(g));
  const cplx fu = f / std::abs(f);
  return {std::abs(f) / d, fu * std::conj(g) / d};
}

/// rows i, i+1 of h over columns [c0, c1)
void rot_rows(DenseMatrix& h, int i, const Givens& g, int c0, int c1) {
  for (int j = c0; j < c1; ++j) {
    const cplx a = h(i, j), b = h(i + 1, j);
    h(i, j) = g.c * a + g.s * b;
    h(i + 1, j) = -std::conj(g.s) * a + g.c * b;
  }
}

/// columns i, i+1 of h over rows [r0, r1) (right-multiplying by G^H)
void rot_cols(DenseMatrix& h, int i, const Givens& g, int r0, int r1) {
  for (int r = r0; r < r1; ++r) {
    const cplx a = h(r, i), b = h(r, i + 1);
    h(r, i) = g.c * a + std::conj(g.s) * b;
    h(r, i + 1) = -g.s * a + g.c * b;
  }
}

}  // namespace

Eig eig_dense(const DenseMatrix& a) {
  if (a.rows != a.cols) throw ShapeError("eig: matrix must be square");
  if (a.rows > 64) throw ShapeError("eig: only small reduced operators (n <= 64)");
  if (!a.all_finite()) throw Error("eig: non-finite input");
  const int n = a.rows;
  Eig out;
  if (n == 0) return out;
  if (n == 1) {
    out.values = {a(0, 0)};
    out.vectors = DenseMatrix::identity(1);
    return out;
  }

  DenseMatrix h = a;
  DenseMatrix q = DenseMatrix::identity(n);

  // Hessenberg reduction by Householder reflectors
  for (int k = 0; k + 2 < n; ++k) {
    const int len = n - k - 1;
    double nx = 0.0;
    for (int i = 0; i < len; ++i) nx += std::norm(h(k + 1 + i, k));
    nx = std::sqrt(nx);
    if (nx == 0.0) continue;
    const cplx x0 = h(k + 1, k);
    const cplx phase = std::abs(x0) == 0.0 ? cplx(1, 0) : x0 / std::abs(x0);
    const cplx alpha = -phase * nx;
    std::vector<cplx> v(len);
    for (int i = 0; i < len; ++i) v[i] = h(k + 1 + i, k);
    v[0] -= alpha;
    double vn2 = 0.0;
    for (const cplx& z : v) vn2 += std::norm(z);
    const double tk = 2.0 / vn2;

    // left: rows k+1..n-1
    for (int j = k; j < n; ++j) {
      cplx w(0, 0);
      for (int i = 0; i < len; ++i) w += std::conj(v[i]) * h(k + 1 + i, j);
      w *= tk;
      for (int i = 0; i < len; ++i) h(k + 1 + i, j) -= w * v[i];
    }
    // right: columns k+1..n-1
    for (int i = 0; i < n; ++i) {
      cplx w(0, 0);
      for (int j = 0; j < len; ++j) w += h(i, k + 1 + j) * v[j];
      w *= tk;
      for (int j = 0; j < len; ++j) h(i, k + 1 + j) -= w * std::conj(v[j]);
    }
    for (int i = 0; i < n; ++i) {
      cplx w(0, 0);
      for (int j = 0; j < len; ++j) w += q(i, k + 1 + j) * v[j];
      w *= tk;
      for (int j = 0; j < len; ++j) q(i, k + 1 + j) -= w * std::conj(v[j]);
    }
    h(k + 1, k) = alpha;
    for (int i = k + 2; i < n; ++i) h(i, k) = cplx(0, 0);
  }

  // shifted QR with implicit single shift and bulge chasing
  const int max_steps = 100 * n;
  int steps = 0;
  int stagnant = 0;
  int hi = n - 1;
  while (hi > 0) {
    for (int i = 0; i < hi; ++i)
      if (std::abs(h(i + 1, i)) <=
          kEps * (std::abs(h(i, i)) + std::abs(h(i + 1, i + 1))))
        h(i + 1, i) = cplx(0, 0);
    if (h(hi, hi - 1) == cplx(0, 0)) {
      --hi;
      stagnant = 0;
      continue;
    }
    int lo = hi - 1;
    while (lo > 0 && h(lo, lo - 1) != cplx(0, 0)) --lo;
    if (++steps > max_steps)
      throw NonConvergenceError(
          "eig: QR iteration exceeded the sweep cap (n=" + std::to_string(n) +
          ", unresolved subdiagonal " + std::to_string(std::abs(h(hi, hi - 1))) +
          ", scale " + std::to_string(frob_norm(h)) + ")");

    // Wilkinson shift from the trailing 2x2, with an occasional exceptional
    // shift if a window refuses to deflate
    cplx mu;
    {
      const cplx a11 = h(hi - 1, hi - 1), a12 = h(hi - 1, hi);
      const cplx a21 = h(hi, hi - 1), a22 = h(hi, hi);
      const cplx tr = a11 + a22;
      const cplx disc = std::sqrt(tr * tr * 0.25 - (a11 * a22 - a12 * a21));
      const cplx m1 = tr * 0.5 + disc, m2 = tr * 0.5 - disc;
      mu = std::abs(m1 - a22) < std::abs(m2 - a22) ? m1 : m2;
      if (++stagnant % 16 == 0) mu = a22 + cplx(1.5 * std::abs(a21), 0);
    }

    cplx x = h(lo, lo) - mu;
    cplx y = h(lo + 1, lo);
    for (int i = lo; i < hi; ++i) {
      const Givens g = make_givens(x, y);
      rot_rows(h, i, g, std::max(0, i - 1), n);
      rot_cols(h, i, g, 0, std::min(i + 3, hi + 1));
      rot_cols(q, i, g, 0, n);
      if (i + 1 < hi) {
        x = h(i + 1, i);
        y = h(i + 2, i);
      }
    }
  }

  out.values.resize(n);
  for (int i = 0; i < n; ++i) out.values[i] = h(i, i);

  // eigenvectors of the triangular factor, then rotate back through q
  const double tnorm = std::max(frob_norm(h), 1e-300);
  DenseMatrix vecs(n, n);
  std::vector<cplx> yv(n);
  for (int k = 0; k < n; ++k) {
    std::fill(yv.begin(), yv.end(), cplx(0, 0));
    yv[k] = cplx(1, 0);
    for (int i = k - 1; i >= 0; --i) {
      cplx acc(0, 0);
      for (int j = i + 1; j <= k; ++j) acc += h(i, j) * yv[j];
      cplx denom = h(i, i) - out.values[k];
      if (std::abs(denom) < kEps * tnorm) denom = cplx(kEps * tnorm, 0);
      yv[i] = -acc / denom;
    }
    for (int i = 0; i < n; ++i) {
      cplx acc(0, 0);
      for (int j = 0; j <= k; ++j) acc += q(i, j) * yv[j];
      vecs(i, k) = acc;
    }
  }
  // normalize: unit norm, largest entry real positive
  for (int j = 0; j < n; ++j) {
    double nn = 0.0;
    int imax = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
      const double m = std::norm(vecs(i, j));
      nn += m;
      if (m > best) {
        best = m;
        imax = i;
      }
    }
    const cplx z = vecs(imax, j);
    const cplx scale = std::conj(z) / (std::abs(z) * std::sqrt(nn));
    for (int i = 0; i < n; ++i) vecs(i, j) *= scale;
  }
  // deterministic order: descending magnitude, ties by real then imaginary
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    const double mi = std::abs(out.values[i]), mj = std::abs(out.values[j]);
    if (mi != mj) return mi > mj;
    if (out.values[i].real() != out.values[j].real())
      return out.values[i].real() > out.values[j].real();
    return out.values[i].imag() > out.values[j].imag();
  });
  std::vector<cplx> sorted_vals(n);
  DenseMatrix sorted_vecs(n, n);
  for (int jj = 0; jj < n; ++jj) {
    sorted_vals[jj] = out.values[order[jj]];
    for (int i = 0; i < n; ++i) sorted_vecs(i, jj) = vecs(i, order[jj]);
  }
  out.values = std::move(sorted_vals);
  out.vectors = std::move(sorted_vecs);
  return out;
}

}  // namespace ndmd
