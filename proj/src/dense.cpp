#include "ndmd/dense.hpp"

#include <cmath>
#include <string>

#include "ndmd/errors.hpp"
#include "ndmd/kernels.hpp"

namespace ndmd {
namespace {

void check_mul(int ac, int br, const char* what) {
  if (ac != br)
    throw ShapeError(std::string(what) + ": inner dimensions " +
                     std::to_string(ac) + " and " + std::to_string(br));
}

void check_same(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ShapeError(std::string(what) + ": " + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                     "x" + std::to_string(b.cols));
}

}  // namespace

DenseMatrix DenseMatrix::from_parts(const RealMat& re, const RealMat& im) {
  if (re.rows != im.rows || re.cols != im.cols)
    throw ShapeError("from_parts: mismatched real and imaginary shapes");
  DenseMatrix m(re.rows, re.cols);
  for (size_t i = 0; i < m.v.size(); ++i) m.v[i] = cplx(re.v[i], im.v[i]);
  return m;
}

DenseMatrix DenseMatrix::from_real(const RealMat& re) {
  DenseMatrix m(re.rows, re.cols);
  for (size_t i = 0; i < m.v.size(); ++i) m.v[i] = cplx(re.v[i], 0.0);
  return m;
}

DenseMatrix DenseMatrix::adjoint() const {
  DenseMatrix m(cols, rows);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(j, i) = std::conj((*this)(i, j));
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix m(cols, rows);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(j, i) = (*this)(i, j);
  return m;
}

RealMat DenseMatrix::real_part() const {
  RealMat m(rows, cols);
  for (size_t i = 0; i < v.size(); ++i) m.v[i] = v[i].real();
  return m;
}

RealMat DenseMatrix::imag_part() const {
  RealMat m(rows, cols);
  for (size_t i = 0; i < v.size(); ++i) m.v[i] = v[i].imag();
  return m;
}

bool DenseMatrix::all_finite() const {
  for (const cplx& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

namespace {

struct Planes {
  RealMat re, im;
  explicit Planes(const DenseMatrix& a) : re(a.rows, a.cols), im(a.rows, a.cols) {
    for (size_t i = 0; i < a.v.size(); ++i) {
      re.v[i] = a.v[i].real();
      im.v[i] = a.v[i].imag();
    }
  }
};

DenseMatrix mul_planes(const Planes& a, const Planes& b, bool adj_a, int m,
                       int n, int k) {
  // (Ar + iAi)(Br + iBi); for A^H the transposed planes with Ai negated.
  RealMat cr(m, n), ci(m, n);
  const int lda = a.re.cols, ldb = b.re.cols;
  const double si = adj_a ? -1.0 : 1.0;
  using kernels::gemm;
  gemm(adj_a, false, m, n, k, 1.0, a.re.data(), lda, b.re.data(), ldb, 0.0,
       cr.data(), n);
  gemm(adj_a, false, m, n, k, -si, a.im.data(), lda, b.im.data(), ldb, 1.0,
       cr.data(), n);
  gemm(adj_a, false, m, n, k, 1.0, a.re.data(), lda, b.im.data(), ldb, 0.0,
       ci.data(), n);
  gemm(adj_a, false, m, n, k, si, a.im.data(), lda, b.re.data(), ldb, 1.0,
       ci.data(), n);
  return DenseMatrix::from_parts(cr, ci);
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  check_mul(a.cols, b.rows, "matmul");
  return mul_planes(Planes(a), Planes(b), false, a.rows, b.cols, a.cols);
}

DenseMatrix matmul_adj_left(const DenseMatrix& a, const DenseMatrix& b) {
  check_mul(a.rows, b.rows, "matmul_adj_left");
  return mul_planes(Planes(a), Planes(b), true, a.cols, b.cols, a.rows);
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  check_same(a, b, "operator+");
  DenseMatrix c(a.rows, a.cols);
  for (size_t i = 0; i < c.v.size(); ++i) c.v[i] = a.v[i] + b.v[i];
  return c;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  check_same(a, b, "operator-");
  DenseMatrix c(a.rows, a.cols);
  for (size_t i = 0; i < c.v.size(); ++i) c.v[i] = a.v[i] - b.v[i];
  return c;
}

DenseMatrix operator*(cplx s, const DenseMatrix& a) {
  DenseMatrix c(a.rows, a.cols);
  for (size_t i = 0; i < c.v.size(); ++i) c.v[i] = s * a.v[i];
  return c;
}

RealMat operator+(const RealMat& a, const RealMat& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ShapeError("operator+: shape mismatch");
  RealMat c = a;
  kernels::axpy(static_cast<int>(c.size()), 1.0, b.data(), c.data());
  return c;
}

RealMat operator-(const RealMat& a, const RealMat& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ShapeError("operator-: shape mismatch");
  RealMat c = a;
  kernels::axpy(static_cast<int>(c.size()), -1.0, b.data(), c.data());
  return c;
}

double frob_norm(const DenseMatrix& a) {
  const double* raw = reinterpret_cast<const double*>(a.v.data());
  return std::sqrt(kernels::sumsq(static_cast<int>(2 * a.v.size()), raw));
}

double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (const cplx& z : a.v) m = std::max(m, std::abs(z));
  return m;
}

double max_abs(const RealMat& a) {
  double m = 0.0;
  for (double x : a.v) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(const RealMat& a) {
  for (double x : a.v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace ndmd
