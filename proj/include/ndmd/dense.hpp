#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <vector>

namespace ndmd {

using cplx = std::complex<double>;

/// Dense real matrix, row-major. The workhorse container for network
/// activations and gradients.
struct RealMat {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  RealMat() = default;
  RealMat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
  RealMat(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {}

  double& operator()(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return v.size(); }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  static RealMat zeros(int r, int c) { return RealMat(r, c); }
  static RealMat ones(int r, int c) {
    RealMat m(r, c);
    std::fill(m.v.begin(), m.v.end(), 1.0);
    return m;
  }
  static RealMat identity(int n) {
    RealMat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

/// Dense complex matrix, row-major. Real matrices are the zero-imaginary
/// special case.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<cplx> v;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, cplx(0.0, 0.0)) {}

  cplx& operator()(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  cplx operator()(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
  size_t size() const { return v.size(); }
  cplx* data() { return v.data(); }
  const cplx* data() const { return v.data(); }

  static DenseMatrix zeros(int r, int c) { return DenseMatrix(r, c); }
  static DenseMatrix identity(int n) {
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = cplx(1.0, 0.0);
    return m;
  }
  static DenseMatrix from_parts(const RealMat& re, const RealMat& im);
  static DenseMatrix from_real(const RealMat& re);

  DenseMatrix adjoint() const;
  DenseMatrix transpose() const;
  RealMat real_part() const;
  RealMat imag_part() const;
  bool all_finite() const;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
/// a^H * b without forming the adjoint.
DenseMatrix matmul_adj_left(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(cplx s, const DenseMatrix& a);

RealMat operator+(const RealMat& a, const RealMat& b);
RealMat operator-(const RealMat& a, const RealMat& b);

double frob_norm(const DenseMatrix& a);
double max_abs(const DenseMatrix& a);
double max_abs(const RealMat& a);
bool all_finite(const RealMat& a);

}  // namespace ndmd
