#pragma once

namespace ndmd::kernels::detail {

/// One entry per hot loop. gemm_nn is the no-transpose core; the public
/// wrapper materializes transposed operands before dispatching.
struct KernelTable {
  void (*gemm_nn)(int m, int n, int k, double alpha, const double* a, int lda,
                  const double* b, int ldb, double beta, double* c, int ldc);
  void (*axpy)(int n, double a, const double* x, double* y);
  double (*dot)(int n, const double* x, const double* y);
  void (*scale)(int n, double a, double* x);
  double (*sumsq)(int n, const double* x);
  void (*sincos)(int n, const double* x, double* s, double* c);
  void (*exp_vec)(int n, const double* x, double* y);
  void (*elu)(int n, const double* x, double* y);
  void (*elu_grad)(int n, const double* x, const double* g, double* out);
  void (*zdotc)(int n, const double* x, const double* y, double* re, double* im);
  void (*zrot)(int n, double* x, double* y, double c, double s);
  void (*zscal)(int n, double* x, double pr, double pi);
  void (*zaxpy)(int n, double ar, double ai, const double* x, double* y);
  void (*d2q9_collide)(int ncells, double* const* f, double omega, double gx, double gy);
};

const KernelTable& scalar_table();
const KernelTable& avx2_table();  // valid only when compiled in and CPU supports it

}  // namespace ndmd::kernels::detail
