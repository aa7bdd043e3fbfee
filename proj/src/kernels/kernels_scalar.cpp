// Reference kernels. Plain loops, libm transcendentals. The AVX2 variants
// are tested against these.

#include <cmath>

#include "ndmd/kernels.hpp"
#include "kernel_table.hpp"

namespace ndmd::kernels::detail {
namespace {

void s_gemm_nn(int m, int n, int k, double alpha, const double* a, int lda,
               const double* b, int ldb, double beta, double* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * ldc;
    if (beta == 0.0) {
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    } else if (beta != 1.0) {
      for (int j = 0; j < n; ++j) ci[j] *= beta;
    }
    const double* ai = a + static_cast<std::size_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const double av = alpha * ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void s_axpy(int n, double a, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

double s_dot(int n, const double* x, const double* y) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void s_scale(int n, double a, double* x) {
  for (int i = 0; i < n; ++i) x[i] *= a;
}

double s_sumsq(int n, const double* x) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

void s_sincos(int n, const double* x, double* s, double* c) {
  for (int i = 0; i < n; ++i) {
    s[i] = std::sin(x[i]);
    c[i] = std::cos(x[i]);
  }
}

void s_exp_vec(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

void s_elu(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : std::expm1(x[i]);
}

void s_elu_grad(int n, const double* x, const double* g, double* out) {
  for (int i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : g[i] * std::exp(x[i]);
}

void s_zdotc(int n, const double* x, const double* y, double* re, double* im) {
  double ar = 0.0, ai = 0.0;
  for (int i = 0; i < n; ++i) {
    const double xr = x[2 * i], xi = x[2 * i + 1];
    const double yr = y[2 * i], yi = y[2 * i + 1];
    ar += xr * yr + xi * yi;
    ai += xr * yi - xi * yr;
  }
  *re = ar;
  *im = ai;
}

void s_zrot(int n, double* x, double* y, double c, double s) {
  for (int i = 0; i < 2 * n; ++i) {
    const double xv = x[i], yv = y[i];
    x[i] = c * xv - s * yv;
    y[i] = s * xv + c * yv;
  }
}

void s_zscal(int n, double* x, double pr, double pi) {
  for (int i = 0; i < n; ++i) {
    const double xr = x[2 * i], xi = x[2 * i + 1];
    x[2 * i] = xr * pr - xi * pi;
    x[2 * i + 1] = xr * pi + xi * pr;
  }
}

void s_zaxpy(int n, double ar, double ai, const double* x, double* y) {
  for (int i = 0; i < n; ++i) {
    const double xr = x[2 * i], xi = x[2 * i + 1];
    y[2 * i] += ar * xr - ai * xi;
    y[2 * i + 1] += ar * xi + ai * xr;
  }
}

void s_d2q9_collide(int ncells, double* const* f, double omega, double gx, double gy) {
  using namespace ndmd::kernels::d2q9;
  const double half_omega = 1.0 - 0.5 * omega;
  for (int i = 0; i < ncells; ++i) {
    double rho = 0.0, mx = 0.0, my = 0.0;
    for (int q = 0; q < 9; ++q) {
      const double fq = f[q][i];
      rho += fq;
      mx += EX[q] * fq;
      my += EY[q] * fq;
    }
    const double inv_rho = 1.0 / rho;
    const double ux = (mx + 0.5 * gx) * inv_rho;
    const double uy = (my + 0.5 * gy) * inv_rho;
    const double usq = ux * ux + uy * uy;
    for (int q = 0; q < 9; ++q) {
      const double eu = EX[q] * ux + EY[q] * uy;
      const double feq = W[q] * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - 1.5 * usq);
      const double force = half_omega * W[q] *
                           (3.0 * ((EX[q] - ux) * gx + (EY[q] - uy) * gy) +
                            9.0 * eu * (EX[q] * gx + EY[q] * gy));
      f[q][i] += -omega * (f[q][i] - feq) + force;
    }
  }
}

constexpr KernelTable kScalar = {
    s_gemm_nn, s_axpy,  s_dot,   s_scale, s_sumsq,        s_sincos, s_exp_vec,
    s_elu,     s_elu_grad, s_zdotc, s_zrot,  s_zscal, s_zaxpy, s_d2q9_collide,
};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace ndmd::kernels::detail
