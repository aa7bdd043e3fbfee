#pragma once

#include <cstddef>

namespace ndmd::kernels {

/// Instruction set of the active kernel table. Selected once at startup:
/// AVX2+FMA when the CPU supports both, else scalar. The NDMD_SIMD
/// environment variable ("scalar" or "avx2") overrides the probe.
enum class Isa { Scalar, Avx2 };

Isa active_isa();
void set_isa(Isa isa);
const char* isa_name(Isa isa);
bool avx2_available();

/// C = alpha*op(A)*op(B) + beta*C, row-major with leading dimensions.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc);

void axpy(int n, double a, const double* x, double* y);
double dot(int n, const double* x, const double* y);
void scale(int n, double a, double* x);
double sumsq(int n, const double* x);

/// Elementwise sin and cos of the same input, one pass.
void sincos(int n, const double* x, double* s, double* c);
void exp_vec(int n, const double* x, double* y);
/// y = x > 0 ? x : exp(x) - 1
void elu(int n, const double* x, double* y);
/// out = g * (x > 0 ? 1 : exp(x))
void elu_grad(int n, const double* x, const double* g, double* out);

/// Interleaved-complex primitives (re,im pairs), used by the dense
/// factorizations. Coefficients of zrot are real (phase already absorbed).
void zdotc(int n, const double* x, const double* y, double* out_re, double* out_im);
/// x' = c*x - s*y ; y' = s*x + c*y
void zrot(int n, double* x, double* y, double c, double s);
/// x *= (pr + i*pi)
void zscal(int n, double* x, double pr, double pi);
/// y += (ar + i*ai) * x
void zaxpy(int n, double ar, double ai, const double* x, double* y);

/// D2Q9 lattice: velocity set, weights, opposite directions.
namespace d2q9 {
constexpr int EX[9] = {0, 1, 0, -1, 0, 1, -1, -1, 1};
constexpr int EY[9] = {0, 0, 1, 0, -1, 1, 1, -1, -1};
constexpr double W[9] = {4.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9,
                         1.0 / 36, 1.0 / 36, 1.0 / 36, 1.0 / 36};
constexpr int OPP[9] = {0, 3, 4, 1, 2, 7, 8, 5, 6};
}  // namespace d2q9

/// D2Q9 BGK collision over a flat cell array (SoA, one plane per velocity),
/// with Guo forcing. Solid cells may be collided harmlessly; streaming and
/// bounce-back decide what is read back.
void d2q9_collide(int ncells, double* const* f, double omega, double gx, double gy);

}  // namespace ndmd::kernels
