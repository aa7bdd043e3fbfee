#include "ndmd/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "kernel_table.hpp"

namespace ndmd::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(NDMD_HAVE_AVX2) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa pick_isa() {
  if (const char* env = std::getenv("NDMD_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Isa::Scalar;
    if (v == "avx2" && cpu_has_avx2()) return Isa::Avx2;
    return Isa::Scalar;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

struct State {
  Isa isa = pick_isa();
  const detail::KernelTable* table = nullptr;
  State() { rebind(); }
  void rebind() {
#ifdef NDMD_HAVE_AVX2
    table = isa == Isa::Avx2 ? &detail::avx2_table() : &detail::scalar_table();
#else
    table = &detail::scalar_table();
#endif
  }
};

State& state() {
  static State s;
  return s;
}

}  // namespace

Isa active_isa() { return state().isa; }

void set_isa(Isa isa) {
  if (isa == Isa::Avx2 && !cpu_has_avx2()) isa = Isa::Scalar;
  state().isa = isa;
  state().rebind();
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool avx2_available() { return cpu_has_avx2(); }

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
  // Transposed operands are materialized once; the core kernel stays
  // no-transpose. The copies are O(mk + kn) against the O(mnk) multiply.
  thread_local std::vector<double> ta_buf, tb_buf;
  if (trans_a) {
    ta_buf.resize(static_cast<std::size_t>(m) * k);
    for (int p = 0; p < k; ++p)
      for (int i = 0; i < m; ++i)
        ta_buf[static_cast<std::size_t>(i) * k + p] =
            a[static_cast<std::size_t>(p) * lda + i];
    a = ta_buf.data();
    lda = k;
  }
  if (trans_b) {
    tb_buf.resize(static_cast<std::size_t>(k) * n);
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < k; ++p)
        tb_buf[static_cast<std::size_t>(p) * n + j] =
            b[static_cast<std::size_t>(j) * ldb + p];
    b = tb_buf.data();
    ldb = n;
  }
  state().table->gemm_nn(m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void axpy(int n, double a, const double* x, double* y) {
  state().table->axpy(n, a, x, y);
}

double dot(int n, const double* x, const double* y) {
  return state().table->dot(n, x, y);
}

void scale(int n, double a, double* x) { state().table->scale(n, a, x); }

double sumsq(int n, const double* x) { return state().table->sumsq(n, x); }

void sincos(int n, const double* x, double* s, double* c) {
  state().table->sincos(n, x, s, c);
}

void exp_vec(int n, const double* x, double* y) {
  state().table->exp_vec(n, x, y);
}

void elu(int n, const double* x, double* y) { state().table->elu(n, x, y); }

void elu_grad(int n, const double* x, const double* g, double* out) {
  state().table->elu_grad(n, x, g, out);
}

void zdotc(int n, const double* x, const double* y, double* re, double* im) {
  state().table->zdotc(n, x, y, re, im);
}

void zrot(int n, double* x, double* y, double c, double s) {
  state().table->zrot(n, x, y, c, s);
}

void zscal(int n, double* x, double pr, double pi) {
  state().table->zscal(n, x, pr, pi);
}

void zaxpy(int n, double ar, double ai, const double* x, double* y) {
  state().table->zaxpy(n, ar, ai, x, y);
}

void d2q9_collide(int ncells, double* const* f, double omega, double gx, double gy) {
  state().table->d2q9_collide(ncells, f, omega, gx, gy);
}

}  // namespace ndmd::kernels
