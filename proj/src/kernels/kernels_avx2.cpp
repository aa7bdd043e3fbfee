// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma into the same
// library; only reached through the dispatch table after a CPU probe, so the
// rest of the build stays portable.
//
// The transcendentals use Cephes-style minimax polynomials after Cody-Waite
// range reduction; accuracy is a couple of ulp on the reduction range, which
// the equivalence tests pin against libm.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "ndmd/kernels.hpp"
#include "kernel_table.hpp"

namespace ndmd::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// ---- gemm ----------------------------------------------------------------

// 4x8 block of C accumulated in registers, B rows streamed.
inline void gemm_micro_4x8(int k, double alpha, const double* a, int lda,
                           const double* b, int ldb, double beta, double* c,
                           int ldc) {
  __m256d acc[4][2];
  for (int r = 0; r < 4; ++r) {
    acc[r][0] = _mm256_setzero_pd();
    acc[r][1] = _mm256_setzero_pd();
  }
  for (int p = 0; p < k; ++p) {
    const double* bp = b + static_cast<std::size_t>(p) * ldb;
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    for (int r = 0; r < 4; ++r) {
      const __m256d av = _mm256_set1_pd(a[static_cast<std::size_t>(r) * lda + p]);
      acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
    }
  }
  const __m256d va = _mm256_set1_pd(alpha);
  for (int r = 0; r < 4; ++r) {
    double* cr = c + static_cast<std::size_t>(r) * ldc;
    __m256d c0, c1;
    if (beta == 0.0) {
      c0 = _mm256_setzero_pd();
      c1 = _mm256_setzero_pd();
    } else {
      const __m256d vb = _mm256_set1_pd(beta);
      c0 = _mm256_mul_pd(vb, _mm256_loadu_pd(cr));
      c1 = _mm256_mul_pd(vb, _mm256_loadu_pd(cr + 4));
    }
    _mm256_storeu_pd(cr, _mm256_fmadd_pd(va, acc[r][0], c0));
    _mm256_storeu_pd(cr + 4, _mm256_fmadd_pd(va, acc[r][1], c1));
  }
}

void v_gemm_nn(int m, int n, int k, double alpha, const double* a, int lda,
               const double* b, int ldb, double beta, double* c, int ldc) {
  const int m4 = m - m % 4;
  const int n8 = n - n % 8;
  for (int i = 0; i < m4; i += 4)
    for (int j = 0; j < n8; j += 8)
      gemm_micro_4x8(k, alpha, a + static_cast<std::size_t>(i) * lda, lda,
                     b + j, ldb, beta, c + static_cast<std::size_t>(i) * ldc + j,
                     ldc);
  // Right edge (j >= n8) for the blocked rows, then the bottom rows in full.
  auto edge = [&](int i0, int i1, int j0, int j1) {
    for (int i = i0; i < i1; ++i) {
      double* ci = c + static_cast<std::size_t>(i) * ldc;
      for (int j = j0; j < j1; ++j) ci[j] = beta == 0.0 ? 0.0 : beta * ci[j];
      const double* ai = a + static_cast<std::size_t>(i) * lda;
      for (int p = 0; p < k; ++p) {
        const double av = alpha * ai[p];
        const double* bp = b + static_cast<std::size_t>(p) * ldb;
        for (int j = j0; j < j1; ++j) ci[j] += av * bp[j];
      }
    }
  };
  if (n8 < n) edge(0, m4, n8, n);
  if (m4 < m) edge(m4, m, 0, n);
}

// ---- level-1 --------------------------------------------------------------

void v_axpy(int n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double v_dot(int n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

void v_scale(int n, double a, double* x) {
  const __m256d va = _mm256_set1_pd(a);
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

double v_sumsq(int n, const double* x) {
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i] * x[i];
  return r;
}

// ---- sincos ---------------------------------------------------------------

// Quadrant reduction x = n*pi/2 + r, |r| <= pi/4, three-part pi/2.
constexpr double kTwoOverPi = 6.36619772367581382433e-1;
constexpr double kPio2_1 = 1.57079632673412561417e0;
constexpr double kPio2_2 = 6.07710050650619224932e-11;
constexpr double kPio2_3 = 2.02226624879595063154e-21;

constexpr double kSinC[6] = {1.58962301576546568060e-10, -2.50507477628578072866e-8,
                             2.75573136213857245213e-6,  -1.98412698295895385996e-4,
                             8.33333333332211858878e-3,  -1.66666666666666307295e-1};
constexpr double kCosC[6] = {-1.13585365213876817300e-11, 2.08757008419747316778e-9,
                             -2.75573141792967388112e-7,  2.48015872888517179954e-5,
                             -1.38888888888730564116e-3,  4.16666666666665929218e-2};

inline void sincos4(__m256d x, __m256d* sv, __m256d* cv) {
  const __m256d vn = _mm256_round_pd(
      _mm256_mul_pd(x, _mm256_set1_pd(kTwoOverPi)),
      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(vn, _mm256_set1_pd(kPio2_1), x);
  r = _mm256_fnmadd_pd(vn, _mm256_set1_pd(kPio2_2), r);
  r = _mm256_fnmadd_pd(vn, _mm256_set1_pd(kPio2_3), r);

  const __m256d z = _mm256_mul_pd(r, r);
  __m256d ps = _mm256_set1_pd(kSinC[0]);
  __m256d pc = _mm256_set1_pd(kCosC[0]);
  for (int t = 1; t < 6; ++t) {
    ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(kSinC[t]));
    pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(kCosC[t]));
  }
  // s = r + r*z*ps ; c = 1 - z/2 + z^2*pc
  const __m256d s = _mm256_fmadd_pd(_mm256_mul_pd(r, z), ps, r);
  __m256d c = _mm256_fmadd_pd(_mm256_mul_pd(z, z), pc,
                              _mm256_fnmadd_pd(z, _mm256_set1_pd(0.5),
                                               _mm256_set1_pd(1.0)));

  // Quadrant fixup: q=1,3 swap; q>=2 negates sin; q=1,2 negates cos.
  const __m128i qi = _mm256_cvtpd_epi32(vn);
  const __m128i q3 = _mm_and_si128(qi, _mm_set1_epi32(3));
  const __m128i bit0 = _mm_slli_epi32(_mm_and_si128(q3, _mm_set1_epi32(1)), 31);
  const __m128i bit1 = _mm_slli_epi32(_mm_and_si128(q3, _mm_set1_epi32(2)), 30);
  const __m256d swap = _mm256_castsi256_pd(_mm256_cvtepi32_epi64(
      _mm_srai_epi32(bit0, 31)));
  const __m256d neg_sin = _mm256_castsi256_pd(_mm256_cvtepi32_epi64(
      _mm_srai_epi32(bit1, 31)));
  const __m256d xor_q = _mm256_castsi256_pd(_mm256_xor_si256(
      _mm256_castpd_si256(swap), _mm256_castpd_si256(neg_sin)));

  const __m256d sgn = _mm256_set1_pd(-0.0);
  __m256d so = _mm256_blendv_pd(s, c, swap);
  __m256d co = _mm256_blendv_pd(c, s, swap);
  so = _mm256_xor_pd(so, _mm256_and_pd(neg_sin, sgn));
  co = _mm256_xor_pd(co, _mm256_and_pd(xor_q, sgn));
  *sv = so;
  *cv = co;
}

void v_sincos(int n, const double* x, double* s, double* c) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d sv, cv;
    sincos4(_mm256_loadu_pd(x + i), &sv, &cv);
    _mm256_storeu_pd(s + i, sv);
    _mm256_storeu_pd(c + i, cv);
  }
  for (; i < n; ++i) {
    s[i] = std::sin(x[i]);
    c[i] = std::cos(x[i]);
  }
}

// ---- exp ------------------------------------------------------------------

constexpr double kLog2E = 1.4426950408889634074;
constexpr double kExpC1 = 6.93145751953125e-1;
constexpr double kExpC2 = 1.42860682030941723212e-6;
constexpr double kExpP[3] = {1.26177193074810590878e-4, 3.02994407707441961300e-2,
                             9.99999999999999999910e-1};
constexpr double kExpQ[4] = {3.00198505138664455042e-6, 2.52448340349684104192e-3,
                             2.27265548208155028766e-1, 2.00000000000000000005e0};

inline __m256d exp4(__m256d x) {
  x = _mm256_max_pd(x, _mm256_set1_pd(-708.0));
  x = _mm256_min_pd(x, _mm256_set1_pd(708.0));
  const __m256d vn = _mm256_round_pd(
      _mm256_mul_pd(x, _mm256_set1_pd(kLog2E)),
      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(vn, _mm256_set1_pd(kExpC1), x);
  r = _mm256_fnmadd_pd(vn, _mm256_set1_pd(kExpC2), r);
  const __m256d z = _mm256_mul_pd(r, r);

  __m256d p = _mm256_set1_pd(kExpP[0]);
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(kExpP[1]));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(kExpP[2]));
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_set1_pd(kExpQ[0]);
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(kExpQ[1]));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(kExpQ[2]));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(kExpQ[3]));
  // e^r = 1 + 2p/(q - p)
  const __m256d e = _mm256_add_pd(
      _mm256_set1_pd(1.0),
      _mm256_div_pd(_mm256_add_pd(p, p), _mm256_sub_pd(q, p)));

  // scale by 2^n: clamp n into the ldexp range, split in two to cover
  // subnormal-adjacent inputs without a slow path.
  const __m256d n1 = _mm256_round_pd(
      _mm256_mul_pd(vn, _mm256_set1_pd(0.5)),
      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m256d n2 = _mm256_sub_pd(vn, n1);
  auto pow2 = [](__m256d k) {
    const __m256i ki = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(k));
    const __m256i bits = _mm256_slli_epi64(
        _mm256_add_epi64(ki, _mm256_set1_epi64x(1023)), 52);
    return _mm256_castsi256_pd(bits);
  };
  return _mm256_mul_pd(_mm256_mul_pd(e, pow2(n1)), pow2(n2));
}

void v_exp_vec(int n, const double* x, double* y) {
  int i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, exp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = std::exp(x[i]);
}

void v_elu(int n, const double* x, double* y) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d neg = _mm256_sub_pd(exp4(_mm256_min_pd(v, zero)), one);
    const __m256d pos = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(y + i, _mm256_blendv_pd(neg, v, pos));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : std::expm1(x[i]);
}

void v_elu_grad(int n, const double* x, const double* g, double* out) {
  const __m256d zero = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d neg = _mm256_mul_pd(gv, exp4(_mm256_min_pd(v, zero)));
    const __m256d pos = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(neg, gv, pos));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : g[i] * std::exp(x[i]);
}

// ---- interleaved complex ----------------------------------------------------

void v_zdotc(int n, const double* x, const double* y, double* re, double* im) {
  __m256d acc_re = _mm256_setzero_pd();
  __m256d acc_im = _mm256_setzero_pd();
  const __m256d conj_sign = _mm256_set_pd(1.0, -1.0, 1.0, -1.0);
  int i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = _mm256_loadu_pd(x + 2 * i);
    const __m256d yv = _mm256_loadu_pd(y + 2 * i);
    acc_re = _mm256_fmadd_pd(xv, yv, acc_re);
    const __m256d xs = _mm256_permute_pd(xv, 0x5);  // [xi, xr] per pair
    acc_im = _mm256_fmadd_pd(_mm256_mul_pd(xs, conj_sign), yv, acc_im);
  }
  double r = hsum(acc_re), m = hsum(acc_im);
  for (; i < n; ++i) {
    const double xr = x[2 * i], xi = x[2 * i + 1];
    const double yr = y[2 * i], yi = y[2 * i + 1];
    r += xr * yr + xi * yi;
    m += xr * yi - xi * yr;
  }
  *re = r;
  *im = m;
}

void v_zrot(int n, double* x, double* y, double c, double s) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d vs = _mm256_set1_pd(s);
  const int len = 2 * n;
  int i = 0;
  for (; i + 4 <= len; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d yv = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(x + i, _mm256_fnmadd_pd(vs, yv, _mm256_mul_pd(vc, xv)));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(vs, xv, _mm256_mul_pd(vc, yv)));
  }
  for (; i < len; ++i) {
    const double xv = x[i], yv = y[i];
    x[i] = c * xv - s * yv;
    y[i] = s * xv + c * yv;
  }
}

void v_zscal(int n, double* x, double pr, double pi) {
  const __m256d vr = _mm256_set1_pd(pr);
  const __m256d vi = _mm256_set1_pd(pi);
  int i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = _mm256_loadu_pd(x + 2 * i);
    const __m256d xs = _mm256_permute_pd(xv, 0x5);
    _mm256_storeu_pd(x + 2 * i,
                     _mm256_addsub_pd(_mm256_mul_pd(xv, vr), _mm256_mul_pd(xs, vi)));
  }
  for (; i < n; ++i) {
    const double xr = x[2 * i], xi = x[2 * i + 1];
    x[2 * i] = xr * pr - xi * pi;
    x[2 * i + 1] = xr * pi + xi * pr;
  }
}

void v_zaxpy(int n, double ar, double ai, const double* x, double* y) {
  const __m256d vr = _mm256_set1_pd(ar);
  const __m256d vi = _mm256_set1_pd(ai);
  int i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = _mm256_loadu_pd(x + 2 * i);
    const __m256d xs = _mm256_permute_pd(xv, 0x5);
    const __m256d prod =
        _mm256_addsub_pd(_mm256_mul_pd(xv, vr), _mm256_mul_pd(xs, vi));
    _mm256_storeu_pd(y + 2 * i, _mm256_add_pd(_mm256_loadu_pd(y + 2 * i), prod));
  }
  for (; i < n; ++i) {
    const double xr = x[2 * i], xi = x[2 * i + 1];
    y[2 * i] += ar * xr - ai * xi;
    y[2 * i + 1] += ar * xi + ai * xr;
  }
}

// ---- d2q9 -------------------------------------------------------------------

void v_d2q9_collide(int ncells, double* const* f, double omega, double gx,
                    double gy) {
  using namespace ndmd::kernels::d2q9;
  const __m256d vhw = _mm256_set1_pd(1.0 - 0.5 * omega);
  const __m256d vom = _mm256_set1_pd(omega);
  const __m256d vgx = _mm256_set1_pd(gx);
  const __m256d vgy = _mm256_set1_pd(gy);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d three = _mm256_set1_pd(3.0);
  const __m256d c45 = _mm256_set1_pd(4.5);
  const __m256d c15 = _mm256_set1_pd(1.5);
  const __m256d nine = _mm256_set1_pd(9.0);

  int i = 0;
  for (; i + 4 <= ncells; i += 4) {
    __m256d fq[9], rho = _mm256_setzero_pd(), mx = _mm256_setzero_pd(),
                   my = _mm256_setzero_pd();
    for (int q = 0; q < 9; ++q) {
      fq[q] = _mm256_loadu_pd(f[q] + i);
      rho = _mm256_add_pd(rho, fq[q]);
      if (EX[q]) mx = _mm256_fmadd_pd(_mm256_set1_pd(EX[q]), fq[q], mx);
      if (EY[q]) my = _mm256_fmadd_pd(_mm256_set1_pd(EY[q]), fq[q], my);
    }
    const __m256d inv_rho = _mm256_div_pd(one, rho);
    const __m256d ux = _mm256_mul_pd(_mm256_fmadd_pd(half, vgx, mx), inv_rho);
    const __m256d uy = _mm256_mul_pd(_mm256_fmadd_pd(half, vgy, my), inv_rho);
    const __m256d usq = _mm256_fmadd_pd(ux, ux, _mm256_mul_pd(uy, uy));
    for (int q = 0; q < 9; ++q) {
      const __m256d ex = _mm256_set1_pd(EX[q]);
      const __m256d ey = _mm256_set1_pd(EY[q]);
      const __m256d eu = _mm256_fmadd_pd(ex, ux, _mm256_mul_pd(ey, uy));
      __m256d feq = _mm256_fmadd_pd(_mm256_mul_pd(c45, eu), eu,
                                    _mm256_fnmadd_pd(c15, usq,
                                                     _mm256_fmadd_pd(three, eu, one)));
      feq = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(W[q]), rho), feq);
      const __m256d eg = _mm256_fmadd_pd(ex, vgx, _mm256_mul_pd(ey, vgy));
      const __m256d ug = _mm256_fmadd_pd(ux, vgx, _mm256_mul_pd(uy, vgy));
      __m256d force = _mm256_fmadd_pd(_mm256_mul_pd(nine, eu), eg,
                                      _mm256_mul_pd(three, _mm256_sub_pd(eg, ug)));
      force = _mm256_mul_pd(_mm256_mul_pd(vhw, _mm256_set1_pd(W[q])), force);
      const __m256d out =
          _mm256_add_pd(_mm256_fnmadd_pd(vom, _mm256_sub_pd(fq[q], feq), fq[q]),
                        force);
      _mm256_storeu_pd(f[q] + i, out);
    }
  }
  if (i < ncells) {
    // scalar tail, same arithmetic
    const double half_omega = 1.0 - 0.5 * omega;
    for (; i < ncells; ++i) {
      double rho = 0.0, mxs = 0.0, mys = 0.0;
      for (int q = 0; q < 9; ++q) {
        const double v = f[q][i];
        rho += v;
        mxs += EX[q] * v;
        mys += EY[q] * v;
      }
      const double inv_rho = 1.0 / rho;
      const double ux = (mxs + 0.5 * gx) * inv_rho;
      const double uy = (mys + 0.5 * gy) * inv_rho;
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
}

constexpr KernelTable kAvx2 = {
    v_gemm_nn, v_axpy,  v_dot,   v_scale, v_sumsq,        v_sincos, v_exp_vec,
    v_elu,     v_elu_grad, v_zdotc, v_zrot,  v_zscal, v_zaxpy, v_d2q9_collide,
};

}  // namespace

const KernelTable& avx2_table() { return kAvx2; }

}  // namespace ndmd::kernels::detail

#endif  // x86-64
