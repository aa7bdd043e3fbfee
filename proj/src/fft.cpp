#include "ndmd/fft.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ndmd/errors.hpp"

namespace ndmd {

Fft::Fft(int n) : n_(n) {
  if (n <= 0 || (n & (n - 1)) != 0)
    throw Error("fft: length " + std::to_string(n) + " is not a power of two");
  rev_.resize(n);
  int bits = 0;
  while ((1 << bits) < n) ++bits;
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < bits; ++b)
      if (i & (1 << b)) r |= 1 << (bits - 1 - b);
    rev_[i] = r;
  }
  roots_.resize(n / 2);
  for (int j = 0; j < n / 2; ++j) {
    const double ang = -2.0 * std::numbers::pi * j / n;
    roots_[j] = cplx(std::cos(ang), std::sin(ang));
  }
}

void Fft::transform(cplx* a, bool inv) const {
  for (int i = 0; i < n_; ++i)
    if (rev_[i] > i) std::swap(a[i], a[rev_[i]]);
  for (int len = 2; len <= n_; len <<= 1) {
    const int stride = n_ / len;
    const int half = len / 2;
    for (int start = 0; start < n_; start += len) {
      for (int j = 0; j < half; ++j) {
        const cplx w = inv ? std::conj(roots_[j * stride]) : roots_[j * stride];
        cplx& lo = a[start + j];
        cplx& hi = a[start + j + half];
        const cplx t = w * hi;
        hi = lo - t;
        lo += t;
      }
    }
  }
}

void Fft::forward(cplx* a) const { transform(a, false); }

void Fft::inverse(cplx* a) const {
  transform(a, true);
  const double s = 1.0 / n_;
  for (int i = 0; i < n_; ++i) a[i] *= s;
}

void fft2(const Fft& fx, const Fft& fy, DenseMatrix& a, bool inverse) {
  // rows are x (contiguous), columns are y
  if (a.cols != fx.size() || a.rows != fy.size())
    throw ShapeError("fft2: plan sizes do not match the matrix");
  for (int i = 0; i < a.rows; ++i) {
    cplx* row = a.data() + static_cast<size_t>(i) * a.cols;
    inverse ? fx.inverse(row) : fx.forward(row);
  }
  std::vector<cplx> col(a.rows);
  for (int j = 0; j < a.cols; ++j) {
    for (int i = 0; i < a.rows; ++i) col[i] = a(i, j);
    inverse ? fy.inverse(col.data()) : fy.forward(col.data());
    for (int i = 0; i < a.rows; ++i) a(i, j) = col[i];
  }
}

std::vector<cplx> fft_of_real(const Fft& plan, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != plan.size())
    throw ShapeError("fft_of_real: length does not match the plan");
  std::vector<cplx> a(x.size());
  for (size_t i = 0; i < x.size(); ++i) a[i] = cplx(x[i], 0.0);
  plan.forward(a.data());
  return a;
}

}  // namespace ndmd
