#pragma once

#include <vector>

#include "ndmd/dense.hpp"

namespace ndmd {

/// Radix-2 complex FFT plan for a fixed power-of-two length. Twiddles are
/// tabulated at construction; transforms are in-place and allocation-free,
/// and a plan may be shared across threads once built.
class Fft {
 public:
  explicit Fft(int n);

  int size() const { return n_; }
  void forward(cplx* a) const;
  /// Includes the 1/n scaling.
  void inverse(cplx* a) const;

 private:
  void transform(cplx* a, bool inv) const;
  int n_;
  std::vector<int> rev_;
  std::vector<cplx> roots_;  // e^{-2*pi*i*j/n}, j < n/2
};

/// Row-column 2D transform of a complex matrix (in place).
void fft2(const Fft& fx, const Fft& fy, DenseMatrix& a, bool inverse);

/// Real-to-complex convenience built on the complex plan.
std::vector<cplx> fft_of_real(const Fft& plan, const std::vector<double>& x);

}  // namespace ndmd
