// Baseline decomposition tests. Oracles are analytic spectra of the maps
// that generated the snapshots, direct matrix powers, and closed-form
// logarithms; the fit must reproduce them rather than merely interpolate.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ndmd/dmd.hpp"
#include "ndmd/errors.hpp"
#include "ndmd/rng.hpp"

using namespace ndmd;

namespace {

constexpr double kPi = std::numbers::pi;

/// Snapshot rows from x_{k+1} = a x_k.
RealMat iterate_map(const std::vector<std::vector<double>>& a,
                    std::vector<double> x, int frames) {
  const int n = static_cast<int>(x.size());
  RealMat snaps(frames, n);
  for (int k = 0; k < frames; ++k) {
    for (int i = 0; i < n; ++i) snaps(k, i) = x[i];
    std::vector<double> next(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) next[i] += a[i][j] * x[j];
    x = next;
  }
  return snaps;
}

std::vector<cplx> sorted_by_abs(std::vector<cplx> v) {
  std::sort(v.begin(), v.end(),
            [](cplx a, cplx b) { return std::abs(a) > std::abs(b); });
  return v;
}

}  // namespace

TEST_CASE("diagonal system spectrum is recovered exactly") {
  const RealMat snaps = iterate_map({{0.9, 0.0}, {0.0, 0.5}}, {1.0, 1.0}, 9);
  const DmdModel model = dmd_fit(snaps, 2, 1.0);
  REQUIRE(model.rank == 2);
  CHECK(model.warnings.empty());

  const std::vector<cplx> mu = sorted_by_abs(model.mu);
  CHECK(std::abs(mu[0] - 0.9) < 1e-10);
  CHECK(std::abs(mu[1] - 0.5) < 1e-10);

  // each mode aligns with a coordinate axis
  for (int j = 0; j < 2; ++j) {
    const double big =
        std::max(std::abs(model.modes(0, j)), std::abs(model.modes(1, j)));
    const double small =
        std::min(std::abs(model.modes(0, j)), std::abs(model.modes(1, j)));
    CHECK(big == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(small < 1e-10);
  }

  // ten-step forecast against the direct matrix power
  const std::vector<double> x10 = dmd_predict(model, {1.0, 1.0}, 10);
  CHECK(std::abs(x10[0] - std::pow(0.9, 10)) < 1e-8);
  CHECK(std::abs(x10[1] - std::pow(0.5, 10)) < 1e-8);

  // k = 0 projects onto the mode span, which contains the data
  const std::vector<double> x0 = dmd_predict(model, {1.0, 1.0}, 0);
  CHECK(std::abs(x0[0] - 1.0) < 1e-10);
  CHECK(std::abs(x0[1] - 1.0) < 1e-10);
}

TEST_CASE("rank-1 growth is a single mode along the data") {
  const std::vector<double> v = {1.0, 2.0, -1.0};
  RealMat snaps(5, 3);
  for (int k = 0; k < 5; ++k)
    for (int i = 0; i < 3; ++i) snaps(k, i) = std::pow(2.0, k) * v[i];
  const DmdModel model = dmd_fit(snaps, 1, 1.0);
  REQUIRE(model.rank == 1);
  CHECK(std::abs(model.mu[0] - 2.0) < 1e-12);

  cplx overlap(0.0);
  for (int i = 0; i < 3; ++i)
    overlap += std::conj(model.modes(i, 0)) * v[i];
  const double vnorm = std::sqrt(6.0);
  CHECK(std::abs(overlap) == doctest::Approx(vnorm).epsilon(1e-10));

  const std::vector<double> x3 = dmd_predict(model, v, 3);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(x3[i] - 8.0 * v[i]) < 1e-8);
}

TEST_CASE("standing wave in delay coordinates yields the oscillator pair") {
  // u(x, t) = exp(0.1 t) cos(2 t) sin(x) alone is spatially rank one, which
  // no state-space linear map can advance; stacking two consecutive frames
  // restores the quadrature and makes the data an exact rank-2 oscillator
  const int n = 128, raw_frames = 41;
  const double dt = 0.05;
  std::vector<std::vector<double>> u(raw_frames, std::vector<double>(n));
  for (int k = 0; k < raw_frames; ++k) {
    const double t = dt * k;
    const double g = std::exp(0.1 * t) * std::cos(2.0 * t);
    for (int i = 0; i < n; ++i) u[k][i] = g * std::sin(2.0 * kPi * i / n);
  }
  RealMat delay(raw_frames - 1, 2 * n);
  for (int k = 0; k + 1 < raw_frames; ++k)
    for (int i = 0; i < n; ++i) {
      delay(k, i) = u[k][i];
      delay(k, n + i) = u[k + 1][i];
    }

  const DmdModel model = dmd_fit(delay, 2, dt);
  REQUIRE(model.rank == 2);
  std::vector<cplx> om = model.omega;
  std::sort(om.begin(), om.end(),
            [](cplx a, cplx b) { return a.imag() > b.imag(); });
  CHECK(std::abs(om[0] - cplx(0.1, 2.0)) < 1e-6);
  CHECK(std::abs(om[1] - cplx(0.1, -2.0)) < 1e-6);

  // real data closes the spectrum under conjugation
  CHECK(std::abs(model.mu[0] - std::conj(model.mu[1])) < 1e-10);

  // the raw field really is rank deficient: the fit degrades gracefully
  RealMat raw(raw_frames, n);
  for (int k = 0; k < raw_frames; ++k)
    for (int i = 0; i < n; ++i) raw(k, i) = u[k][i];
  const DmdModel flat = dmd_fit(raw, 2, dt);
  CHECK(flat.rank == 1);
  REQUIRE_FALSE(flat.warnings.empty());
}

TEST_CASE("one-step residual vanishes on linear data") {
  Rng rng(77);
  std::vector<std::vector<double>> a(4, std::vector<double>(4));
  for (auto& row : a)
    for (double& x : row) x = 0.3 * (2.0 * rng.uniform() - 1.0);
  const RealMat snaps = iterate_map(a, {1.0, -0.5, 0.25, 0.8}, 9);

  const DmdModel model = dmd_fit(snaps, 4, 0.5);
  double resid = 0.0, scale = 0.0;
  for (int k = 0; k + 1 < 9; ++k) {
    std::vector<double> xk(4);
    for (int i = 0; i < 4; ++i) xk[i] = snaps(k, i);
    const std::vector<double> pred = dmd_predict(model, xk, 1);
    for (int i = 0; i < 4; ++i) {
      resid += std::pow(pred[i] - snaps(k + 1, i), 2);
      scale += std::pow(snaps(k + 1, i), 2);
    }
  }
  CHECK(std::sqrt(resid) <= 1e-8 * std::sqrt(scale));

  // conjugate closure for the real random map
  for (const cplx& mu : model.mu) {
    const auto match = std::min_element(
        model.mu.begin(), model.mu.end(), [&](cplx p, cplx q) {
          return std::abs(p - std::conj(mu)) < std::abs(q - std::conj(mu));
        });
    CHECK(std::abs(*match - std::conj(mu)) < 1e-10);
  }

  // round trip through the continuous spectrum
  for (int j = 0; j < model.rank; ++j)
    CHECK(std::abs(std::exp(model.omega[j] * 0.5) - model.mu[j]) < 1e-12);
}

TEST_CASE("zero eigenvalue falls back to the projected lift") {
  const RealMat snaps = iterate_map({{0.9, 0.0}, {0.0, 0.0}}, {1.0, 1.0}, 6);
  const DmdModel model = dmd_fit(snaps, 2, 1.0);
  REQUIRE(model.rank == 2);
  REQUIRE_FALSE(model.warnings.empty());
  const std::vector<cplx> mu = sorted_by_abs(model.mu);
  CHECK(std::abs(mu[0] - 0.9) < 1e-10);
  CHECK(std::abs(mu[1]) < 1e-10);

  // prediction still reproduces the map's one-step action
  const std::vector<double> pred = dmd_predict(model, {1.0, 1.0}, 1);
  CHECK(std::abs(pred[0] - 0.9) < 1e-8);
  CHECK(std::abs(pred[1]) < 1e-8);
}

TEST_CASE("neutral spectrum stays bounded over long horizons") {
  const double th = 0.3, c = std::cos(th), s = std::sin(th);
  const RealMat snaps = iterate_map({{c, -s}, {s, c}}, {1.0, 0.0}, 12);
  const DmdModel model = dmd_fit(snaps, 2, 1.0);
  for (const cplx& mu : model.mu)
    CHECK(std::abs(std::abs(mu) - 1.0) < 1e-10);

  const std::vector<double> far = dmd_predict(model, {1.0, 0.0}, 10000);
  CHECK(std::hypot(far[0], far[1]) < 2.0);
}

TEST_CASE("modes are ordered by amplitude, not eigenvalue") {
  // the slow mode dominates the initial state, so it must come first
  const RealMat snaps = iterate_map({{0.5, 0.0}, {0.0, 0.9}}, {10.0, 0.1}, 9);
  const DmdModel model = dmd_fit(snaps, 2, 1.0);
  CHECK(std::abs(model.mu[0] - 0.5) < 1e-8);
  CHECK(std::abs(model.mu[1] - 0.9) < 1e-8);
  CHECK(std::abs(model.amplitudes[0]) > std::abs(model.amplitudes[1]));
}

TEST_CASE("continuous spectrum closed forms") {
  CHECK(std::abs(continuous_eigs({cplx(1.0)}, 1.0)[0]) == 0.0);
  const cplx mu = std::exp(cplx(0.0, kPi / 4.0));
  CHECK(std::abs(continuous_eigs({mu}, 1.0)[0] - cplx(0.0, kPi / 4.0)) <
        1e-12);
  const cplx om = continuous_eigs({cplx(0.9)}, 0.1)[0];
  CHECK(om.real() == doctest::Approx(-1.05361).epsilon(1e-4));
  CHECK(om.imag() == 0.0);
  CHECK(om.real() == doctest::Approx(std::log(0.9) / 0.1).epsilon(1e-14));

  CHECK_THROWS_AS(continuous_eigs({cplx(0.0)}, 1.0), Error);
  CHECK_THROWS_AS(continuous_eigs({cplx(1.0)}, 0.0), Error);
  CHECK_THROWS_AS(continuous_eigs({cplx(1.0)}, -1.0), Error);
}

TEST_CASE("fit validates its arguments") {
  RealMat snaps(3, 4);
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 4; ++i) snaps(k, i) = k + 0.1 * i + 1.0;
  CHECK_THROWS_AS(dmd_fit(snaps, 0, 1.0), ShapeError);
  CHECK_THROWS_AS(dmd_fit(snaps, 3, 1.0), ShapeError);  // only 2 columns in X
  CHECK_THROWS_AS(dmd_fit(snaps, 1, 0.0), Error);
  CHECK_THROWS_AS(dmd_fit(RealMat(4, 3), 2, 1.0), IllConditionedError);

  const DmdModel model = dmd_fit(snaps, 1, 1.0);
  CHECK_THROWS_AS(dmd_predict(model, {1.0, 2.0}, 1), ShapeError);
  CHECK_THROWS_AS(dmd_predict(model, {1.0, 2.0, 3.0, 4.0}, -1), ShapeError);
}
