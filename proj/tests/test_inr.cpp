// Mode-bank model tests. Oracles are hand-built orthonormal banks, scripted
// normal-equation traces, planted single-rate synthetic data, and central
// finite differences through the full training graph.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "ndmd/errors.hpp"
#include "ndmd/inr.hpp"
#include "ndmd/nn.hpp"
#include "ndmd/rng.hpp"

using namespace ndmd;

namespace {

constexpr double kPi = std::numbers::pi;

/// Hand-assembled model with randomly initialized stages, all frozen.
InrModel tiny_model(int pairs, bool paired, bool deflated, int width,
                    int depth, std::uint64_t seed, double omega0 = 30.0) {
  InrModel m;
  m.benchmark = "synthetic";
  m.dims = {16};
  m.extents = {1.0};
  m.dt = 0.1;
  m.paired = paired;
  m.deflated = deflated;
  m.point_map.offset = {0.5};
  m.point_map.scale = {2.0};
  m.code_map.offset = {0.5};
  m.code_map.scale = {2.0};
  for (int p = 0; p < pairs; ++p) {
    ModePairNets nets;
    nets.phi_spec.input_dim = 2;
    nets.phi_spec.hidden_width = width;
    nets.phi_spec.hidden_layers = depth;
    nets.phi_spec.output_dim = paired ? 2 : 4;
    nets.phi_spec.activation = nn::Activation::Sine;
    nets.phi_spec.omega0 = omega0;
    nets.lam_spec.input_dim = 1;
    nets.lam_spec.hidden_width = width;
    nets.lam_spec.hidden_layers = depth;
    nets.lam_spec.output_dim = paired ? 2 : 4;
    nets.lam_spec.activation = nn::Activation::Elu;
    Rng rng = Rng(seed).child(static_cast<std::uint64_t>(p));
    nets.phi = nn::init_params(nets.phi_spec, rng);
    nets.lam = nn::init_params(nets.lam_spec, rng);
    nets.frozen = true;
    m.stages.push_back(nets);
  }
  return m;
}

/// Training inputs for one trajectory, mirroring what the stage trainer
/// feeds the graph (normalized coordinates and codes, frozen columns from
/// the already-built stages).
StageBatchItem make_item(const InrModel& m, const RealMat& pts,
                         const std::vector<double>& code,
                         const RealMat& frames, int frozen_stages) {
  StageBatchItem item;
  item.frames = frames;
  const RealMat xn = m.point_map.apply(pts);
  RealMat crow(1, static_cast<int>(code.size()), code);
  const RealMat cn = m.code_map.apply(crow);
  item.inputs = RealMat(pts.rows, xn.cols + cn.cols);
  for (int i = 0; i < pts.rows; ++i) {
    for (int a = 0; a < xn.cols; ++a) item.inputs(i, a) = xn(i, a);
    for (int a = 0; a < cn.cols; ++a) item.inputs(i, xn.cols + a) = cn(0, a);
  }
  item.code_inputs = cn;
  if (frozen_stages > 0) {
    InrModel trunc = m;
    trunc.stages.resize(frozen_stages);
    item.frozen_bank = eval_basis(trunc, pts, code).phi;
    item.frozen_omega = eval_spectrum(trunc, code).omega;
  }
  return item;
}

DenseMatrix column(const DenseMatrix& m, int j) {
  DenseMatrix c(m.rows, 1);
  for (int i = 0; i < m.rows; ++i) c(i, 0) = m(i, j);
  return c;
}

cplx inner(const DenseMatrix& a, const DenseMatrix& b) {
  cplx acc(0.0, 0.0);
  for (int i = 0; i < a.rows; ++i) acc += std::conj(a(i, 0)) * b(i, 0);
  return acc;
}

double col_norm(const DenseMatrix& a) { return std::sqrt(inner(a, a).real()); }

/// Frames T x N of u(t, x) = Re(exp(omega t) exp(2 pi i x) amp).
RealMat planted_frames(int n, int frames, double dt, cplx omega, cplx amp) {
  RealMat u(frames, n);
  for (int j = 0; j < frames; ++j) {
    const double t = j * dt;
    const cplx gain = std::exp(omega * t);
    for (int i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / n;
      u(j, i) = (gain * std::exp(cplx(0.0, 2.0 * kPi * x)) * amp).real();
    }
  }
  return u;
}

TrajectorySet planted_set(int n, int frames, double dt, cplx omega,
                          const std::vector<double>& codes, int n_train) {
  TrajectorySet set;
  set.benchmark = "synthetic";
  set.dims = {n};
  set.extents = {1.0};
  set.n_train = n_train;
  set.seed = 1;
  for (double c : codes) {
    Trajectory traj;
    traj.dt = dt;
    traj.code = {c};
    traj.frames = planted_frames(n, frames, dt, omega, cplx(0.5 + c, 0.2));
    set.items.push_back(std::move(traj));
  }
  return set;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.pairs = 1;
  cfg.phi_width = 6;
  cfg.phi_depth = 2;
  cfg.lam_width = 6;
  cfg.lam_depth = 2;
  cfg.epochs_per_stage = 3;
  cfg.long_horizons = 0;
  cfg.omega0 = 5.0;
  return cfg;
}

bool same_params(const nn::ParamSet& a, const nn::ParamSet& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (size_t t = 0; t < a.tensors.size(); ++t)
    if (a.tensors[t].v != b.tensors[t].v) return false;
  return true;
}

}  // namespace

TEST_CASE("grid points, cell masks, column restriction") {
  const RealMat pts = grid_points({4, 3}, {2.0, 1.5});
  REQUIRE(pts.rows == 12);
  REQUIRE(pts.cols == 2);
  // cell c = j * 4 + i sits at (2 i / 4, 1.5 j / 3); axis 0 is fastest
  CHECK(pts(0, 0) == 0.0);
  CHECK(pts(1, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pts(4, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pts(7, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(pts(7, 1) == doctest::Approx(0.5).epsilon(1e-15));

  CHECK(fluid_cells(RealMat(), 5) == std::vector<int>{0, 1, 2, 3, 4});
  RealMat mask(1, 5);
  mask(0, 2) = 1.0;
  CHECK(fluid_cells(mask, 5) == std::vector<int>{0, 1, 3, 4});
  CHECK_THROWS_AS(fluid_cells(mask, 6), ShapeError);

  RealMat frames(2, 5);
  for (int j = 0; j < 5; ++j) {
    frames(0, j) = j;
    frames(1, j) = 10 + j;
  }
  const RealMat kept = restrict_columns(frames, {0, 1, 3, 4});
  CHECK(kept.cols == 4);
  CHECK(kept(0, 2) == 3.0);
  CHECK(kept(1, 3) == 14.0);
}

TEST_CASE("axis maps normalize and collapse constant axes") {
  AxisMap map;
  map.offset = {0.5, 3.0};
  map.scale = {2.0, 0.0};
  RealMat x(1, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 42.0;
  const RealMat y = map.apply(x);
  CHECK(y(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(y(0, 1) == 0.0);
  RealMat bad(1, 3);
  CHECK_THROWS_AS(map.apply(bad), ShapeError);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  TrainConfig bad = cfg;
  bad.pairs = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.alpha = -0.1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.alpha = 0.0;
  bad.beta = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.lr_phi = 0.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.batch = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("basis columns pair exact conjugates") {
  const InrModel model = tiny_model(2, true, true, 8, 2, 11);
  const RealMat pts = grid_points({16}, {1.0});
  const ModeBank bank = eval_basis(model, pts, {0.4});
  REQUIRE(bank.phi.cols == 4);
  for (int p = 0; p < 2; ++p)
    for (int i = 0; i < 16; ++i) {
      CHECK(bank.phi(i, p + 2).real() == bank.phi(i, p).real());
      CHECK(bank.phi(i, p + 2).imag() == -bank.phi(i, p).imag());
    }
  RealMat few(3, 1);
  CHECK_THROWS_AS(eval_basis(model, few, {0.4}), ShapeError);
}

TEST_CASE("zero imaginary channel gives identical real partners") {
  InrModel model = tiny_model(1, true, true, 8, 2, 12);
  // silence the Im output channel of the basis net's last affine stage
  nn::ParamSet& phi = model.stages[0].phi;
  RealMat& w = phi.tensors[phi.tensors.size() - 2];
  RealMat& b = phi.tensors[phi.tensors.size() - 1];
  for (int i = 0; i < w.rows; ++i) w(i, 1) = 0.0;
  b(0, 1) = 0.0;
  const ModeBank bank = eval_basis(model, grid_points({12}, {1.0}), {0.3});
  for (int i = 0; i < 12; ++i) {
    CHECK(bank.phi(i, 0).imag() == 0.0);
    CHECK(bank.phi(i, 1) == bank.phi(i, 0));
  }
}

TEST_CASE("mode angles survive grid refinement") {
  // smooth fields: the discrete angle between two modes is a quadrature of
  // the continuum one, so doubling the sample count moves it below 1e-6
  const InrModel model = tiny_model(2, true, true, 12, 2, 13, 5.0);
  auto angle_cos = [&](int n) {
    const ModeBank bank = eval_basis(model, grid_points({n}, {1.0}), {0.4});
    const DenseMatrix a = column(bank.phi, 0);
    const DenseMatrix b = column(bank.phi, 1);
    return std::abs(inner(a, b)) / (col_norm(a) * col_norm(b));
  };
  CHECK(std::abs(angle_cos(4096) - angle_cos(8192)) <= 1e-6);
}

TEST_CASE("spectrum from a bias-only rate net") {
  InrModel model = tiny_model(2, true, true, 8, 2, 14);
  const double bias[2][2] = {{-0.1, 0.7}, {-0.2, 0.9}};
  for (int p = 0; p < 2; ++p) {
    nn::ParamSet& lam = model.stages[p].lam;
    nn::zero_output_stage(model.stages[p].lam_spec, lam);
    RealMat& b = lam.tensors[lam.tensors.size() - 1];
    b(0, 0) = bias[p][0];
    b(0, 1) = bias[p][1];
  }
  for (double code : {0.0, 0.3, 0.9}) {
    const Spectrum s = eval_spectrum(model, {code});
    REQUIRE(s.omega.size() == 4);
    CHECK(s.omega[0] == cplx(-0.1, 0.7));
    CHECK(s.omega[1] == cplx(-0.2, 0.9));
    CHECK(s.omega[2] == std::conj(s.omega[0]));
    CHECK(s.omega[3] == std::conj(s.omega[1]));
    // discrete multipliers close under conjugation as well
    const cplx lam0 = std::exp(s.omega[0] * s.dt);
    const cplx lam2 = std::exp(s.omega[2] * s.dt);
    CHECK(std::abs(lam2 - std::conj(lam0)) <= 1e-15);
  }
}

TEST_CASE("spectrum responds continuously to the code") {
  const InrModel model = tiny_model(1, true, true, 10, 2, 15);
  auto omega_at = [&](double c) { return eval_spectrum(model, {c}).omega[0]; };
  const double c0 = 0.4, d0 = 1e-3;
  const double lips = std::abs(omega_at(c0 + d0) - omega_at(c0 - d0)) / (2 * d0);
  for (double d : {1e-4, 5e-5}) {
    const double move = std::abs(omega_at(c0 + d) - omega_at(c0));
    CHECK(move <= 2.0 * std::max(lips, 1e-8) * d + 1e-12);
  }
}

TEST_CASE("projection matches the adjoint on an orthonormal bank") {
  const int n = 6;
  ModeBank bank;
  bank.paired = false;
  bank.phi = DenseMatrix::zeros(n, 4);
  for (int p = 0; p < 4; ++p) bank.phi(p, p) = cplx(1.0, 0.0);
  std::vector<double> u = {0.3, -1.2, 0.5, 2.0, 4.0, -7.0};
  const ModalCoefficients z = project(bank, u);
  for (int p = 0; p < 4; ++p) CHECK(std::abs(z.z[p] - u[p]) <= 1e-14);

  // complex orthonormal columns: scaled discrete Fourier modes
  const int m = 8;
  ModeBank dft;
  dft.phi = DenseMatrix::zeros(m, 4);
  const int waves[4] = {1, 2, -1, -2};
  for (int p = 0; p < 4; ++p)
    for (int i = 0; i < m; ++i)
      dft.phi(i, p) = std::exp(cplx(0.0, 2.0 * kPi * waves[p] * i / m)) /
                      std::sqrt(static_cast<double>(m));
  std::vector<double> v(m);
  Rng rng(77);
  for (double& x : v) x = rng.normal();
  const ModalCoefficients zd = project(dft, v);
  for (int p = 0; p < 4; ++p) {
    cplx adj(0.0, 0.0);
    for (int i = 0; i < m; ++i) adj += std::conj(dft.phi(i, p)) * v[i];
    CHECK(std::abs(zd.z[p] - adj) <= 1e-12);
  }
}

TEST_CASE("projection reconstructs states in the span") {
  const InrModel model = tiny_model(2, true, true, 10, 2, 16);
  const RealMat pts = grid_points({24}, {1.0});
  const ModeBank bank = eval_basis(model, pts, {0.6});
  const cplx z0(0.8, -0.3), z1(-0.2, 0.5);
  std::vector<double> u(24, 0.0);
  for (int i = 0; i < 24; ++i)
    u[i] = (bank.phi(i, 0) * z0 + bank.phi(i, 1) * z1 +
            bank.phi(i, 2) * std::conj(z0) + bank.phi(i, 3) * std::conj(z1))
               .real();
  double u_max = 0.0;
  for (double x : u) u_max = std::max(u_max, std::abs(x));
  const ModalCoefficients z = project(bank, u);
  for (int i = 0; i < 24; ++i) {
    cplx recon(0.0, 0.0);
    for (int q = 0; q < 4; ++q) recon += bank.phi(i, q) * z.z[q];
    CHECK(std::abs(recon.real() - u[i]) <= 1e-10 * std::max(1.0, u_max));
    CHECK(std::abs(recon.imag()) <= 1e-10 * std::max(1.0, u_max));
  }
  // conjugate symmetry of the coefficients for real data
  CHECK(std::abs(z.z[2] - std::conj(z.z[0])) <= 1e-10);
  CHECK(std::abs(z.z[3] - std::conj(z.z[1])) <= 1e-10);
}

TEST_CASE("projection matches a normal-equations oracle") {
  Rng rng(31);
  const int n = 10, k = 4;
  ModeBank bank;
  bank.paired = false;
  bank.phi = DenseMatrix::zeros(n, k);
  for (auto& e : bank.phi.v) e = cplx(rng.normal(), rng.normal());
  std::vector<double> u(n);
  for (double& x : u) x = rng.normal();

  // solve (Phi^H Phi) z = Phi^H u by Gaussian elimination
  DenseMatrix g(k, k), rhs(k, 1);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b)
      for (int i = 0; i < n; ++i)
        g(a, b) += std::conj(bank.phi(i, a)) * bank.phi(i, b);
    for (int i = 0; i < n; ++i) rhs(a, 0) += std::conj(bank.phi(i, a)) * u[i];
  }
  for (int c = 0; c < k; ++c) {
    int piv = c;
    for (int r = c + 1; r < k; ++r)
      if (std::abs(g(r, c)) > std::abs(g(piv, c))) piv = r;
    for (int j = 0; j < k; ++j) std::swap(g(c, j), g(piv, j));
    std::swap(rhs(c, 0), rhs(piv, 0));
    for (int r = c + 1; r < k; ++r) {
      const cplx f = g(r, c) / g(c, c);
      for (int j = c; j < k; ++j) g(r, j) -= f * g(c, j);
      rhs(r, 0) -= f * rhs(c, 0);
    }
  }
  DenseMatrix z_oracle(k, 1);
  for (int r = k - 1; r >= 0; --r) {
    cplx acc = rhs(r, 0);
    for (int j = r + 1; j < k; ++j) acc -= g(r, j) * z_oracle(j, 0);
    z_oracle(r, 0) = acc / g(r, r);
  }

  const ModalCoefficients z = project(bank, u);
  for (int p = 0; p < k; ++p) CHECK(std::abs(z.z[p] - z_oracle(p, 0)) <= 1e-9);
}

TEST_CASE("projection surfaces an ill-conditioned bank") {
  ModeBank bank;
  bank.phi = DenseMatrix::zeros(6, 4);
  Rng rng(5);
  for (int i = 0; i < 6; ++i) {
    bank.phi(i, 0) = cplx(rng.normal(), rng.normal());
    bank.phi(i, 1) = bank.phi(i, 0);  // exact duplicate column
    bank.phi(i, 2) = std::conj(bank.phi(i, 0));
    bank.phi(i, 3) = std::conj(bank.phi(i, 1));
  }
  std::vector<double> u(6, 1.0);
  CHECK_THROWS_AS(project(bank, u), IllConditionedError);
}

TEST_CASE("rollout identities") {
  const InrModel model = tiny_model(1, true, true, 8, 2, 17);
  const RealMat pts = grid_points({12}, {1.0});
  const ModeBank bank = eval_basis(model, pts, {0.5});
  Spectrum spec;
  spec.dt = 0.1;
  spec.omega = {cplx(-0.2, 1.3), cplx(-0.2, -1.3)};
  ModalCoefficients z;
  z.z = {cplx(0.4, 0.7), cplx(0.4, -0.7)};

  const Rollout at_zero = rollout(bank, spec, z, {0.0});
  for (int i = 0; i < 12; ++i) {
    const cplx direct = bank.phi(i, 0) * z.z[0] + bank.phi(i, 1) * z.z[1];
    CHECK(at_zero.frames(0, i) == doctest::Approx(direct.real()).epsilon(1e-14));
  }

  // half period: omega = i*pi, delta = 1 flips the sign
  Spectrum half;
  half.dt = 1.0;
  half.omega = {cplx(0.0, kPi), cplx(0.0, -kPi)};
  const Rollout flipped = rollout(bank, half, z, {1.0});
  for (int i = 0; i < 12; ++i)
    CHECK(std::abs(flipped.frames(0, i) + at_zero.frames(0, i)) <= 1e-12);

  // semigroup: advance by a+b in one go, or by a then (coefficient-wise) b
  const double a = 0.37, b = 1.21;
  const Rollout whole = rollout(bank, spec, z, {a + b});
  ModalCoefficients z_mid;
  z_mid.z = {z.z[0] * std::exp(spec.omega[0] * a),
             z.z[1] * std::exp(spec.omega[1] * a)};
  const Rollout parts = rollout(bank, spec, z_mid, {b});
  for (int i = 0; i < 12; ++i)
    CHECK(std::abs(whole.frames(0, i) - parts.frames(0, i)) <= 1e-12);

  // negative elapsed time inverts the forward step
  const Rollout forward = rollout(bank, spec, z, {0.25});
  ModalCoefficients z_fwd;
  z_fwd.z = {z.z[0] * std::exp(spec.omega[0] * 0.25),
             z.z[1] * std::exp(spec.omega[1] * 0.25)};
  const Rollout back = rollout(bank, spec, z_fwd, {-0.25});
  for (int i = 0; i < 12; ++i)
    CHECK(std::abs(back.frames(0, i) - at_zero.frames(0, i)) <= 1e-12);

  // the stored frame spacing plays no role once elapsed times are explicit
  Spectrum other = spec;
  other.dt = 7.5;
  const Rollout same = rollout(bank, other, z, {a + b});
  CHECK(same.frames.v == whole.frames.v);

  // a real-coefficient conjugate pair reconstructs with zero imaginary part
  CHECK(whole.max_imag <= 1e-12);

  Spectrum hot = spec;
  hot.omega[1] = cplx(800.0, 0.0);
  try {
    rollout(bank, hot, z, {1.0});
    FAIL("overflowing rollout must throw");
  } catch (const DivergenceError& e) {
    CHECK(e.index == 1);
  }
}

TEST_CASE("losses vanish on exactly represented data") {
  const InrModel model = tiny_model(1, true, true, 10, 2, 18);
  const RealMat pts = grid_points({20}, {1.0});
  const ModeBank bank = eval_basis(model, pts, {0.5});
  Spectrum spec;
  spec.dt = 0.2;
  spec.omega = {cplx(-0.1, 0.9), cplx(-0.1, -0.9)};
  const cplx z0(0.6, -0.4);

  RealMat frames(5, 20);
  for (int j = 0; j < 5; ++j) {
    const cplx gain = std::exp(spec.omega[0] * (j * spec.dt));
    for (int i = 0; i < 20; ++i)
      frames(j, i) = 2.0 * (bank.phi(i, 0) * gain * z0).real();
  }
  CHECK(loss_short(bank, spec, frames) <= 1e-20);
  CHECK(loss_long(bank, spec, frames) <= 1e-20);

  // a fixed point: omega = 0 and a constant trajectory in the span
  Spectrum still;
  still.dt = 0.2;
  still.omega = {cplx(0.0, 0.0), cplx(0.0, 0.0)};
  RealMat constant(4, 20);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 20; ++i)
      constant(j, i) = 2.0 * (bank.phi(i, 0) * z0).real();
  CHECK(loss_short(bank, still, constant) <= 1e-20);
  CHECK(loss_long(bank, still, constant) <= 1e-20);
}

TEST_CASE("short loss matches a scripted trace") {
  // N=3, one pair, three snapshots: project each frame by the 2x2 normal
  // equations, advance one step, accumulate the squared residual by hand
  ModeBank bank;
  bank.phi = DenseMatrix::zeros(3, 2);
  bank.phi(0, 0) = cplx(0.9, 0.2);
  bank.phi(1, 0) = cplx(-0.4, 0.6);
  bank.phi(2, 0) = cplx(0.1, -0.8);
  for (int i = 0; i < 3; ++i) bank.phi(i, 1) = std::conj(bank.phi(i, 0));
  Spectrum spec;
  spec.dt = 0.3;
  spec.omega = {cplx(-0.15, 1.1), cplx(-0.15, -1.1)};
  RealMat frames(3, 3);
  const double vals[3][3] = {{0.7, -0.2, 0.4}, {0.5, 0.1, -0.3}, {0.2, 0.6, 0.1}};
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) frames(j, i) = vals[j][i];

  const cplx g00 = inner(column(bank.phi, 0), column(bank.phi, 0));
  const cplx g01 = inner(column(bank.phi, 0), column(bank.phi, 1));
  const cplx g10 = inner(column(bank.phi, 1), column(bank.phi, 0));
  const cplx g11 = inner(column(bank.phi, 1), column(bank.phi, 1));
  const cplx det = g00 * g11 - g01 * g10;
  const cplx lam0 = std::exp(spec.omega[0] * spec.dt);
  const cplx lam1 = std::exp(spec.omega[1] * spec.dt);
  double acc = 0.0;
  for (int j = 0; j < 2; ++j) {
    cplx b0(0.0, 0.0), b1(0.0, 0.0);
    for (int i = 0; i < 3; ++i) {
      b0 += std::conj(bank.phi(i, 0)) * frames(j, i);
      b1 += std::conj(bank.phi(i, 1)) * frames(j, i);
    }
    const cplx z0 = (b0 * g11 - g01 * b1) / det;
    const cplx z1 = (g00 * b1 - b0 * g10) / det;
    for (int i = 0; i < 3; ++i) {
      const cplx pred =
          bank.phi(i, 0) * lam0 * z0 + bank.phi(i, 1) * lam1 * z1;
      const cplx d = pred - cplx(frames(j + 1, i), 0.0);
      acc += d.real() * d.real() + d.imag() * d.imag();
    }
  }
  const double oracle = acc / (3.0 * 2.0);
  const double got = loss_short(bank, spec, frames);
  CHECK(std::abs(got - oracle) <= 1e-12 * std::max(1.0, oracle));
}

TEST_CASE("two-frame trajectories equate the losses") {
  const InrModel model = tiny_model(2, true, true, 8, 2, 19);
  const RealMat pts = grid_points({14}, {1.0});
  const ModeBank bank = eval_basis(model, pts, {0.3});
  const Spectrum spec = [&] {
    Spectrum s;
    s.dt = 0.4;
    s.omega = {cplx(-0.3, 0.8), cplx(-0.05, 2.0), cplx(-0.3, -0.8),
               cplx(-0.05, -2.0)};
    return s;
  }();
  RealMat frames(2, 14);
  Rng rng(41);
  for (auto& x : frames.v) x = rng.normal();
  CHECK(loss_long(bank, spec, frames) == loss_short(bank, spec, frames));
}

TEST_CASE("mixed loss weight degeneracies") {
  const InrModel model = tiny_model(1, true, true, 8, 2, 20);
  const ModeBank bank = eval_basis(model, grid_points({10}, {1.0}), {0.5});
  Spectrum spec;
  spec.dt = 0.25;
  spec.omega = {cplx(-0.2, 1.0), cplx(-0.2, -1.0)};
  RealMat frames(6, 10);
  Rng rng(42);
  for (auto& x : frames.v) x = rng.normal();

  const double ls = loss_short(bank, spec, frames);
  const double ll = loss_long(bank, spec, frames);
  CHECK(mixed_loss(1.0, 0.0, bank, spec, frames) == ls);
  CHECK(mixed_loss(0.0, 1.0, bank, spec, frames) == ll);
  CHECK(mixed_loss(0.1, 0.9, bank, spec, frames) == 0.1 * ls + 0.9 * ll);
  CHECK_THROWS_AS(mixed_loss(0.0, 0.0, bank, spec, frames), Error);
}

TEST_CASE("long horizon subsets") {
  CHECK(long_horizon_steps(5, 0) == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(long_horizon_steps(5, 9) == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(long_horizon_steps(0, 4).empty());
  const std::vector<int> js = long_horizon_steps(100, 32);
  CHECK(static_cast<int>(js.size()) >= 32);
  CHECK(js.back() == 100);
  for (size_t i = 1; i < js.size(); ++i) CHECK(js[i] > js[i - 1]);
  CHECK(js.front() >= 1);
}

TEST_CASE("deflation removes frozen content") {
  Rng rng(55);
  const int n = 12;
  DenseMatrix frozen(n, 4);
  for (auto& e : frozen.v) e = cplx(rng.normal(), rng.normal());
  DenseMatrix cand(n, 1);
  for (auto& e : cand.v) e = cplx(rng.normal(), rng.normal());

  const DenseMatrix untouched = deflate(DenseMatrix(), cand);
  CHECK(untouched.v == cand.v);

  DenseMatrix in_span(n, 1);
  for (int i = 0; i < n; ++i)
    in_span(i, 0) = 0.7 * frozen(i, 0) - cplx(0.0, 1.3) * frozen(i, 2);
  const DenseMatrix killed = deflate(frozen, in_span);
  CHECK(col_norm(killed) <= 1e-12 * col_norm(in_span));

  const DenseMatrix once = deflate(frozen, cand);
  const DenseMatrix twice = deflate(frozen, once);
  double diff = 0.0;
  for (int i = 0; i < n; ++i) diff = std::max(diff, std::abs(twice(i, 0) - once(i, 0)));
  CHECK(diff <= 1e-12 * col_norm(once));

  double cross = 0.0, fnorm = 0.0;
  for (int q = 0; q < 4; ++q) {
    cplx dot(0.0, 0.0);
    double cn = 0.0;
    for (int i = 0; i < n; ++i) {
      dot += std::conj(frozen(i, q)) * once(i, 0);
      cn += std::norm(frozen(i, q));
    }
    cross = std::max(cross, std::abs(dot));
    fnorm = std::max(fnorm, std::sqrt(cn));
  }
  CHECK(cross <= 1e-10 * fnorm * col_norm(once));
}

TEST_CASE("deflated stages stay orthogonal in assembled banks") {
  const InrModel model = tiny_model(3, true, true, 10, 2, 23);
  const RealMat pts = grid_points({40}, {1.0});
  const ModeBank bank = eval_basis(model, pts, {0.4});
  // every later first-half column is orthogonal to all earlier columns
  // (both halves), which is exactly what sequential deflation enforces
  for (int s = 1; s < 3; ++s) {
    const DenseMatrix phi_s = column(bank.phi, s);
    for (int q = 0; q < s; ++q)
      for (int half : {0, 3}) {
        const DenseMatrix prev = column(bank.phi, q + half);
        CHECK(std::abs(inner(prev, phi_s)) <=
              1e-10 * col_norm(prev) * col_norm(phi_s));
      }
  }
}

TEST_CASE("graph loss agrees with the public operators") {
  InrModel model = tiny_model(2, true, true, 8, 2, 24, 5.0);
  const RealMat pts = grid_points({18}, {1.0});
  const std::vector<double> code = {0.35};
  RealMat frames(7, 18);
  Rng rng(71);
  for (auto& x : frames.v) x = rng.normal();

  TrainConfig cfg = tiny_config();
  cfg.pairs = 2;
  cfg.alpha = 0.6;
  cfg.beta = 0.4;
  const StageBatchItem item = make_item(model, pts, code, frames, 1);

  ad::Tape tape;
  const StageGraph graph = build_stage_graph(tape, model, 1, item, cfg);
  const double got = tape.value(graph.loss)(0, 0);

  const ModeBank bank = eval_basis(model, pts, code);
  const Spectrum spec = eval_spectrum(model, code);
  const double want = 0.6 * loss_short(bank, spec, frames) +
                      0.4 * loss_long(bank, spec, frames, 0);
  CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, want));

  // only the candidate stage's parameters are bound as leaves
  CHECK(graph.phi_vars.size() == model.stages[1].phi.tensors.size());
  CHECK(graph.lam_vars.size() == model.stages[1].lam.tensors.size());
}

// The comparison is relative per parameter with an absolute floor of 1e-2
// on the denominator: h=1e-6 central differences through the pivoted QR
// solve carry ~5e-8 of round-off, which swamps a pure relative bound on
// components far below the gradient's own scale (max |g| is ~1 here).
TEST_CASE("stage gradients match central differences") {
  InrModel model = tiny_model(2, true, true, 6, 2, 25, 5.0);
  const RealMat pts = grid_points({12}, {1.0});
  const std::vector<double> code = {0.45};
  RealMat frames(6, 12);
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 12; ++i) {
      const double x = static_cast<double>(i) / 12.0;
      frames(j, i) = std::sin(2.0 * kPi * x + 0.3 * j) +
                     0.5 * std::cos(4.0 * kPi * x - 0.2 * j);
    }
  TrainConfig cfg = tiny_config();
  cfg.pairs = 2;
  cfg.alpha = 0.6;
  cfg.beta = 0.4;

  auto check_grads = [&](InrModel& m, int stage, const StageBatchItem& item) {
    ad::Tape tape;
    const StageGraph graph = build_stage_graph(tape, m, stage, item, cfg);
    tape.backward(graph.loss);
    std::vector<RealMat> gphi, glam;
    for (ad::Var v : graph.phi_vars) gphi.push_back(tape.grad(v));
    for (ad::Var v : graph.lam_vars) glam.push_back(tape.grad(v));

    auto value = [&] {
      ad::Tape t2;
      const StageGraph g2 = build_stage_graph(t2, m, stage, item, cfg);
      return t2.value(g2.loss)(0, 0);
    };
    const double h = 1e-6;
    auto sweep = [&](std::vector<nn::ParamSet*> sets,
                     const std::vector<RealMat>& grads) {
      size_t flat = 0;
      for (nn::ParamSet* set : sets)
        for (RealMat& tensor : set->tensors) {
          const RealMat& g = grads[flat++];
          for (size_t e = 0; e < tensor.v.size(); ++e) {
            const double save = tensor.v[e];
            tensor.v[e] = save + h;
            const double lp = value();
            tensor.v[e] = save - h;
            const double lm = value();
            tensor.v[e] = save;
            const double fd = (lp - lm) / (2.0 * h);
            const double ag = g.v[e];
            CHECK(std::abs(fd - ag) <=
                  1e-5 * std::max({std::abs(fd), std::abs(ag), 1e-2}));
          }
        }
    };
    if (stage < 0) {
      sweep({&m.stages[0].phi, &m.stages[1].phi}, gphi);
      sweep({&m.stages[0].lam, &m.stages[1].lam}, glam);
    } else {
      sweep({&m.stages[stage].phi}, gphi);
      sweep({&m.stages[stage].lam}, glam);
    }
  };

  SUBCASE("sequential stage through deflation") {
    const StageBatchItem item = make_item(model, pts, code, frames, 1);
    check_grads(model, 1, item);
  }
  SUBCASE("joint stages without deflation") {
    InrModel flat = model;
    flat.deflated = false;
    TrainConfig joint = cfg;
    joint.ablation = Ablation::no_deflation;
    const StageBatchItem item = make_item(flat, pts, code, frames, 0);
    ad::Tape tape;
    const StageGraph graph = build_stage_graph(tape, flat, -1, item, joint);
    tape.backward(graph.loss);
    std::vector<RealMat> gphi, glam;
    for (ad::Var v : graph.phi_vars) gphi.push_back(tape.grad(v));
    for (ad::Var v : graph.lam_vars) glam.push_back(tape.grad(v));
    auto value = [&] {
      ad::Tape t2;
      const StageGraph g2 = build_stage_graph(t2, flat, -1, item, joint);
      return t2.value(g2.loss)(0, 0);
    };
    const double h = 1e-6;
    size_t fphi = 0, flam = 0;
    for (int s = 0; s < 2; ++s) {
      for (RealMat& tensor : flat.stages[s].phi.tensors) {
        const RealMat& g = gphi[fphi++];
        for (size_t e = 0; e < tensor.v.size(); ++e) {
          const double save = tensor.v[e];
          tensor.v[e] = save + h;
          const double lp = value();
          tensor.v[e] = save - h;
          const double lm = value();
          tensor.v[e] = save;
          const double fd = (lp - lm) / (2.0 * h);
          CHECK(std::abs(fd - g.v[e]) <=
                1e-5 * std::max({std::abs(fd), std::abs(g.v[e]), 1e-2}));
        }
      }
      for (RealMat& tensor : flat.stages[s].lam.tensors) {
        const RealMat& g = glam[flam++];
        for (size_t e = 0; e < tensor.v.size(); ++e) {
          const double save = tensor.v[e];
          tensor.v[e] = save + h;
          const double lp = value();
          tensor.v[e] = save - h;
          const double lm = value();
          tensor.v[e] = save;
          const double fd = (lp - lm) / (2.0 * h);
          CHECK(std::abs(fd - g.v[e]) <=
                1e-5 * std::max({std::abs(fd), std::abs(g.v[e]), 1e-2}));
        }
      }
    }
  }
}

TEST_CASE("conjugate pairing keeps real data real") {
  const InrModel model = tiny_model(2, true, true, 10, 2, 26);
  const RealMat pts = grid_points({30}, {1.0});
  const ModeBank bank = eval_basis(model, pts, {0.55});
  Spectrum spec;
  spec.dt = 0.2;
  spec.omega = {cplx(-0.1, 0.9), cplx(-0.3, 2.2), cplx(-0.1, -0.9),
                cplx(-0.3, -2.2)};

  std::vector<double> u(30);
  Rng rng(91);
  for (double& x : u) x = rng.normal();
  const ModalCoefficients z = project(bank, u);
  double zmax = 0.0;
  for (const cplx& c : z.z) zmax = std::max(zmax, std::abs(c));
  CHECK(std::abs(z.z[2] - std::conj(z.z[0])) <= 1e-10 * std::max(1.0, zmax));
  CHECK(std::abs(z.z[3] - std::conj(z.z[1])) <= 1e-10 * std::max(1.0, zmax));

  const Rollout roll = rollout(bank, spec, z, {0.0, 0.3, 0.7, 2.1});
  CHECK(roll.max_imag <= 1e-8 * std::max(1.0, max_abs(roll.frames)));
}

TEST_CASE("training freezes finished stages and stays deterministic") {
  const TrajectorySet data =
      planted_set(16, 5, 0.2, cplx(-0.05, 0.8), {0.2, 0.8}, 2);
  TrainConfig cfg = tiny_config();
  cfg.pairs = 2;

  InrModel model;
  train_stage(model, data, 0, cfg);
  REQUIRE(model.stages.size() == 1);
  CHECK(model.stages[0].frozen);
  REQUIRE(model.stage_loss.size() == 1);
  CHECK(model.stage_loss[0].size() == 3);
  CHECK(model.dt == doctest::Approx(0.2).epsilon(1e-15));

  const nn::ParamSet phi_snapshot = model.stages[0].phi;
  const nn::ParamSet lam_snapshot = model.stages[0].lam;
  train_stage(model, data, 1, cfg);
  REQUIRE(model.stages.size() == 2);
  CHECK(same_params(model.stages[0].phi, phi_snapshot));
  CHECK(same_params(model.stages[0].lam, lam_snapshot));

  // wrong stage order is rejected
  InrModel fresh;
  CHECK_THROWS_AS(train_stage(fresh, data, 1, cfg), Error);

  // the full protocol equals the stage-by-stage calls bit for bit
  const InrModel all = train_all(data, cfg);
  REQUIRE(all.stages.size() == 2);
  for (int s = 0; s < 2; ++s) {
    CHECK(same_params(all.stages[s].phi, model.stages[s].phi));
    CHECK(same_params(all.stages[s].lam, model.stages[s].lam));
  }

  // worker count must not change the arithmetic
  TrainConfig wide = cfg;
  wide.workers = 2;
  const InrModel threaded = train_all(data, wide);
  for (int s = 0; s < 2; ++s) {
    CHECK(same_params(threaded.stages[s].phi, model.stages[s].phi));
    CHECK(same_params(threaded.stages[s].lam, model.stages[s].lam));
  }

  // trained banks keep the deflation orthogonality at the sample points
  const RealMat pts = grid_points({16}, {1.0});
  const ModeBank bank = eval_basis(model, pts, {0.2});
  const DenseMatrix phi1 = column(bank.phi, 1);
  for (int half : {0, 2}) {
    const DenseMatrix prev = column(bank.phi, half);
    CHECK(std::abs(inner(prev, phi1)) <=
          1e-10 * col_norm(prev) * col_norm(phi1));
  }
}

TEST_CASE("one pair recovers a planted rate") {
  const cplx target(-0.05, 0.8);
  const TrajectorySet data = planted_set(32, 20, 0.2, target, {0.5}, 1);
  TrainConfig cfg = tiny_config();
  cfg.pairs = 1;
  cfg.phi_width = 12;
  cfg.lam_width = 12;
  cfg.epochs_per_stage = 1200;
  cfg.lr_lambda = 4e-3;
  cfg.alpha = 0.5;
  cfg.beta = 0.5;

  const InrModel model = train_all(data, cfg);
  const Spectrum spec = eval_spectrum(model, {0.5});
  const double err = std::min(std::abs(spec.omega[0] - target),
                              std::abs(std::conj(spec.omega[0]) - target));
  CHECK(err <= 1e-2);

  // the loss curve must have actually descended
  const std::vector<double>& curve = model.stage_loss[0];
  CHECK(curve.back() < 0.1 * curve.front());
}

TEST_CASE("ablation switches change the protocol") {
  const TrajectorySet data =
      planted_set(16, 5, 0.2, cplx(-0.05, 0.8), {0.2, 0.8}, 2);

  TrainConfig joint = tiny_config();
  joint.pairs = 2;
  joint.ablation = Ablation::no_deflation;
  const InrModel flat = train_all(data, joint);
  CHECK_FALSE(flat.deflated);
  CHECK(flat.stages.size() == 2);
  CHECK(flat.stage_loss.size() == 1);  // one joint curve
  for (const ModePairNets& nets : flat.stages) CHECK(nets.frozen);

  TrainConfig pen = joint;
  pen.ablation = Ablation::penalty_orth;
  const InrModel penalized = train_all(data, pen);
  CHECK_FALSE(penalized.deflated);
  CHECK(penalized.stages.size() == 2);

  TrainConfig unpaired = tiny_config();
  unpaired.pairs = 1;
  unpaired.ablation = Ablation::no_conjugate;
  const InrModel um = train_all(data, unpaired);
  CHECK_FALSE(um.paired);
  const ModeBank bank = eval_basis(um, grid_points({16}, {1.0}), {0.2});
  // partner columns are independent, not conjugate mirrors
  double dev = 0.0;
  for (int i = 0; i < 16; ++i)
    dev = std::max(dev, std::abs(bank.phi(i, 1) - std::conj(bank.phi(i, 0))));
  CHECK(dev > 1e-8);

  TrainConfig no_long = tiny_config();
  no_long.ablation = Ablation::no_long;
  const InrModel short_only = train_all(data, no_long);
  CHECK(short_only.stages.size() == 1);
  // with beta forced to zero the run must match an explicit beta = 0 config
  TrainConfig zero_beta = tiny_config();
  zero_beta.beta = 0.0;
  zero_beta.alpha = no_long.alpha;
  const InrModel explicit_zero = train_all(data, zero_beta);
  CHECK(same_params(short_only.stages[0].phi, explicit_zero.stages[0].phi));
  CHECK(same_params(short_only.stages[0].lam, explicit_zero.stages[0].lam));
}

TEST_CASE("divergent training aborts with a report") {
  const TrajectorySet data =
      planted_set(16, 5, 0.2, cplx(-0.05, 0.8), {0.5}, 1);
  TrainConfig cfg = tiny_config();
  cfg.epochs_per_stage = 40;
  cfg.lr_phi = 1e8;
  cfg.lr_lambda = 1e8;
  InrModel model;
  CHECK_THROWS_AS(train_stage(model, data, 0, cfg), DivergenceError);
}
