#include <cmath>
#include <string>
#include <vector>

#include "ndmd/errors.hpp"
#include "ndmd/fft.hpp"
#include "ndmd/rng.hpp"
#include "ndmd/solvers.hpp"

namespace ndmd {

void Grid::validate() const {
  if (dims.empty() || dims.size() != extents.size() ||
      dims.size() != periodic.size())
    throw ShapeError("Grid: axis lists must be non-empty and equal length");
  for (int d : dims)
    if (d <= 0) throw ShapeError("Grid: dims must be positive");
  for (double e : extents)
    if (!(e > 0.0)) throw ShapeError("Grid: extents must be positive");
}

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Signed FFT mode number for bin j of an n-point transform.
int mode_of(int j, int n) { return j < n / 2 ? j : j - n; }

/// Kassam-Trefethen ETDRK4 tables for a diagonal linear operator, evaluated
/// by a 32-point half-circle contour (valid for real spectra).
struct Etdrk4 {
  std::vector<double> e, e2, q, f1, f2, f3;

  Etdrk4(const std::vector<double>& lin, double h) {
    const int n = static_cast<int>(lin.size());
    const int m = 32;
    e.resize(n);
    e2.resize(n);
    q.resize(n);
    f1.resize(n);
    f2.resize(n);
    f3.resize(n);
    for (int i = 0; i < n; ++i) {
      const double hl = h * lin[i];
      e[i] = std::exp(hl);
      e2[i] = std::exp(0.5 * hl);
      cplx sq(0.0), s1(0.0), s2(0.0), s3(0.0);
      for (int j = 0; j < m; ++j) {
        const cplx r = std::exp(cplx(0.0, kPi * (j + 0.5) / m));
        const cplx lr = hl + r;
        const cplx elr = std::exp(lr);
        const cplx lr2 = lr * lr;
        const cplx lr3 = lr2 * lr;
        sq += (std::exp(0.5 * lr) - 1.0) / lr;
        s1 += (-4.0 - lr + elr * (4.0 - 3.0 * lr + lr2)) / lr3;
        s2 += (2.0 + lr + elr * (-2.0 + lr)) / lr3;
        s3 += (-4.0 - 3.0 * lr - lr2 + elr * (4.0 - lr)) / lr3;
      }
      q[i] = h * sq.real() / m;
      f1[i] = h * s1.real() / m;
      f2[i] = h * s2.real() / m;
      f3[i] = h * s3.real() / m;
    }
  }
};

void throw_blowup(const char* what, int frame) {
  throw DivergenceError(std::string(what) + ": non-finite field at frame " +
                            std::to_string(frame),
                        frame);
}

}  // namespace

double grf_lambda(const GrfSpec& spec, int k) {
  const double w = 2.0 * kPi * k;
  return std::sqrt(2.0) * std::abs(spec.sigma) *
         std::pow(w * w + spec.tau * spec.tau, -0.5 * spec.gamma);
}

std::vector<double> grf_sample(const GrfSpec& spec, const Grid& grid) {
  grid.validate();
  if (grid.ndim() != 1 || !grid.periodic[0])
    throw ShapeError("grf_sample: needs a periodic 1D grid");
  if (spec.cutoff < 1) throw ShapeError("grf_sample: cutoff must be >= 1");
  if (spec.gamma <= 0.5)
    throw ShapeError("grf_sample: gamma must exceed 1/2 for a summable spectrum");
  const int n = grid.dims[0];
  const double lx = grid.extents[0];
  Rng rng(spec.seed);
  std::vector<double> u(n, spec.mean);
  for (int k = 1; k <= spec.cutoff; ++k) {
    const double lam = grf_lambda(spec, k);
    const double ak = lam * rng.normal();
    const double bk = lam * rng.normal();
    for (int j = 0; j < n; ++j) {
      const double x = lx * j / n;
      const double arg = 2.0 * kPi * k * (x - 0.5);
      u[j] += ak * std::cos(arg) + bk * std::sin(arg);
    }
  }
  return u;
}

Trajectory burgers_simulate(const std::vector<double>& u0, double nu,
                            double horizon, int n_steps, const Grid& grid,
                            int substeps) {
  grid.validate();
  if (grid.ndim() != 1 || !grid.periodic[0])
    throw ShapeError("burgers_simulate: needs a periodic 1D grid");
  const int n = grid.dims[0];
  if (static_cast<int>(u0.size()) != n)
    throw ShapeError("burgers_simulate: initial field does not match the grid");
  if (!(nu > 0.0)) throw Error("burgers_simulate: viscosity must be positive");
  if (n_steps < 1) throw ShapeError("burgers_simulate: need at least one step");
  const double lx = grid.extents[0];
  const double frame_dt = horizon / n_steps;

  if (substeps <= 0) {
    double umax = 1.0;
    for (double x : u0) umax = std::max(umax, std::abs(x));
    const double cfl_dt = 0.4 * (lx / n) / umax;
    substeps = std::max(1, static_cast<int>(std::ceil(frame_dt / cfl_dt)));
  }
  const double h = frame_dt / substeps;

  std::vector<double> lin(n);
  std::vector<cplx> ik(n);
  std::vector<char> keep(n);
  for (int j = 0; j < n; ++j) {
    const int m = mode_of(j, n);
    const double k = 2.0 * kPi * m / lx;
    lin[j] = -nu * k * k;
    ik[j] = (2 * std::abs(m) == n) ? cplx(0.0) : cplx(0.0, k);
    keep[j] = 3 * std::abs(m) < n ? 1 : 0;
  }
  const Etdrk4 tab(lin, h);
  const Fft plan(n);

  std::vector<cplx> v(n), scratch(n);
  for (int j = 0; j < n; ++j) v[j] = u0[j];
  plan.forward(v.data());

  // -d/dx (u^2 / 2), de-aliased on both sides of the product
  auto nonlin = [&](const std::vector<cplx>& vh, std::vector<cplx>& out) {
    for (int j = 0; j < n; ++j) scratch[j] = keep[j] ? vh[j] : cplx(0.0);
    plan.inverse(scratch.data());
    for (int j = 0; j < n; ++j) {
      const double ur = scratch[j].real();
      scratch[j] = 0.5 * ur * ur;
    }
    plan.forward(scratch.data());
    for (int j = 0; j < n; ++j)
      out[j] = keep[j] ? -ik[j] * scratch[j] : cplx(0.0);
  };

  Trajectory out;
  out.frames = RealMat(n_steps + 1, n);
  out.dt = frame_dt;
  for (int j = 0; j < n; ++j) out.frames(0, j) = u0[j];

  std::vector<cplx> nv(n), a(n), na(n), b(n), nb(n), c(n), nc(n);
  for (int frame = 1; frame <= n_steps; ++frame) {
    for (int s = 0; s < substeps; ++s) {
      nonlin(v, nv);
      for (int j = 0; j < n; ++j) a[j] = tab.e2[j] * v[j] + tab.q[j] * nv[j];
      nonlin(a, na);
      for (int j = 0; j < n; ++j) b[j] = tab.e2[j] * v[j] + tab.q[j] * na[j];
      nonlin(b, nb);
      for (int j = 0; j < n; ++j)
        c[j] = tab.e2[j] * a[j] + tab.q[j] * (2.0 * nb[j] - nv[j]);
      nonlin(c, nc);
      for (int j = 0; j < n; ++j)
        v[j] = tab.e[j] * v[j] + tab.f1[j] * nv[j] +
               tab.f2[j] * 2.0 * (na[j] + nb[j]) + tab.f3[j] * nc[j];
    }
    scratch = v;
    plan.inverse(scratch.data());
    bool ok = true;
    for (int j = 0; j < n; ++j) {
      const double ur = scratch[j].real();
      if (!std::isfinite(ur) || std::abs(ur) > 1e6) ok = false;
      out.frames(frame, j) = ur;
    }
    if (!ok) throw_blowup("burgers_simulate", frame);
  }
  return out;
}

void shear_velocity(const ShearSpec& spec, const Grid& grid, RealMat& u,
                    RealMat& w) {
  grid.validate();
  if (grid.ndim() != 2 || !grid.periodic[0] || !grid.periodic[1])
    throw ShapeError("shear_velocity: needs a doubly periodic 2D grid");
  const int nx = grid.dims[0], nz = grid.dims[1];
  const double lx = grid.extents[0], lz = grid.extents[1];
  const double s = spec.separation;
  if (!(s > 0.0 && s < lz))
    throw ShapeError("shear_velocity: separation must lie inside (0, L_z)");
  const double z1 = 0.5 * (lz - s), z2 = 0.5 * (lz + s);

  u = RealMat(nz, nx);
  w = RealMat(nz, nx);
  Rng rng(spec.noise_seed);
  for (int j = 0; j < nz; ++j) {
    const double z = lz * j / nz;
    const double base =
        spec.u_max * (std::tanh((z - z1) / spec.delta) -
                      std::tanh((z - z2) / spec.delta) - 1.0);
    const double g1 = std::exp(-((z - z1) / spec.delta) * ((z - z1) / spec.delta));
    const double g2 = std::exp(-((z - z2) / spec.delta) * ((z - z2) / spec.delta));
    for (int i = 0; i < nx; ++i) {
      const double x = lx * i / nx;
      u(j, i) = base + spec.eps * std::sin(4.0 * kPi * x / lx) * (g1 + g2);
      w(j, i) = spec.eps * rng.normal();
    }
  }
}

RealMat shear_initial(const ShearSpec& spec, const Grid& grid) {
  RealMat u, w;
  shear_velocity(spec, grid, u, w);
  const int nx = grid.dims[0], nz = grid.dims[1];
  const double lx = grid.extents[0], lz = grid.extents[1];
  const Fft px(nx), pz(nz);

  DenseMatrix uh = DenseMatrix::from_real(u);
  DenseMatrix wh = DenseMatrix::from_real(w);
  fft2(px, pz, uh, false);
  fft2(px, pz, wh, false);
  DenseMatrix oh(nz, nx);
  for (int j = 0; j < nz; ++j) {
    const int mz = mode_of(j, nz);
    const cplx ikz =
        (2 * std::abs(mz) == nz) ? cplx(0.0) : cplx(0.0, 2.0 * kPi * mz / lz);
    for (int i = 0; i < nx; ++i) {
      const int mx = mode_of(i, nx);
      const cplx ikx =
          (2 * std::abs(mx) == nx) ? cplx(0.0) : cplx(0.0, 2.0 * kPi * mx / lx);
      oh(j, i) = ikx * wh(j, i) - ikz * uh(j, i);
    }
  }
  fft2(px, pz, oh, true);
  return oh.real_part();
}

Trajectory ns_vorticity_simulate(const RealMat& w0, double nu, double horizon,
                                 int n_frames, const Grid& grid, int substeps) {
  grid.validate();
  if (grid.ndim() != 2 || !grid.periodic[0] || !grid.periodic[1])
    throw ShapeError("ns_vorticity_simulate: needs a doubly periodic 2D grid");
  const int nx = grid.dims[0], nz = grid.dims[1];
  if (w0.rows != nz || w0.cols != nx)
    throw ShapeError("ns_vorticity_simulate: field does not match the grid");
  if (!(nu > 0.0))
    throw Error("ns_vorticity_simulate: viscosity must be positive");
  if (n_frames < 1)
    throw ShapeError("ns_vorticity_simulate: need at least one frame");
  const double lx = grid.extents[0], lz = grid.extents[1];
  const double frame_dt = horizon / n_frames;
  const long cells = static_cast<long>(nx) * nz;

  if (substeps <= 0) {
    // shear setups have |u| <= ~1; allow margin for roll-up acceleration
    const double dx = std::min(lx / nx, lz / nz);
    const double cfl_dt = 0.4 * dx / 1.5;
    substeps = std::max(1, static_cast<int>(std::ceil(frame_dt / cfl_dt)));
  }
  const double h = frame_dt / substeps;

  std::vector<double> lin(cells);
  std::vector<cplx> ikx(nx), ikz(nz);
  std::vector<double> k2(cells);
  std::vector<char> keep(cells);
  for (int i = 0; i < nx; ++i) {
    const int m = mode_of(i, nx);
    ikx[i] = (2 * std::abs(m) == nx) ? cplx(0.0)
                                     : cplx(0.0, 2.0 * kPi * m / lx);
  }
  for (int j = 0; j < nz; ++j) {
    const int m = mode_of(j, nz);
    ikz[j] = (2 * std::abs(m) == nz) ? cplx(0.0)
                                     : cplx(0.0, 2.0 * kPi * m / lz);
  }
  for (int j = 0; j < nz; ++j) {
    const int mz = mode_of(j, nz);
    for (int i = 0; i < nx; ++i) {
      const int mx = mode_of(i, nx);
      const double kx = 2.0 * kPi * mx / lx, kz = 2.0 * kPi * mz / lz;
      const long at = static_cast<long>(j) * nx + i;
      k2[at] = kx * kx + kz * kz;
      lin[at] = -nu * k2[at];
      keep[at] = (3 * std::abs(mx) < nx && 3 * std::abs(mz) < nz) ? 1 : 0;
    }
  }
  const Etdrk4 tab(lin, h);
  const Fft px(nx), pz(nz);

  DenseMatrix vh = DenseMatrix::from_real(w0);
  fft2(px, pz, vh, false);

  DenseMatrix uf(nz, nx), wf(nz, nx), om(nz, nx);
  // divergence-form advection: N = -d/dx fft(u w) - d/dz fft(w w); the k = 0
  // mode vanishes identically, so circulation is conserved to round-off
  auto nonlin = [&](const DenseMatrix& in, DenseMatrix& out) {
    for (long at = 0; at < cells; ++at)
      om.v[at] = keep[at] ? in.v[at] : cplx(0.0);
    for (int j = 0; j < nz; ++j)
      for (int i = 0; i < nx; ++i) {
        const long at = static_cast<long>(j) * nx + i;
        const cplx ph = k2[at] > 0.0 ? om.v[at] / k2[at] : cplx(0.0);
        uf(j, i) = ikz[j] * ph;
        wf(j, i) = -ikx[i] * ph;
      }
    fft2(px, pz, uf, true);
    fft2(px, pz, wf, true);
    fft2(px, pz, om, true);
    for (long at = 0; at < cells; ++at) {
      const double o = om.v[at].real();
      uf.v[at] = uf.v[at].real() * o;
      wf.v[at] = wf.v[at].real() * o;
    }
    fft2(px, pz, uf, false);
    fft2(px, pz, wf, false);
    for (int j = 0; j < nz; ++j)
      for (int i = 0; i < nx; ++i) {
        const long at = static_cast<long>(j) * nx + i;
        out.v[at] = keep[at] ? -(ikx[i] * uf.v[at] + ikz[j] * wf.v[at])
                             : cplx(0.0);
      }
  };

  Trajectory out;
  out.frames = RealMat(n_frames + 1, static_cast<int>(cells));
  out.dt = frame_dt;
  for (long at = 0; at < cells; ++at) out.frames(0, static_cast<int>(at)) = w0.v[at];

  DenseMatrix nv(nz, nx), a(nz, nx), na(nz, nx), b(nz, nx), nb(nz, nx),
      c(nz, nx), nc(nz, nx), snap(nz, nx);
  for (int frame = 1; frame <= n_frames; ++frame) {
    for (int s = 0; s < substeps; ++s) {
      nonlin(vh, nv);
      for (long t = 0; t < cells; ++t) a.v[t] = tab.e2[t] * vh.v[t] + tab.q[t] * nv.v[t];
      nonlin(a, na);
      for (long t = 0; t < cells; ++t) b.v[t] = tab.e2[t] * vh.v[t] + tab.q[t] * na.v[t];
      nonlin(b, nb);
      for (long t = 0; t < cells; ++t)
        c.v[t] = tab.e2[t] * a.v[t] + tab.q[t] * (2.0 * nb.v[t] - nv.v[t]);
      nonlin(c, nc);
      for (long t = 0; t < cells; ++t)
        vh.v[t] = tab.e[t] * vh.v[t] + tab.f1[t] * nv.v[t] +
                  tab.f2[t] * 2.0 * (na.v[t] + nb.v[t]) + tab.f3[t] * nc.v[t];
    }
    snap = vh;
    fft2(px, pz, snap, true);
    bool ok = true;
    for (long t = 0; t < cells; ++t) {
      const double val = snap.v[t].real();
      if (!std::isfinite(val) || std::abs(val) > 1e8) ok = false;
      out.frames(frame, static_cast<int>(t)) = val;
    }
    if (!ok) throw_blowup("ns_vorticity_simulate", frame);
  }
  return out;
}

}  // namespace ndmd
