#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ndmd/errors.hpp"
#include "ndmd/kernels.hpp"
#include "ndmd/solvers.hpp"

namespace ndmd {

namespace {

using kernels::d2q9::EX;
using kernels::d2q9::EY;
using kernels::d2q9::OPP;
using kernels::d2q9::W;

double feq(int q, double rho, double ux, double uy) {
  const double eu = EX[q] * ux + EY[q] * uy;
  const double usq = ux * ux + uy * uy;
  return W[q] * rho * (1.0 + 3.0 * eu + 4.5 * eu * eu - 1.5 * usq);
}

}  // namespace

void LbmConfig::validate() const {
  if (nx < 3 || ny < 3) throw ShapeError("LbmConfig: lattice too small");
  if (std::hypot(u_in_x, u_in_y) >= 0.3)
    throw Error("LbmConfig: inflow speed must stay below 0.3 lattice units");
  if (!(nu > 0.0)) throw Error("LbmConfig: viscosity must be positive");
  if (frames < 1 || stride < 1 || warmup < 0)
    throw ShapeError("LbmConfig: frames/stride/warmup out of range");
  if (solid.size() != 0 && (solid.rows != ny || solid.cols != nx))
    throw ShapeError("LbmConfig: solid mask does not match the lattice");
  if (solid.size() != 0) {
    for (int i = 0; i < nx; ++i)
      if (solid(0, i) != 0.0 || solid(ny - 1, i) != 0.0)
        throw Error("LbmConfig: obstacle must sit strictly inside the domain");
    for (int j = 0; j < ny; ++j)
      if (solid(j, 0) != 0.0 || solid(j, nx - 1) != 0.0)
        throw Error("LbmConfig: obstacle must sit strictly inside the domain");
  }
  if (channel < 0 || channel > 3) throw ShapeError("LbmConfig: bad channel");
}

void add_disc(LbmConfig& config, double cx, double cy, double radius) {
  if (config.solid.size() == 0) config.solid = RealMat(config.ny, config.nx);
  for (int j = 0; j < config.ny; ++j)
    for (int i = 0; i < config.nx; ++i) {
      const double dx = i - cx, dy = j - cy;
      if (dx * dx + dy * dy <= radius * radius) config.solid(j, i) = 1.0;
    }
}

LbmResult lbm_simulate(const LbmConfig& config) {
  config.validate();
  const int nx = config.nx, ny = config.ny;
  const long cells = static_cast<long>(nx) * ny;
  const double tau = 3.0 * config.nu + 0.5;
  const double omega = 1.0 / tau;

  RealMat solid = config.solid.size() ? config.solid : RealMat(ny, nx);
  std::vector<std::vector<double>> fa(9), fb(9);
  for (int q = 0; q < 9; ++q) {
    fa[q].assign(cells, 0.0);
    fb[q].assign(cells, 0.0);
  }
  double* fptr[9];

  // impulsive start at the inflow velocity on open setups, rest otherwise
  const bool open = config.left == SideMode::Inlet;
  const double u0x = open ? config.u_in_x : 0.0;
  const double u0y = open ? config.u_in_y : 0.0;
  for (long at = 0; at < cells; ++at)
    for (int q = 0; q < 9; ++q)
      fa[q][at] = feq(q, 1.0, solid.v[at] != 0.0 ? 0.0 : u0x,
                      solid.v[at] != 0.0 ? 0.0 : u0y);

  const auto at_of = [nx](int i, int j) {
    return static_cast<long>(j) * nx + i;
  };
  const bool wrap_x = config.left == SideMode::Periodic &&
                      config.right == SideMode::Periodic;
  const bool wrap_y = config.top == SideMode::Periodic &&
                      config.bottom == SideMode::Periodic;

  Trajectory traj;
  traj.frames = RealMat(config.frames, static_cast<int>(cells));
  traj.dt = config.stride;

  const long total_steps =
      static_cast<long>(config.warmup) +
      static_cast<long>(config.frames) * config.stride;
  int stored = 0;
  for (long step = 0; step < total_steps; ++step) {
    for (int q = 0; q < 9; ++q) fptr[q] = fa[q].data();
    kernels::d2q9_collide(static_cast<int>(cells), fptr, omega, config.gx,
                          config.gy);

    // pull streaming with half-way bounce-back at solids and walls
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const long at = at_of(i, j);
        for (int q = 0; q < 9; ++q) {
          int si = i - EX[q], sj = j - EY[q];
          bool bounce = false, outside = false;
          if (si < 0) {
            if (wrap_x) si += nx;
            else if (config.left == SideMode::Wall) bounce = true;
            else outside = true;
          } else if (si >= nx) {
            if (wrap_x) si -= nx;
            else if (config.right == SideMode::Wall) bounce = true;
            else outside = true;
          }
          if (!bounce && !outside) {
            if (sj < 0) {
              if (wrap_y) sj += ny;
              else if (config.bottom == SideMode::Wall) bounce = true;
              else outside = true;
            } else if (sj >= ny) {
              if (wrap_y) sj -= ny;
              else if (config.top == SideMode::Wall) bounce = true;
              else outside = true;
            }
          }
          if (!bounce && !outside && solid(sj, si) != 0.0) bounce = true;
          if (bounce)
            fb[q][at] = fa[OPP[q]][at];
          else if (outside)
            fb[q][at] = fa[q][at];  // refreshed by the boundary pass below
          else
            fb[q][at] = fa[q][at_of(si, sj)];
        }
      }

    if (config.left == SideMode::Inlet)
      for (int j = 0; j < ny; ++j)
        for (int q = 0; q < 9; ++q)
          fb[q][at_of(0, j)] = feq(q, 1.0, config.u_in_x, config.u_in_y);
    if (config.right == SideMode::Outlet)
      for (int j = 0; j < ny; ++j)
        for (int q = 0; q < 9; ++q)
          fb[q][at_of(nx - 1, j)] = fb[q][at_of(nx - 2, j)];
    if (config.right == SideMode::Inlet)
      for (int j = 0; j < ny; ++j)
        for (int q = 0; q < 9; ++q)
          fb[q][at_of(nx - 1, j)] = feq(q, 1.0, config.u_in_x, config.u_in_y);
    if (config.left == SideMode::Outlet)
      for (int j = 0; j < ny; ++j)
        for (int q = 0; q < 9; ++q)
          fb[q][at_of(0, j)] = fb[q][at_of(1, j)];

    fa.swap(fb);

    const bool store = step >= config.warmup &&
                       (step - config.warmup + 1) % config.stride == 0;
    if (store || step + 1 == total_steps) {
      bool ok = true;
      for (long at2 = 0; at2 < cells; ++at2) {
        if (solid.v[at2] != 0.0) {
          if (store) traj.frames(stored, static_cast<int>(at2)) = 0.0;
          continue;
        }
        double rho = 0.0, mx = 0.0, my = 0.0;
        for (int q = 0; q < 9; ++q) {
          const double fq = fa[q][at2];
          rho += fq;
          mx += EX[q] * fq;
          my += EY[q] * fq;
        }
        const double ux = (mx + 0.5 * config.gx) / rho;
        const double uy = (my + 0.5 * config.gy) / rho;
        const double speed = std::hypot(ux, uy);
        if (!std::isfinite(rho) || rho <= 0.0 || speed > 0.45) ok = false;
        if (store) {
          double val = 0.0;
          switch (config.channel) {
            case 0: val = speed; break;
            case 1: val = ux; break;
            case 2: val = uy; break;
            default: val = rho; break;
          }
          traj.frames(stored, static_cast<int>(at2)) = val;
        }
      }
      if (!ok)
        throw DivergenceError(
            "lbm_simulate: instability (speed near the lattice sound speed) "
            "at step " + std::to_string(step),
            step);
      if (store) ++stored;
    }
  }

  LbmResult res;
  res.traj = std::move(traj);
  res.solid = std::move(solid);
  return res;
}

Polyline cst_airfoil(const CstParams& params, int samples) {
  if (samples < 2) throw ShapeError("cst_airfoil: need at least 2 samples");
  if (params.t_e < 0.0) throw Error("cst_airfoil: trailing-edge thickness < 0");
  const double kPi = 3.14159265358979323846;

  std::vector<double> xs(samples), zu(samples), zl(samples);
  for (int j = 0; j < samples; ++j) {
    const double beta = kPi * j / (samples - 1);
    const double x = 0.5 * (1.0 - std::cos(beta));
    const double cl = std::sqrt(x) * (1.0 - x);
    const double su = params.a_u0 * (1.0 - x) + params.a_u1 * x;
    const double sl = params.a_l0 * (1.0 - x) + params.a_l1 * x;
    xs[j] = x;
    zu[j] = cl * su + 0.5 * params.t_e * x;
    zl[j] = cl * sl - 0.5 * params.t_e * x;
  }
  for (int j = 1; j + 1 < samples; ++j)
    if (!(zu[j] > zl[j]))
      throw Error("cst_airfoil: self-intersecting surface parameters");

  // trailing edge -> leading edge along the top, back along the bottom
  Polyline poly;
  poly.x.reserve(2 * samples - 1);
  poly.z.reserve(2 * samples - 1);
  for (int j = samples - 1; j >= 0; --j) {
    poly.x.push_back(xs[j]);
    poly.z.push_back(zu[j]);
  }
  for (int j = 1; j < samples; ++j) {
    poly.x.push_back(xs[j]);
    poly.z.push_back(zl[j]);
  }

  const double th = params.theta_cw_deg * kPi / 180.0;
  const double ct = std::cos(th), st = std::sin(th);
  for (size_t j = 0; j < poly.size(); ++j) {
    const double dx = poly.x[j] - 0.5, dz = poly.z[j];
    poly.x[j] = 0.5 + ct * dx + st * dz;
    poly.z[j] = -st * dx + ct * dz;
  }
  return poly;
}

RealMat raster_mask(const Polyline& poly, int nx, int ny, double spacing,
                    double origin_x, double origin_z) {
  if (poly.size() < 3) throw ShapeError("raster_mask: polyline too short");
  RealMat mask(ny, nx);
  const size_t n = poly.size();
  for (int j = 0; j < ny; ++j) {
    const double pz = origin_z + (j + 0.5) * spacing;
    for (int i = 0; i < nx; ++i) {
      const double px = origin_x + (i + 0.5) * spacing;
      bool inside = false;
      for (size_t a = 0, b = n - 1; a < n; b = a++) {
        const double za = poly.z[a], zb = poly.z[b];
        if ((za > pz) == (zb > pz)) continue;
        const double xcross =
            poly.x[b] + (pz - zb) / (za - zb) * (poly.x[a] - poly.x[b]);
        if (px < xcross) inside = !inside;
      }
      if (inside) mask(j, i) = 1.0;
    }
  }
  return mask;
}

}  // namespace ndmd
