#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ndmd/dense.hpp"
#include "ndmd/trajectory.hpp"

namespace ndmd {

/// Truncated Karhunen-Loeve spectrum of a periodic 1D Gaussian random field.
struct GrfSpec {
  double mean = 0.0;
  int cutoff = 512;  // K, highest retained mode
  double gamma = 2.5;
  double tau = 7.0;
  double sigma = 49.0;
  uint64_t seed = 1;
};

/// Mode amplitude lambda_k = sqrt(2) |sigma| ((2 pi k)^2 + tau^2)^(-gamma/2).
double grf_lambda(const GrfSpec& spec, int k);

/// u0(x) = m + sum_k alpha_k cos(2 pi k (x - 1/2)) + beta_k sin(...) with
/// alpha_k, beta_k ~ N(0, lambda_k^2) drawn in k order from the seeded RNG.
std::vector<double> grf_sample(const GrfSpec& spec, const Grid& grid);

/// Viscous Burgers on a periodic interval, conservative pseudo-spectral
/// nonlinearity with 2/3 de-aliasing, ETDRK4 in time. Returns n_steps + 1
/// frames (t = 0 included). substeps = 0 picks an advective-CFL-safe count.
Trajectory burgers_simulate(const std::vector<double>& u0, double nu,
                            double horizon, int n_steps, const Grid& grid,
                            int substeps = 0);

/// Double shear layer initial condition.
struct ShearSpec {
  double separation = 0.3;  // s, layer distance
  double delta = 0.05;      // layer thickness
  double eps = 0.01;        // perturbation amplitude
  double u_max = 1.0;
  uint64_t noise_seed = 1;
};

/// Velocity field (u, w) of the two-tanh shear profile with the localized
/// sinusoidal perturbation and transverse Gaussian noise. Arrays are
/// nz x nx (row = z index).
void shear_velocity(const ShearSpec& spec, const Grid& grid, RealMat& u,
                    RealMat& w);

/// Initial vorticity w0 = dx w - dz u, derivatives taken spectrally.
RealMat shear_initial(const ShearSpec& spec, const Grid& grid);

/// 2D incompressible Navier-Stokes in vorticity form on a periodic box.
/// Velocity is recovered through the streamfunction Poisson solve; advection
/// is in divergence form (so circulation is conserved exactly), 2/3
/// de-aliased, ETDRK4 in time. Returns n_frames + 1 rows (t = 0 included).
Trajectory ns_vorticity_simulate(const RealMat& w0, double nu, double horizon,
                                 int n_frames, const Grid& grid,
                                 int substeps = 0);

/// Boundary handling per lattice side.
enum class SideMode { Periodic, Wall, Inlet, Outlet };

/// D2Q9 lattice-Boltzmann setup. All quantities in lattice units; the BGK
/// relaxation time is tau = 3 nu + 1/2.
struct LbmConfig {
  int nx = 201;
  int ny = 51;
  SideMode left = SideMode::Inlet;
  SideMode right = SideMode::Outlet;
  SideMode top = SideMode::Wall;
  SideMode bottom = SideMode::Wall;
  double u_in_x = 0.1;
  double u_in_y = 0.0;
  double nu = 0.01;
  double gx = 0.0;  // body force (validation scenarios)
  double gy = 0.0;
  RealMat solid;  // ny x nx occupancy, nonzero = solid; may be empty
  int frames = 200;
  int stride = 20;  // lattice steps per stored frame
  int warmup = 0;   // steps before the first stored frame
  int channel = 0;  // 0 = |u|, 1 = u_x, 2 = u_y, 3 = rho

  void validate() const;
};

/// Marks lattice sites within radius of (cx, cy) as solid.
void add_disc(LbmConfig& config, double cx, double cy, double radius);

struct LbmResult {
  Trajectory traj;  // one row per frame, ny*nx values of the chosen channel
  RealMat solid;    // occupancy actually used (1 = solid)
};

/// Collide-stream loop with half-way bounce-back solids/walls, equilibrium
/// Dirichlet inlet, zero-gradient outlet. Solid sites report channel value 0.
LbmResult lbm_simulate(const LbmConfig& config);

/// Class-Shape Transformation airfoil parameters.
struct CstParams {
  double a_u0 = 0.45;
  double a_u1 = 0.08;
  double a_l0 = -0.15;
  double a_l1 = -0.02;
  double t_e = 0.002;
  double theta_cw_deg = 0.0;
};

/// Closed curve; consecutive points are edges, last closes to first.
struct Polyline {
  std::vector<double> x, z;
  size_t size() const { return x.size(); }
};

/// Airfoil outline: class function x^0.5 (1-x), first-order Bernstein shape
/// functions, cosine-spaced x, trailing-edge thickness, then a clockwise
/// rotation about (0.5, 0). samples points per surface. Throws on a
/// self-intersecting parameter set.
Polyline cst_airfoil(const CstParams& params, int samples);

/// Occupancy of lattice sites whose centers fall inside the closed curve.
/// Site (i, j) sits at (origin_x + (i + 1/2) spacing, origin_z + (j + 1/2)
/// spacing); result is ny x nx.
RealMat raster_mask(const Polyline& poly, int nx, int ny, double spacing,
                    double origin_x, double origin_z);

/// Dataset generation options; zero fields keep the preset defaults.
struct BenchmarkOverrides {
  int codes = 0;
  int frames = 0;
  uint64_t seed = 0;
  int workers = 1;
};

/// Builds a named benchmark dataset. Presets: burgers-paper, burgers-narrow,
/// burgers-mini, double-shear-paper, double-shear-mini, karman-paper,
/// karman-mini, airfoil-paper, airfoil-mini.
TrajectorySet generate_benchmark(const std::string& preset,
                                 const BenchmarkOverrides& overrides = {});

}  // namespace ndmd
