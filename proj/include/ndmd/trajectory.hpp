#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ndmd/dense.hpp"

namespace ndmd {

/// Uniform tensor-product grid. dims are per-axis point counts; extents are
/// physical lengths; periodic axes wrap (the last point is not duplicated).
struct Grid {
  std::vector<int> dims;
  std::vector<double> extents;
  std::vector<bool> periodic;

  static Grid periodic_1d(int n, double length = 1.0) {
    return Grid{{n}, {length}, {true}};
  }
  static Grid periodic_2d(int nx, int nz, double lx, double lz) {
    return Grid{{nx, nz}, {lx, lz}, {true, true}};
  }

  int ndim() const { return static_cast<int>(dims.size()); }
  long cell_count() const {
    long n = 1;
    for (int d : dims) n *= d;
    return n;
  }
  void validate() const;
};

/// One simulated run: a frame per row (flattened field), uniform spacing dt
/// starting at t0, tagged with the physics-code vector that produced it.
/// solid flags lattice sites excluded from training and metrics (obstacles
/// move with the code, so the mask is per trajectory).
struct Trajectory {
  RealMat frames;
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> code;
  RealMat solid;  // occupancy (1 = solid), empty when no obstacle

  int frame_count() const { return frames.rows; }
  double time_of(int frame) const { return t0 + dt * frame; }
};

/// A benchmark dataset: trajectories over a code sweep plus the shared
/// geometry. items[0..n_train) are the training codes, the rest are held out.
struct TrajectorySet {
  std::string benchmark;
  std::vector<int> dims;
  std::vector<double> extents;
  int n_train = 0;
  uint64_t seed = 0;
  std::vector<Trajectory> items;

  bool has_mask() const {
    for (const Trajectory& t : items)
      if (t.solid.size() != 0) return true;
    return false;
  }
};

}  // namespace ndmd
