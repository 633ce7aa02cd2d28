#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "masm/errors.hpp"

namespace masm {

// Dimensions of a voxel lattice. Simulations use nz = 1 but all spatial code
// treats the lattice as 3D.
struct grid_dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  long voxels() const { return static_cast<long>(nx) * ny * nz; }
  bool operator==(const grid_dims&) const = default;
};

// Integer voxel coordinate.
struct voxel {
  int x = 0;
  int y = 0;
  int z = 0;
  bool operator==(const voxel&) const = default;
};

inline long voxel_index(const grid_dims& g, const voxel& v) {
  return static_cast<long>(v.x) + static_cast<long>(g.nx) * (static_cast<long>(v.y) + static_cast<long>(g.ny) * v.z);
}

inline voxel voxel_at(const grid_dims& g, long index) {
  voxel v;
  v.x = static_cast<int>(index % g.nx);
  index /= g.nx;
  v.y = static_cast<int>(index % g.ny);
  v.z = static_cast<int>(index / g.ny);
  return v;
}

inline bool in_bounds(const grid_dims& g, int x, int y, int z) {
  return x >= 0 && x < g.nx && y >= 0 && y < g.ny && z >= 0 && z < g.nz;
}

// 4D real-valued dataset: a time series per lattice voxel. Storage is
// time-fastest: value(t, v) lives at data[voxel_index(v) * T + t], matching the
// on-disk payload layout.
struct volume_series {
  grid_dims dims;
  int T = 0;
  double t_tr = 1.0;
  std::array<double, 3> spacing = {1.0, 1.0, 1.0};
  std::vector<double> data;

  volume_series() = default;
  volume_series(grid_dims d, int timepoints, double tr = 1.0)
      : dims(d), T(timepoints), t_tr(tr), data(static_cast<size_t>(d.voxels()) * timepoints, 0.0) {}

  double* series(long vox) { return data.data() + static_cast<size_t>(vox) * T; }
  const double* series(long vox) const { return data.data() + static_cast<size_t>(vox) * T; }

  double& at(long vox, int t) { return data[static_cast<size_t>(vox) * T + t]; }
  double at(long vox, int t) const { return data[static_cast<size_t>(vox) * T + t]; }
};

// Integer label per voxel; 0 is background, 1..K are active region groups.
// `area` carries a finer partition (individual shapes/circles), 0 background.
struct region_label_field {
  grid_dims dims;
  std::vector<int> labels;
  std::vector<int> area;

  int label_at(long vox) const { return labels[static_cast<size_t>(vox)]; }
};

}  // namespace masm
