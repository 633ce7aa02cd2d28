#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "masm/errors.hpp"
#include "masm/grid.hpp"
#include "masm/kernels.hpp"
#include "masm/spectral.hpp"

namespace masm {

// Kernel functions used for weight construction. Both must be 1 at 0,
// non-negative, non-increasing, and vanish beyond 1.
struct kernel_pair {
  double (*loc)(double) = &kernel_loc;
  double (*st)(double) = &kernel_st;
};

// A frequency-spatial neighborhood B(d, h) x I(f, r) around the estimation
// site. Distances are Euclidean in voxel-index units scaled by `spacing`;
// frequencies are in cycles/sample.
struct neighborhood_spec {
  voxel center;
  double h = 0.0;
  double f = 0.0;
  double r = 0.0;
  std::array<double, 3> spacing = {1.0, 1.0, 1.0};
};

struct weight_entry {
  long vox = 0;
  int k = 0;
  double w = 0.0;
};

// Normalized adaptive weights supported in B(d, h) x I(f, r).
struct weight_set {
  std::vector<weight_entry> entries;
  bool fallback_used = false;

  double sum() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.w;
    return s;
  }
};

// Voxel offsets within Euclidean radius h together with the localization
// kernel value at each offset. Enumeration order is fixed (z, then y, then x
// ascending) so downstream sums are deterministic.
struct ball_offset {
  int dx, dy, dz;
  double w_loc;
};

inline std::vector<ball_offset> make_ball(double h, const std::array<double, 3>& spacing,
                                          const kernel_pair& kernels = {}) {
  std::vector<ball_offset> out;
  if (h <= 0.0) {
    out.push_back({0, 0, 0, 1.0});
    return out;
  }
  const int rx = static_cast<int>(std::floor(h / spacing[0]));
  const int ry = static_cast<int>(std::floor(h / spacing[1]));
  const int rz = static_cast<int>(std::floor(h / spacing[2]));
  for (int dz = -rz; dz <= rz; ++dz)
    for (int dy = -ry; dy <= ry; ++dy)
      for (int dx = -rx; dx <= rx; ++dx) {
        const double dist = std::sqrt(dx * spacing[0] * dx * spacing[0] + dy * spacing[1] * dy * spacing[1] +
                                      dz * spacing[2] * dz * spacing[2]);
        if (dist > h) continue;
        const double w = kernels.loc(dist / h);
        out.push_back({dx, dy, dz, w});
      }
  return out;
}

// Frequency indices k with f_k = k/T inside the open interval (f - r, f + r),
// clipped to the grid 0..T-1 (no wrap-around).
inline void frequency_window(double f, double r, int T, int& k_lo, int& k_hi) {
  k_lo = static_cast<int>(std::ceil((f - r) * T));
  k_hi = static_cast<int>(std::floor((f + r) * T));
  while (std::abs(k_lo / static_cast<double>(T) - f) >= r) ++k_lo;
  while (std::abs(k_hi / static_cast<double>(T) - f) >= r) --k_hi;
  k_lo = std::max(k_lo, 0);
  k_hi = std::min(k_hi, T - 1);
}

// Floor applied to the similarity-kernel scale: 1e-3 times the median of
// sqrt(Var) over the volume at one frequency.
inline double variance_floor_at(const spectral_field& prev, int k) {
  const long n = prev.dims.voxels();
  std::vector<double> sds(static_cast<size_t>(n));
  for (long v = 0; v < n; ++v) sds[static_cast<size_t>(v)] = std::sqrt(std::max(0.0, prev.var_row(v)[k]));
  auto mid = sds.begin() + sds.size() / 2;
  std::nth_element(sds.begin(), mid, sds.end());
  double med = *mid;
  if (sds.size() % 2 == 0) {
    auto lower = std::max_element(sds.begin(), mid);
    med = 0.5 * (med + *lower);
  }
  return 1e-3 * med;
}

// Similarity factor K_st(|delta| / sd). A zero scale degenerates to an
// indicator of exact equality (the limit of the kernel as sd -> 0+).
inline double similarity_factor(const cplx& a, const cplx& b, double sd, const kernel_pair& kernels) {
  const double dre = a.real() - b.real();
  const double dim = a.imag() - b.imag();
  const double d2 = dre * dre + dim * dim;
  if (sd <= 0.0) return d2 == 0.0 ? 1.0 : 0.0;
  const double x2 = d2 / (sd * sd);
  if (x2 >= 1.0) return 0.0;
  return kernels.st(std::sqrt(x2));
}

// Adaptive weights at (f, d) built from the previous-iteration estimate field
// (Eq-14 style product of two localization kernels and the similarity kernel),
// normalized to sum 1. `sd_floor < 0` recomputes the floor from `prev`.
inline weight_set compute_weights(const spectral_field& prev, const neighborhood_spec& spec,
                                  const kernel_pair& kernels = {}, double sd_floor = -1.0) {
  const int T = prev.T;
  const long center = voxel_index(prev.dims, spec.center);
  const int k0 = static_cast<int>(std::lround(spec.f * T));
  if (k0 < 0 || k0 >= T) throw config_error("compute_weights: center frequency off the grid");
  if (spec.r <= 0.0) throw config_error("compute_weights: frequency radius must be positive");

  if (sd_floor < 0.0) sd_floor = variance_floor_at(prev, k0);
  const double sd = std::max(std::sqrt(std::max(0.0, prev.var_row(center)[k0])), sd_floor);
  const cplx center_est = prev.row(center)[k0];

  int k_lo = 0, k_hi = 0;
  frequency_window(spec.f, spec.r, T, k_lo, k_hi);

  weight_set out;
  double total = 0.0;
  for (const auto& off : make_ball(spec.h, spec.spacing, kernels)) {
    const int x = spec.center.x + off.dx;
    const int y = spec.center.y + off.dy;
    const int z = spec.center.z + off.dz;
    if (!in_bounds(prev.dims, x, y, z)) continue;
    const long vox = voxel_index(prev.dims, {x, y, z});
    const cplx* row = prev.row(vox);
    for (int k = k_lo; k <= k_hi; ++k) {
      const double wf = kernels.loc(std::abs(spec.f - k / static_cast<double>(T)) / spec.r);
      double w = off.w_loc * wf;
      if (w > 0.0) w *= similarity_factor(center_est, row[k], sd, kernels);
      if (w > 0.0) {
        out.entries.push_back({vox, k, w});
        total += w;
      }
    }
  }

  if (total <= 0.0) {
    // No information survived the kernels; keep the center site.
    out.entries.clear();
    int nearest = std::clamp(k0, k_lo, k_hi);
    out.entries.push_back({center, nearest, 1.0});
    out.fallback_used = true;
    return out;
  }
  for (auto& e : out.entries) e.w /= total;
  return out;
}

// Weighted least-squares update of phi_H at one site:
//   phi_H = sum w * conj(phi_X(f_k)) * phi_Y(f_k, d') / sum w * |phi_X(f_k)|^2.
inline cplx wls_update(const weight_set& weights, const spectral_field& phi_y, const spectrum& phi_x, int k0,
                       long vox) {
  cplx num{0.0, 0.0};
  double den = 0.0;
  for (const auto& e : weights.entries) {
    const cplx x = phi_x[e.k];
    num += e.w * std::conj(x) * phi_y.row(e.vox)[e.k];
    den += e.w * std::norm(x);
  }
  if (den <= 0.0)
    throw singular_design_error("wls_update: stimulus has no energy on the weighted frequencies", k0, vox);
  return num / den;
}

// Residual spectrum per voxel: phi_eps = phi_Y - sum_j phi_Hj * phi_Xj.
inline spectral_field residual_field(const spectral_field& phi_y, const std::vector<const spectral_field*>& phi_h,
                                     const std::vector<const spectrum*>& phi_x) {
  spectral_field out(phi_y.dims, phi_y.T, spectral_role::residual);
  const long n = phi_y.dims.voxels();
  for (long v = 0; v < n; ++v) {
    const cplx* yrow = phi_y.row(v);
    cplx* orow = out.row(v);
    for (int k = 0; k < phi_y.T; ++k) {
      cplx acc = yrow[k];
      for (size_t j = 0; j < phi_h.size(); ++j) acc -= phi_h[j]->row(v)[k] * (*phi_x[j])[k];
      orow[k] = acc;
    }
  }
  return out;
}

inline spectral_field residual_field(const spectral_field& phi_y, const spectral_field& phi_h,
                                     const spectrum& phi_x) {
  return residual_field(phi_y, std::vector<const spectral_field*>{&phi_h}, std::vector<const spectrum*>{&phi_x});
}

// Variance approximation for the WLS estimate. The inner sum over voxels is
// taken before the squared modulus; the outer sum over frequencies after
// (cross-frequency terms dropped).
inline double variance_update(const weight_set& weights, const spectrum& phi_x, const spectral_field& residuals,
                              int k0, long vox) {
  // Group entries by frequency. Windows are contiguous, so index by k.
  int k_min = residuals.T, k_max = -1;
  for (const auto& e : weights.entries) {
    k_min = std::min(k_min, e.k);
    k_max = std::max(k_max, e.k);
  }
  if (k_max < k_min)
    throw singular_design_error("variance_update: empty weight set", k0, vox);
  std::vector<cplx> inner(static_cast<size_t>(k_max - k_min + 1), cplx{0.0, 0.0});
  double den = 0.0;
  for (const auto& e : weights.entries) {
    const cplx x = phi_x[e.k];
    inner[static_cast<size_t>(e.k - k_min)] += e.w * std::conj(x) * residuals.row(e.vox)[e.k];
    den += e.w * std::norm(x);
  }
  if (den <= 0.0)
    throw singular_design_error("variance_update: stimulus has no energy on the weighted frequencies", k0, vox);
  double num = 0.0;
  for (const cplx& c : inner) num += std::norm(c);
  return num / (den * den);
}

}  // namespace masm
