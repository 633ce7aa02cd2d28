#pragma once

#include <cmath>
#include <vector>

#include "masm/mae.hpp"

namespace masm {

// Isotropic Gaussian presmoothing. FWHM is in voxel units unless a physical
// spacing is configured; the kernel is truncated at `truncation_sigmas` and
// renormalized over the in-volume support.
struct smoothing_spec {
  double fwhm = 3.2;
  double truncation_sigmas = 3.0;
  std::array<double, 3> spacing = {1.0, 1.0, 1.0};

  double sigma() const { return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }
};

inline volume_series gaussian_smooth(const volume_series& vol, const smoothing_spec& spec, int threads = 1) {
  if (!(spec.fwhm > 0.0)) throw config_error("gaussian_smooth: FWHM must be positive");
  const double sigma = spec.sigma();
  volume_series out(vol.dims, vol.T, vol.t_tr);
  out.spacing = vol.spacing;
  if (sigma < 0.1) {
    out.data = vol.data;
    return out;
  }

  struct tap {
    int dx, dy, dz;
    double w;
  };
  std::vector<tap> taps;
  const double radius = spec.truncation_sigmas * sigma;
  const int rx = static_cast<int>(std::floor(radius / spec.spacing[0]));
  const int ry = static_cast<int>(std::floor(radius / spec.spacing[1]));
  const int rz = static_cast<int>(std::floor(radius / spec.spacing[2]));
  for (int dz = -rz; dz <= rz; ++dz)
    for (int dy = -ry; dy <= ry; ++dy)
      for (int dx = -rx; dx <= rx; ++dx) {
        const double d2 = dx * spec.spacing[0] * dx * spec.spacing[0] + dy * spec.spacing[1] * dy * spec.spacing[1] +
                          dz * spec.spacing[2] * dz * spec.spacing[2];
        if (d2 > radius * radius) continue;
        taps.push_back({dx, dy, dz, std::exp(-0.5 * d2 / (sigma * sigma))});
      }

  const long n = vol.dims.voxels();
  parallel_for(0, n, threads, [&](long v) {
    const voxel c = voxel_at(vol.dims, v);
    double wsum = 0.0;
    for (const auto& t : taps) {
      if (in_bounds(vol.dims, c.x + t.dx, c.y + t.dy, c.z + t.dz)) wsum += t.w;
    }
    double* dst = out.series(v);
    for (const auto& t : taps) {
      const int x = c.x + t.dx, y = c.y + t.dy, z = c.z + t.dz;
      if (!in_bounds(vol.dims, x, y, z)) continue;
      const double w = t.w / wsum;
      const double* src = vol.series(voxel_index(vol.dims, {x, y, z}));
      for (int tt = 0; tt < vol.T; ++tt) dst[tt] += w * src[tt];
    }
  });
  return out;
}

// Voxelwise frequency-domain estimator: the degenerate form of the adaptive
// procedure with h = 0, similarity kernel off, and a single fixed frequency
// radius. Multiple stimuli are handled by backfitting; there is no spatial
// pooling, adaptation, or stop test.
inline mae_result voxelwise_estimate(const volume_series& data, const std::vector<stimulus_series>& stimuli,
                                     double r, const mae_options& options = {}) {
  check_mae_inputs(data, stimuli);
  if (!(r > 0.0)) throw config_error("voxelwise_estimate: frequency radius must be positive");
  // A fixed-radius initialization is exactly the degenerate estimator.
  scale_schedule sched = build_schedule(1.125, 1e-9, r, 2, 1, 0.05);
  const spectral_field phi_y = dft_volume(data);
  std::vector<spectrum> phi_x;
  phi_x.reserve(stimuli.size());
  for (const auto& s : stimuli) phi_x.push_back(dft(s.values));
  mae_engine engine(phi_y, std::move(phi_x), sched, options);
  engine.initialize();

  mae_result res;
  const long n = data.dims.voxels();
  for (int j = 0; j < static_cast<int>(stimuli.size()); ++j) {
    hrf_field field;
    field.phi = spectral_field(data.dims, data.T, spectral_role::hrf_estimate);
    field.h = volume_series(data.dims, data.T, data.t_tr);
    field.h.spacing = data.spacing;
    field.stop_iteration.assign(static_cast<size_t>(n), 0);
    const spectral_field& est = engine.estimate(j);
    std::mutex imag_mutex;
    parallel_for(0, n, options.threads, [&](long v) {
      spectrum spec(data.T);
      const cplx* row = est.row(v);
      std::copy(row, row + data.T, spec.coeff.begin());
      spectrum sym = hermitian_symmetrize(spec);
      std::copy(sym.coeff.begin(), sym.coeff.end(), field.phi.row(v));
      std::copy(est.var_row(v), est.var_row(v) + data.T, field.phi.var_row(v));
      double local_imag = 0.0;
      auto h = options.tapered_inverse ? tapered_inverse(sym, &local_imag) : idft(sym, &local_imag);
      std::copy(h.begin(), h.end(), field.h.series(v));
      std::lock_guard<std::mutex> lock(imag_mutex);
      res.diag.max_imag = std::max(res.diag.max_imag, local_imag);
    });
    res.stimuli.push_back(std::move(field));
  }
  res.diag.backfit_sweeps = engine.diagnostics().backfit_sweeps;
  res.diag.backfit_converged = engine.diagnostics().backfit_converged;
  return res;
}

// Terminal frequency bandwidth of the reference schedule, used as the default
// fixed radius for the voxelwise comparator.
inline double default_voxelwise_radius(int T) { return 5.0 / T + 15.0 / T; }

}  // namespace masm
