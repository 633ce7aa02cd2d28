#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <vector>

#include "masm/estimator.hpp"
#include "masm/grid.hpp"
#include "masm/neyman.hpp"
#include "masm/parallel.hpp"
#include "masm/phantom.hpp"
#include "masm/spectral.hpp"

namespace masm {

// Paired scale sequences: spatial radii h_l = c_h^l grow geometrically from
// h_0 = 0, frequency radii r_l = r_{l-1} + b_r grow linearly from r_0.
struct scale_schedule {
  double c_h = 1.125;
  double b_r = 0.0;
  double r_0 = 0.0;
  int S = 15;
  int S_0 = 2;
  double alpha = 0.05;
  std::vector<double> h;  // h[0..S]
  std::vector<double> r;  // r[0..S]
};

inline scale_schedule build_schedule(double c_h, double b_r, double r_0, int S, int S_0, double alpha) {
  if (!(c_h > 1.0 && c_h < 2.0)) throw config_error("build_schedule: c_h must lie in (1, 2)");
  if (!(b_r > 0.0)) throw config_error("build_schedule: b_r must be positive");
  if (!(r_0 > 0.0)) throw config_error("build_schedule: r_0 must be positive");
  if (!(S_0 > 0 && S_0 < S)) throw config_error("build_schedule: require 0 < S_0 < S");
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("build_schedule: alpha must lie in (0, 1)");
  scale_schedule s;
  s.c_h = c_h;
  s.b_r = b_r;
  s.r_0 = r_0;
  s.S = S;
  s.S_0 = S_0;
  s.alpha = alpha;
  s.h.resize(static_cast<size_t>(S) + 1);
  s.r.resize(static_cast<size_t>(S) + 1);
  s.h[0] = 0.0;
  s.r[0] = r_0;
  for (int l = 1; l <= S; ++l) {
    s.h[static_cast<size_t>(l)] = std::pow(c_h, l);
    s.r[static_cast<size_t>(l)] = s.r[static_cast<size_t>(l - 1)] + b_r;
  }
  return s;
}

// Reference parameters: c_h = 1.125, b_r = 1/T, r_0 = 5/T, S = 15, S_0 = 2,
// alpha = 0.05.
inline scale_schedule default_schedule(int T) {
  return build_schedule(1.125, 1.0 / T, 5.0 / T, 15, 2, 0.05);
}

struct mae_options {
  int threads = 1;
  std::array<double, 3> spacing = {1.0, 1.0, 1.0};
  bool tapered_inverse = true;  // final reporting uses the tapered inverse
  kernel_pair kernels;
};

struct mae_diagnostics {
  long fallback_voxels = 0;
  double max_imag = 0.0;
  int backfit_sweeps = 0;
  bool backfit_converged = true;
};

// Per-stimulus output: time-domain HRFs, final (symmetrized) coefficients
// with variances, and the iteration at which each voxel stopped.
struct hrf_field {
  volume_series h;
  spectral_field phi;
  std::vector<int> stop_iteration;
};

struct mae_result {
  std::vector<hrf_field> stimuli;
  mae_diagnostics diag;
};

namespace detail {

struct stim_tables {
  std::vector<double> conj_re, conj_im, abs2;
};

inline stim_tables make_stim_tables(const spectrum& x) {
  stim_tables t;
  const int T = x.T;
  t.conj_re.resize(static_cast<size_t>(T));
  t.conj_im.resize(static_cast<size_t>(T));
  t.abs2.resize(static_cast<size_t>(T));
  for (int k = 0; k < T; ++k) {
    t.conj_re[static_cast<size_t>(k)] = x[k].real();
    t.conj_im[static_cast<size_t>(k)] = -x[k].imag();
    t.abs2[static_cast<size_t>(k)] = std::norm(x[k]);
  }
  return t;
}

// Frequency localization factors K_loc(|k - k0| / (T r)) for offsets 0..M.
struct freq_window {
  int M = 0;
  std::vector<double> w;
};

inline freq_window make_freq_window(double r, int T, const kernel_pair& kernels) {
  const double r_eff = std::min(r, 0.5);
  freq_window fw;
  fw.M = std::min(T - 1, static_cast<int>(std::floor(r_eff * T)));
  fw.w.resize(static_cast<size_t>(fw.M) + 1);
  for (int m = 0; m <= fw.M; ++m) fw.w[static_cast<size_t>(m)] = kernels.loc(m / (T * r_eff));
  return fw;
}

inline std::vector<double> sd_floors(const spectral_field& field, long n_vox, int T) {
  std::vector<double> floors(static_cast<size_t>(T), 0.0);
  std::vector<double> sds(static_cast<size_t>(n_vox));
  for (int k = 0; k < T; ++k) {
    for (long v = 0; v < n_vox; ++v) sds[static_cast<size_t>(v)] = std::sqrt(std::max(0.0, field.var_row(v)[k]));
    auto mid = sds.begin() + sds.size() / 2;
    std::nth_element(sds.begin(), mid, sds.end());
    double med = *mid;
    if (sds.size() % 2 == 0) {
      auto lower = std::max_element(sds.begin(), mid);
      med = 0.5 * (med + *lower);
    }
    floors[static_cast<size_t>(k)] = 1e-3 * med;
  }
  return floors;
}

// Records the first singular-design site seen across worker threads.
struct error_collector {
  std::mutex mutex;
  std::exception_ptr first;

  void store(std::exception_ptr e) {
    std::lock_guard<std::mutex> lock(mutex);
    if (!first) first = e;
  }
  void rethrow_if_any() {
    if (first) std::rethrow_exception(first);
  }
};

}  // namespace detail

// The multiscale adaptive estimation engine. A single code path serves one or
// many stimuli; the single-stimulus entry points delegate to it, which makes
// the m = 1 reduction exact by construction.
class mae_engine {
public:
  mae_engine(const spectral_field& phi_y, std::vector<spectrum> phi_x, const scale_schedule& schedule,
             const mae_options& options)
      : phi_y_(phi_y),
        phi_x_(std::move(phi_x)),
        schedule_(schedule),
        options_(options),
        dims_(phi_y.dims),
        T_(phi_y.T),
        n_(phi_y.dims.voxels()),
        m_(static_cast<int>(phi_x_.size())) {
    if (m_ < 1) throw config_error("mae: at least one stimulus required");
    for (const auto& x : phi_x_) {
      if (x.T != T_) throw config_error("mae: stimulus length must match data length");
    }
    for (int j = 0; j < m_; ++j) tables_.push_back(detail::make_stim_tables(phi_x_[static_cast<size_t>(j)]));
  }

  mae_result run() {
    initialize();
    const double crit = neyman_critical_value(2 * T_, schedule_.alpha);
    for (int l = 1; l <= schedule_.S; ++l) {
      iterate(l, crit);
      if (all_frozen()) break;
    }
    return finalize();
  }

  // Exposed for the initialization-only operations and tests.
  void initialize() {
    est_.assign(static_cast<size_t>(m_), spectral_field(dims_, T_, spectral_role::hrf_estimate));
    est_next_.assign(static_cast<size_t>(m_), spectral_field(dims_, T_, spectral_role::hrf_estimate));
    frozen_.assign(static_cast<size_t>(m_), std::vector<char>(static_cast<size_t>(n_), 0));
    stop_iter_.assign(static_cast<size_t>(m_), std::vector<int>(static_cast<size_t>(n_), schedule_.S));

    const detail::freq_window fw = detail::make_freq_window(schedule_.r_0, T_, options_.kernels);

    // Backfitting sweeps on partial residuals until the estimates settle.
    int sweep = 0;
    double change = 0.0;
    for (sweep = 1; sweep <= kMaxBackfitSweeps; ++sweep) {
      change = 0.0;
      for (int j = 0; j < m_; ++j) {
        const spectral_field* target = make_target(j, est_, init_scratch_);
        double sup = 0.0;
        std::mutex sup_mutex;
        detail::error_collector errors;
        parallel_for(0, n_, options_.threads, [&](long v) {
          try {
            double local = 0.0;
            const cplx* trow = target->row(v);
            cplx* erow = est_[static_cast<size_t>(j)].row(v);
            for (int k0 = 0; k0 < T_; ++k0) {
              const cplx updated = init_site(j, trow, k0, v, fw);
              local = std::max(local, std::abs(updated - erow[k0]));
              erow[k0] = updated;
            }
            std::lock_guard<std::mutex> lock(sup_mutex);
            sup = std::max(sup, local);
          } catch (...) {
            errors.store(std::current_exception());
          }
        });
        errors.rethrow_if_any();
        change = std::max(change, sup);
      }
      if (m_ == 1 || change < kBackfitTol) break;
    }
    diag_.backfit_sweeps = std::min(sweep, kMaxBackfitSweeps);
    diag_.backfit_converged = m_ == 1 || change < kBackfitTol;

    // Variances at the initial scale, from the full-model residuals.
    compute_residuals(est_);
    for (int j = 0; j < m_; ++j) {
      detail::error_collector errors;
      parallel_for(0, n_, options_.threads, [&](long v) {
        try {
          const cplx* rrow = resid_.row(v);
          double* vrow = est_[static_cast<size_t>(j)].var_row(v);
          for (int k0 = 0; k0 < T_; ++k0) vrow[k0] = init_variance_site(j, rrow, k0, v, fw);
        } catch (...) {
          errors.store(std::current_exception());
        }
      });
      errors.rethrow_if_any();
    }
  }

  const spectral_field& estimate(int j) const { return est_[static_cast<size_t>(j)]; }
  const mae_diagnostics& diagnostics() const { return diag_; }

private:
  static constexpr int kMaxBackfitSweeps = 50;
  static constexpr double kBackfitTol = 1e-8;

  // One WLS update at the initial scale: h = 0, frequency kernel only.
  cplx init_site(int j, const cplx* target_row, int k0, long v, const detail::freq_window& fw) const {
    const auto& tab = tables_[static_cast<size_t>(j)];
    const int k_lo = std::max(0, k0 - fw.M);
    const int k_hi = std::min(T_ - 1, k0 + fw.M);
    double num_re = 0.0, num_im = 0.0, den = 0.0;
    for (int k = k_lo; k <= k_hi; ++k) {
      const double w = fw.w[static_cast<size_t>(std::abs(k - k0))];
      if (w <= 0.0) continue;
      const double cre = tab.conj_re[static_cast<size_t>(k)];
      const double cim = tab.conj_im[static_cast<size_t>(k)];
      const double tre = target_row[k].real();
      const double tim = target_row[k].imag();
      num_re += w * (cre * tre - cim * tim);
      num_im += w * (cre * tim + cim * tre);
      den += w * tab.abs2[static_cast<size_t>(k)];
    }
    if (den <= 0.0)
      throw singular_design_error("mae: stimulus has no energy on the weighted frequencies", k0, v);
    return {num_re / den, num_im / den};
  }

  double init_variance_site(int j, const cplx* resid_row, int k0, long v, const detail::freq_window& fw) const {
    const auto& tab = tables_[static_cast<size_t>(j)];
    const int k_lo = std::max(0, k0 - fw.M);
    const int k_hi = std::min(T_ - 1, k0 + fw.M);
    double num = 0.0, den = 0.0;
    for (int k = k_lo; k <= k_hi; ++k) {
      const double w = fw.w[static_cast<size_t>(std::abs(k - k0))];
      if (w <= 0.0) continue;
      const double cre = tab.conj_re[static_cast<size_t>(k)];
      const double cim = tab.conj_im[static_cast<size_t>(k)];
      const double rre = resid_row[k].real();
      const double rim = resid_row[k].imag();
      const double ire = w * (cre * rre - cim * rim);
      const double iim = w * (cre * rim + cim * rre);
      num += ire * ire + iim * iim;
      den += w * tab.abs2[static_cast<size_t>(k)];
    }
    if (den <= 0.0)
      throw singular_design_error("mae: stimulus has no energy on the weighted frequencies", k0, v);
    return num / (den * den);
  }

  // Partial residual target phi_Y[-j] = phi_Y - sum_{j' != j} est_{j'} phi_{Xj'}.
  // For a single stimulus the target is phi_Y itself.
  const spectral_field* make_target(int j, const std::vector<spectral_field>& est, spectral_field& scratch) const {
    if (m_ == 1) return &phi_y_;
    if (scratch.T != T_ || scratch.dims.voxels() != n_) scratch = spectral_field(dims_, T_, spectral_role::signal);
    for (long v = 0; v < n_; ++v) {
      const cplx* yrow = phi_y_.row(v);
      cplx* srow = scratch.row(v);
      for (int k = 0; k < T_; ++k) {
        cplx acc = yrow[k];
        for (int j2 = 0; j2 < m_; ++j2) {
          if (j2 == j) continue;
          acc -= est[static_cast<size_t>(j2)].row(v)[k] * phi_x_[static_cast<size_t>(j2)][k];
        }
        srow[k] = acc;
      }
    }
    return &scratch;
  }

  void compute_residuals(const std::vector<spectral_field>& est) {
    if (resid_.T != T_ || resid_.dims.voxels() != n_) resid_ = spectral_field(dims_, T_, spectral_role::residual);
    for (long v = 0; v < n_; ++v) {
      const cplx* yrow = phi_y_.row(v);
      cplx* rrow = resid_.row(v);
      for (int k = 0; k < T_; ++k) {
        cplx acc = yrow[k];
        for (int j = 0; j < m_; ++j) acc -= est[static_cast<size_t>(j)].row(v)[k] * phi_x_[static_cast<size_t>(j)][k];
        rrow[k] = acc;
      }
    }
  }

  void iterate(int l, double crit) {
    const double h_l = schedule_.h[static_cast<size_t>(l)];
    const double r_l = schedule_.r[static_cast<size_t>(l)];
    const auto ball = make_ball(h_l, options_.spacing, options_.kernels);
    const detail::freq_window fw = detail::make_freq_window(r_l, T_, options_.kernels);

    std::vector<std::vector<double>> floors(static_cast<size_t>(m_));
    for (int j = 0; j < m_; ++j) floors[static_cast<size_t>(j)] = detail::sd_floors(est_[static_cast<size_t>(j)], n_, T_);

    // Estimation pass: new coefficients for every active voxel.
    for (int j = 0; j < m_; ++j) {
      const spectral_field* target = make_target(j, est_, iter_scratch_);
      const spectral_field& prev = est_[static_cast<size_t>(j)];
      spectral_field& next = est_next_[static_cast<size_t>(j)];
      const auto& floor_j = floors[static_cast<size_t>(j)];
      detail::error_collector errors;
      parallel_for(0, n_, options_.threads, [&](long v) {
        try {
          cplx* nrow = next.row(v);
          if (frozen_[static_cast<size_t>(j)][static_cast<size_t>(v)]) {
            const cplx* prow = prev.row(v);
            std::copy(prow, prow + T_, nrow);
            return;
          }
          update_voxel(j, *target, prev, floor_j, ball, fw, v, nrow);
        } catch (...) {
          errors.store(std::current_exception());
        }
      });
      errors.rethrow_if_any();
    }

    // Residuals from the freshly estimated coefficients of all stimuli.
    compute_residuals(est_next_);

    // Variance pass with the same weights (recomputed from the previous field).
    for (int j = 0; j < m_; ++j) {
      const spectral_field& prev = est_[static_cast<size_t>(j)];
      spectral_field& next = est_next_[static_cast<size_t>(j)];
      const auto& floor_j = floors[static_cast<size_t>(j)];
      detail::error_collector errors;
      parallel_for(0, n_, options_.threads, [&](long v) {
        try {
          double* vrow = next.var_row(v);
          if (frozen_[static_cast<size_t>(j)][static_cast<size_t>(v)]) {
            const double* prow = prev.var_row(v);
            std::copy(prow, prow + T_, vrow);
            return;
          }
          variance_voxel(j, prev, floor_j, ball, fw, v, vrow);
        } catch (...) {
          errors.store(std::current_exception());
        }
      });
      errors.rethrow_if_any();
    }

    // Stop checking: compare the new and previous coefficient vectors; on a
    // significant difference freeze the voxel at its previous estimate.
    if (l >= schedule_.S_0) {
      for (int j = 0; j < m_; ++j) {
        const auto cur_floors = detail::sd_floors(est_next_[static_cast<size_t>(j)], n_, T_);
        const spectral_field& prev = est_[static_cast<size_t>(j)];
        spectral_field& next = est_next_[static_cast<size_t>(j)];
        parallel_for(0, n_, options_.threads, [&](long v) {
          if (frozen_[static_cast<size_t>(j)][static_cast<size_t>(v)]) return;
          std::vector<double> z(static_cast<size_t>(2 * T_));
          const cplx* crow = next.row(v);
          const cplx* prow = prev.row(v);
          const double* vrow = next.var_row(v);
          for (int k = 0; k < T_; ++k) {
            const double floor_sd = cur_floors[static_cast<size_t>(k)];
            const double var_eff = std::max(vrow[k], floor_sd * floor_sd);
            const cplx d = crow[k] - prow[k];
            if (var_eff > 0.0) {
              const double sd = std::sqrt(var_eff);
              z[static_cast<size_t>(k)] = d.real() / sd;
              z[static_cast<size_t>(T_ + k)] = d.imag() / sd;
            } else {
              z[static_cast<size_t>(k)] = d.real() == 0.0 ? 0.0 : kInfiniteZ;
              z[static_cast<size_t>(T_ + k)] = d.imag() == 0.0 ? 0.0 : kInfiniteZ;
            }
          }
          if (adaptive_neyman_statistic(z) > crit) {
            frozen_[static_cast<size_t>(j)][static_cast<size_t>(v)] = 1;
            stop_iter_[static_cast<size_t>(j)][static_cast<size_t>(v)] = l;
            std::copy(prow, prow + T_, next.row(v));
            const double* pvar = prev.var_row(v);
            std::copy(pvar, pvar + T_, next.var_row(v));
          }
        });
      }
    }

    for (int j = 0; j < m_; ++j) std::swap(est_[static_cast<size_t>(j)], est_next_[static_cast<size_t>(j)]);
  }

  void update_voxel(int j, const spectral_field& target, const spectral_field& prev,
                    const std::vector<double>& floor_j, const std::vector<ball_offset>& ball,
                    const detail::freq_window& fw, long v, cplx* out_row) const {
    const auto& tab = tables_[static_cast<size_t>(j)];
    const voxel center = voxel_at(dims_, v);
    const cplx* center_row = prev.row(v);
    const double* center_var = prev.var_row(v);

    for (int k0 = 0; k0 < T_; ++k0) {
      const double sd = std::max(std::sqrt(std::max(0.0, center_var[k0])), floor_j[static_cast<size_t>(k0)]);
      const double sd2 = sd * sd;
      const double c_re = center_row[k0].real();
      const double c_im = center_row[k0].imag();
      const int k_lo = std::max(0, k0 - fw.M);
      const int k_hi = std::min(T_ - 1, k0 + fw.M);
      double num_re = 0.0, num_im = 0.0, den = 0.0;

      for (const auto& off : ball) {
        const int x = center.x + off.dx;
        const int y = center.y + off.dy;
        const int zc = center.z + off.dz;
        if (!in_bounds(dims_, x, y, zc) || off.w_loc <= 0.0) continue;
        const long v2 = voxel_index(dims_, {x, y, zc});
        const cplx* prow = prev.row(v2);
        const cplx* trow = target.row(v2);
        for (int k = k_lo; k <= k_hi; ++k) {
          double w = off.w_loc * fw.w[static_cast<size_t>(std::abs(k - k0))];
          if (w <= 0.0) continue;
          const double dre = c_re - prow[k].real();
          const double dim = c_im - prow[k].imag();
          const double d2 = dre * dre + dim * dim;
          if (sd2 > 0.0) {
            if (d2 >= sd2) continue;
            w *= options_.kernels.st(std::sqrt(d2 / sd2));
          } else if (d2 != 0.0) {
            continue;
          }
          if (w <= 0.0) continue;
          const double cre = tab.conj_re[static_cast<size_t>(k)];
          const double cim = tab.conj_im[static_cast<size_t>(k)];
          const double tre = trow[k].real();
          const double tim = trow[k].imag();
          num_re += w * (cre * tre - cim * tim);
          num_im += w * (cre * tim + cim * tre);
          den += w * tab.abs2[static_cast<size_t>(k)];
        }
      }
      if (den <= 0.0)
        throw singular_design_error("mae: stimulus has no energy on the weighted frequencies", k0, v);
      out_row[k0] = {num_re / den, num_im / den};
    }
  }

  void variance_voxel(int j, const spectral_field& prev, const std::vector<double>& floor_j,
                      const std::vector<ball_offset>& ball, const detail::freq_window& fw, long v,
                      double* out_row) const {
    const auto& tab = tables_[static_cast<size_t>(j)];
    const voxel center = voxel_at(dims_, v);
    const cplx* center_row = prev.row(v);
    const double* center_var = prev.var_row(v);
    std::vector<double> inner_re(static_cast<size_t>(2 * fw.M + 1));
    std::vector<double> inner_im(static_cast<size_t>(2 * fw.M + 1));

    for (int k0 = 0; k0 < T_; ++k0) {
      const double sd = std::max(std::sqrt(std::max(0.0, center_var[k0])), floor_j[static_cast<size_t>(k0)]);
      const double sd2 = sd * sd;
      const double c_re = center_row[k0].real();
      const double c_im = center_row[k0].imag();
      const int k_lo = std::max(0, k0 - fw.M);
      const int k_hi = std::min(T_ - 1, k0 + fw.M);
      std::fill(inner_re.begin(), inner_re.end(), 0.0);
      std::fill(inner_im.begin(), inner_im.end(), 0.0);
      double den = 0.0;

      for (const auto& off : ball) {
        const int x = center.x + off.dx;
        const int y = center.y + off.dy;
        const int zc = center.z + off.dz;
        if (!in_bounds(dims_, x, y, zc) || off.w_loc <= 0.0) continue;
        const long v2 = voxel_index(dims_, {x, y, zc});
        const cplx* prow = prev.row(v2);
        const cplx* rrow = resid_.row(v2);
        for (int k = k_lo; k <= k_hi; ++k) {
          double w = off.w_loc * fw.w[static_cast<size_t>(std::abs(k - k0))];
          if (w <= 0.0) continue;
          const double dre = c_re - prow[k].real();
          const double dim = c_im - prow[k].imag();
          const double d2 = dre * dre + dim * dim;
          if (sd2 > 0.0) {
            if (d2 >= sd2) continue;
            w *= options_.kernels.st(std::sqrt(d2 / sd2));
          } else if (d2 != 0.0) {
            continue;
          }
          if (w <= 0.0) continue;
          const double cre = tab.conj_re[static_cast<size_t>(k)];
          const double cim = tab.conj_im[static_cast<size_t>(k)];
          const double rre = rrow[k].real();
          const double rim = rrow[k].imag();
          const size_t slot = static_cast<size_t>(k - k_lo);
          inner_re[slot] += w * (cre * rre - cim * rim);
          inner_im[slot] += w * (cre * rim + cim * rre);
          den += w * tab.abs2[static_cast<size_t>(k)];
        }
      }
      if (den <= 0.0)
        throw singular_design_error("mae: stimulus has no energy on the weighted frequencies", k0, v);
      double num = 0.0;
      for (int k = k_lo; k <= k_hi; ++k) {
        const size_t slot = static_cast<size_t>(k - k_lo);
        num += inner_re[slot] * inner_re[slot] + inner_im[slot] * inner_im[slot];
      }
      out_row[k0] = num / (den * den);
    }
  }

  bool all_frozen() const {
    for (int j = 0; j < m_; ++j)
      for (long v = 0; v < n_; ++v)
        if (!frozen_[static_cast<size_t>(j)][static_cast<size_t>(v)]) return false;
    return true;
  }

  mae_result finalize() {
    mae_result res;
    res.stimuli.reserve(static_cast<size_t>(m_));
    std::mutex imag_mutex;
    for (int j = 0; j < m_; ++j) {
      hrf_field field;
      field.phi = spectral_field(dims_, T_, spectral_role::hrf_estimate);
      field.h = volume_series(dims_, T_);
      field.stop_iteration = stop_iter_[static_cast<size_t>(j)];
      const spectral_field& final_est = est_[static_cast<size_t>(j)];
      parallel_for(0, n_, options_.threads, [&](long v) {
        spectrum spec(T_);
        const cplx* row = final_est.row(v);
        std::copy(row, row + T_, spec.coeff.begin());
        spectrum sym = hermitian_symmetrize(spec);
        cplx* out = field.phi.row(v);
        std::copy(sym.coeff.begin(), sym.coeff.end(), out);
        const double* var_in = final_est.var_row(v);
        std::copy(var_in, var_in + T_, field.phi.var_row(v));
        double local_imag = 0.0;
        auto h = options_.tapered_inverse ? tapered_inverse(sym, &local_imag) : idft(sym, &local_imag);
        std::copy(h.begin(), h.end(), field.h.series(v));
        std::lock_guard<std::mutex> lock(imag_mutex);
        diag_.max_imag = std::max(diag_.max_imag, local_imag);
      });
      res.stimuli.push_back(std::move(field));
    }
    res.diag = diag_;
    return res;
  }

  static constexpr double kInfiniteZ = 1e15;

  const spectral_field& phi_y_;
  std::vector<spectrum> phi_x_;
  scale_schedule schedule_;
  mae_options options_;
  grid_dims dims_;
  int T_;
  long n_;
  int m_;
  std::vector<detail::stim_tables> tables_;
  std::vector<spectral_field> est_, est_next_;
  spectral_field resid_;
  spectral_field init_scratch_, iter_scratch_;
  std::vector<std::vector<char>> frozen_;
  std::vector<std::vector<int>> stop_iter_;
  mae_diagnostics diag_;
};

// Initial estimate for one stimulus: per-voxel WLS with h = 0 and
// frequency-kernel weights at radius r_0, then the matching variances.
inline spectral_field initialize_single(const spectral_field& phi_y, const spectrum& phi_x,
                                        const scale_schedule& schedule, const mae_options& options = {}) {
  mae_engine engine(phi_y, {phi_x}, schedule, options);
  engine.initialize();
  return engine.estimate(0);
}

// Backfitting initialization for multiple stimuli: cyclic sweeps of
// single-stimulus initial fits on partial residuals until estimates settle.
inline std::vector<spectral_field> backfit_init(const spectral_field& phi_y, const std::vector<spectrum>& phi_x,
                                                const scale_schedule& schedule, const mae_options& options = {},
                                                mae_diagnostics* diag_out = nullptr) {
  mae_engine engine(phi_y, phi_x, schedule, options);
  engine.initialize();
  std::vector<spectral_field> out;
  out.reserve(phi_x.size());
  for (int j = 0; j < static_cast<int>(phi_x.size()); ++j) out.push_back(engine.estimate(j));
  if (diag_out) *diag_out = engine.diagnostics();
  return out;
}

// Partial residual phi_Y[-j] given current estimates of the other stimuli.
inline spectral_field residual_target(const spectral_field& phi_y, const std::vector<spectral_field>& estimates,
                                      const std::vector<spectrum>& phi_x, int j) {
  spectral_field out(phi_y.dims, phi_y.T, spectral_role::signal);
  const long n = phi_y.dims.voxels();
  for (long v = 0; v < n; ++v) {
    const cplx* yrow = phi_y.row(v);
    cplx* orow = out.row(v);
    for (int k = 0; k < phi_y.T; ++k) {
      cplx acc = yrow[k];
      for (int j2 = 0; j2 < static_cast<int>(estimates.size()); ++j2) {
        if (j2 == j) continue;
        acc -= estimates[static_cast<size_t>(j2)].row(v)[k] * phi_x[static_cast<size_t>(j2)][k];
      }
      orow[k] = acc;
    }
  }
  return out;
}

inline void check_mae_inputs(const volume_series& data, const std::vector<stimulus_series>& stimuli) {
  if (data.T < 16) throw config_error("mae: need at least 16 time points");
  for (const auto& s : stimuli) {
    if (s.length() != data.T) throw config_error("mae: stimulus length must equal data length");
    double total = 0.0;
    for (double v : s.values) total += v;
    if (total <= 0.0) throw config_error("mae: stimulus has no events");
  }
}

// Full multiscale adaptive estimation for multiple stimuli.
inline mae_result mae_multi(const volume_series& data, const std::vector<stimulus_series>& stimuli,
                            const scale_schedule& schedule, const mae_options& options = {}) {
  check_mae_inputs(data, stimuli);
  const spectral_field phi_y = dft_volume(data);
  std::vector<spectrum> phi_x;
  phi_x.reserve(stimuli.size());
  for (const auto& s : stimuli) phi_x.push_back(dft(s.values));
  mae_engine engine(phi_y, std::move(phi_x), schedule, options);
  auto result = engine.run();
  for (auto& field : result.stimuli) {
    field.h.t_tr = data.t_tr;
    field.h.spacing = data.spacing;
  }
  return result;
}

// Single-stimulus entry point; identical to mae_multi with one stimulus.
inline mae_result mae_single(const volume_series& data, const stimulus_series& stimulus,
                             const scale_schedule& schedule, const mae_options& options = {}) {
  return mae_multi(data, {stimulus}, schedule, options);
}

}  // namespace masm
