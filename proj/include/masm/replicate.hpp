#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "masm/baseline.hpp"
#include "masm/config.hpp"
#include "masm/mae.hpp"
#include "masm/metrics.hpp"
#include "masm/phantom.hpp"

namespace masm {

// Names of the estimators run per replication.
inline constexpr const char* kMethodMasm = "masm";
inline constexpr const char* kMethodVoxelwise = "voxelwise";
inline constexpr const char* kMethodSmoothedVoxelwise = "smoothed_voxelwise";

// Per-method replication ensemble. For each stimulus j the HRF estimates on
// the evaluation window are kept per replication and voxel
// (window[j][(rep * nvox + vox) * W + t]) together with per-replication
// summary statistics (stats[j][rep * nvox + vox]).
struct method_ensemble {
  std::vector<std::vector<double>> window;
  std::vector<std::vector<hrf_summary>> stats;
};

struct ensemble_result {
  scenario_id scenario = scenario_id::sim1;
  int reps = 0;
  int T = 0;
  int W = 16;  // retained evaluation window (time points)
  int m = 1;
  double t_tr = 1.0;
  region_label_field regions;
  std::vector<std::vector<double>> truth_window;    // [j][vox * W + t]
  std::vector<std::vector<hrf_summary>> truth_stats;  // [j][vox]
  std::map<std::string, method_ensemble> methods;
};

struct replicate_options {
  scenario_id scenario = scenario_id::sim1;
  int reps = 1;
  std::uint64_t seed = 0;
  run_config cfg;
  int threads = 1;
  bool smoothed_baseline = true;  // also run the presmoothed voxelwise comparator
};

namespace detail {

constexpr std::uint64_t kRepTag = 0x72657073ULL;  // "reps"

inline void store_fields(method_ensemble& dst, const mae_result& res, int rep, long nvox, int W,
                         double stats_lo, double stats_hi, double t_tr) {
  for (int j = 0; j < static_cast<int>(res.stimuli.size()); ++j) {
    const auto& field = res.stimuli[static_cast<size_t>(j)];
    auto& win = dst.window[static_cast<size_t>(j)];
    auto& st = dst.stats[static_cast<size_t>(j)];
    for (long v = 0; v < nvox; ++v) {
      const double* h = field.h.series(v);
      double* out = win.data() + (static_cast<size_t>(rep) * nvox + v) * W;
      for (int t = 0; t < W; ++t) out[t] = h[t];
      st[static_cast<size_t>(rep) * nvox + static_cast<size_t>(v)] =
          summary_stats(std::span<const double>(h, static_cast<size_t>(field.h.T)), t_tr, stats_lo, stats_hi);
    }
  }
}

}  // namespace detail

// Runs `reps` seeded replications of a scenario: simulate, estimate with the
// adaptive procedure and the voxelwise comparator(s), and collect HRF windows
// and summary statistics for ensemble comparisons. Replications are
// distributed across workers; each replication is internally sequential, so
// results do not depend on the worker count.
inline ensemble_result replicate_ensemble(const replicate_options& opt) {
  if (opt.reps < 1) throw config_error("replicate: need at least one replication");
  ensemble_result out;
  out.scenario = opt.scenario;
  out.reps = opt.reps;
  out.regions = make_regions(opt.scenario);

  simulation_config probe = opt.scenario == scenario_id::sim1 ? sim1_config(0) : sim2_config(0);
  out.T = probe.T;
  out.m = scenario_stimuli(opt.scenario);
  out.W = std::min(out.W, out.T);
  const long nvox = out.regions.dims.voxels();
  const double stats_lo = 0.0;
  const double stats_hi = std::min(15.0, static_cast<double>(out.T - 1));

  // Ground truth is seed-independent: scaled HRF shapes per region group.
  const hrf_truth truth = make_truth(probe, out.regions);
  out.truth_window.assign(static_cast<size_t>(out.m), std::vector<double>(static_cast<size_t>(nvox) * out.W, 0.0));
  out.truth_stats.assign(static_cast<size_t>(out.m), std::vector<hrf_summary>(static_cast<size_t>(nvox)));
  for (int j = 0; j < out.m; ++j) {
    for (long v = 0; v < nvox; ++v) {
      const double* h = truth.h[static_cast<size_t>(j)].series(v);
      for (int t = 0; t < out.W; ++t)
        out.truth_window[static_cast<size_t>(j)][static_cast<size_t>(v) * out.W + t] = h[t];
      out.truth_stats[static_cast<size_t>(j)][static_cast<size_t>(v)] =
          summary_stats(std::span<const double>(h, static_cast<size_t>(out.T)), 1.0, stats_lo, stats_hi);
    }
  }

  std::vector<std::string> method_names = {kMethodMasm, kMethodVoxelwise};
  if (opt.smoothed_baseline) method_names.push_back(kMethodSmoothedVoxelwise);
  for (const auto& name : method_names) {
    method_ensemble me;
    me.window.assign(static_cast<size_t>(out.m),
                     std::vector<double>(static_cast<size_t>(opt.reps) * nvox * out.W, 0.0));
    me.stats.assign(static_cast<size_t>(out.m),
                    std::vector<hrf_summary>(static_cast<size_t>(opt.reps) * nvox));
    out.methods.emplace(name, std::move(me));
  }

  method_ensemble& masm_ens = out.methods[kMethodMasm];
  method_ensemble& vox_ens = out.methods[kMethodVoxelwise];
  method_ensemble* smooth_ens = opt.smoothed_baseline ? &out.methods[kMethodSmoothedVoxelwise] : nullptr;

  parallel_for(0, opt.reps, opt.threads, [&](long rep) {
    simulation_config config = opt.scenario == scenario_id::sim1 ? sim1_config(0) : sim2_config(0);
    config.seed = derive_seed(opt.seed, detail::kRepTag, static_cast<std::uint64_t>(rep));
    const sim_dataset ds = simulate_dataset(config);

    mae_options mopt;
    mopt.threads = 1;
    mopt.tapered_inverse = opt.cfg.tapered;
    mopt.spacing = opt.cfg.spacing;
    const scale_schedule sched = opt.cfg.schedule(config.T);

    const mae_result masm_res = mae_multi(ds.data, ds.stimuli, sched, mopt);
    detail::store_fields(masm_ens, masm_res, static_cast<int>(rep), nvox, out.W, stats_lo, stats_hi, ds.data.t_tr);

    const double r_fix = opt.cfg.voxelwise_radius(config.T);
    const mae_result vox_res = voxelwise_estimate(ds.data, ds.stimuli, r_fix, mopt);
    detail::store_fields(vox_ens, vox_res, static_cast<int>(rep), nvox, out.W, stats_lo, stats_hi, ds.data.t_tr);

    if (smooth_ens) {
      smoothing_spec spec;
      spec.fwhm = opt.cfg.fwhm;
      spec.spacing = opt.cfg.spacing;
      const volume_series smoothed = gaussian_smooth(ds.data, spec, 1);
      const mae_result sm_res = voxelwise_estimate(smoothed, ds.stimuli, r_fix, mopt);
      detail::store_fields(*smooth_ens, sm_res, static_cast<int>(rep), nvox, out.W, stats_lo, stats_hi,
                           ds.data.t_tr);
    }
  });

  return out;
}

// AM(t, d) between two methods for stimulus j at window time t.
inline std::vector<am_value> am_map(const ensemble_result& ens, const std::string& method_x,
                                    const std::string& method_y, int j, int t) {
  const auto& x = ens.methods.at(method_x).window[static_cast<size_t>(j)];
  const auto& y = ens.methods.at(method_y).window[static_cast<size_t>(j)];
  const long nvox = ens.regions.dims.voxels();
  std::vector<am_value> out(static_cast<size_t>(nvox));
  std::vector<double> xi(static_cast<size_t>(ens.reps)), yi(static_cast<size_t>(ens.reps));
  for (long v = 0; v < nvox; ++v) {
    for (int rep = 0; rep < ens.reps; ++rep) {
      const size_t at = (static_cast<size_t>(rep) * nvox + static_cast<size_t>(v)) * ens.W + static_cast<size_t>(t);
      xi[static_cast<size_t>(rep)] = x[at];
      yi[static_cast<size_t>(rep)] = y[at];
    }
    const double truth = ens.truth_window[static_cast<size_t>(j)][static_cast<size_t>(v) * ens.W + t];
    out[static_cast<size_t>(v)] = accuracy_measure(xi, yi, truth);
  }
  return out;
}

enum class summary_kind { height, time_to_peak, width };

inline double summary_value(const hrf_summary& s, summary_kind kind) {
  switch (kind) {
    case summary_kind::height:
      return s.h_a;
    case summary_kind::time_to_peak:
      return s.t_p;
    default:
      return s.w;
  }
}

// D_d per voxel for one summary statistic.
inline std::vector<double> dd_map(const ensemble_result& ens, const std::string& method_x,
                                  const std::string& method_y, int j, summary_kind kind) {
  const auto& x = ens.methods.at(method_x).stats[static_cast<size_t>(j)];
  const auto& y = ens.methods.at(method_y).stats[static_cast<size_t>(j)];
  const long nvox = ens.regions.dims.voxels();
  std::vector<double> out(static_cast<size_t>(nvox), 0.0);
  std::vector<double> xi(static_cast<size_t>(ens.reps)), yi(static_cast<size_t>(ens.reps));
  for (long v = 0; v < nvox; ++v) {
    for (int rep = 0; rep < ens.reps; ++rep) {
      xi[static_cast<size_t>(rep)] = summary_value(x[static_cast<size_t>(rep) * nvox + static_cast<size_t>(v)], kind);
      yi[static_cast<size_t>(rep)] = summary_value(y[static_cast<size_t>(rep) * nvox + static_cast<size_t>(v)], kind);
    }
    const double truth = summary_value(ens.truth_stats[static_cast<size_t>(j)][static_cast<size_t>(v)], kind);
    out[static_cast<size_t>(v)] = comparison_stat(xi, yi, truth);
  }
  return out;
}

// Paired t map over per-replication summary values.
inline std::vector<paired_t_value> paired_t_map(const ensemble_result& ens, const std::string& method_x,
                                                const std::string& method_y, int j, summary_kind kind) {
  const auto& x = ens.methods.at(method_x).stats[static_cast<size_t>(j)];
  const auto& y = ens.methods.at(method_y).stats[static_cast<size_t>(j)];
  const long nvox = ens.regions.dims.voxels();
  std::vector<paired_t_value> out(static_cast<size_t>(nvox));
  std::vector<double> xi(static_cast<size_t>(ens.reps)), yi(static_cast<size_t>(ens.reps));
  for (long v = 0; v < nvox; ++v) {
    for (int rep = 0; rep < ens.reps; ++rep) {
      xi[static_cast<size_t>(rep)] = summary_value(x[static_cast<size_t>(rep) * nvox + static_cast<size_t>(v)], kind);
      yi[static_cast<size_t>(rep)] = summary_value(y[static_cast<size_t>(rep) * nvox + static_cast<size_t>(v)], kind);
    }
    out[static_cast<size_t>(v)] = paired_t(xi, yi);
  }
  return out;
}

// Mean estimated HRF over replications and over the voxels of one region
// group, on the retained window.
inline std::vector<double> region_mean_hrf(const ensemble_result& ens, const std::string& method, int j, int group) {
  const auto& win = ens.methods.at(method).window[static_cast<size_t>(j)];
  const long nvox = ens.regions.dims.voxels();
  std::vector<double> acc(static_cast<size_t>(ens.W), 0.0);
  long count = 0;
  for (long v = 0; v < nvox; ++v) {
    if (ens.regions.label_at(v) != group) continue;
    ++count;
    for (int rep = 0; rep < ens.reps; ++rep) {
      const double* h = win.data() + (static_cast<size_t>(rep) * nvox + static_cast<size_t>(v)) * ens.W;
      for (int t = 0; t < ens.W; ++t) acc[static_cast<size_t>(t)] += h[t];
    }
  }
  if (count == 0) throw config_error("region_mean_hrf: empty region group");
  for (double& v : acc) v /= static_cast<double>(count) * ens.reps;
  return acc;
}

// Region-group truth curve on the window (identical across the group).
inline std::vector<double> region_truth_hrf(const ensemble_result& ens, int j, int group) {
  const long nvox = ens.regions.dims.voxels();
  for (long v = 0; v < nvox; ++v) {
    if (ens.regions.label_at(v) != group) continue;
    const double* h = ens.truth_window[static_cast<size_t>(j)].data() + static_cast<size_t>(v) * ens.W;
    return std::vector<double>(h, h + ens.W);
  }
  throw config_error("region_truth_hrf: empty region group");
}

inline double relative_l2(std::span<const double> estimate, std::span<const double> truth) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const double d = estimate[i] - truth[i];
    num += d * d;
    den += truth[i] * truth[i];
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

}  // namespace masm
