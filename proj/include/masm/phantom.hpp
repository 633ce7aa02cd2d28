#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "masm/errors.hpp"
#include "masm/grid.hpp"
#include "masm/rng.hpp"
#include "masm/spectral.hpp"

namespace masm {

// Double-gamma HRF parameters. The delays are tied to shape and scale
// (d_i = a_i * b_i) and the function is zero outside [t_lo, t_hi).
struct gamma_hrf_params {
  double A = 1.0;
  double c = 0.35;
  double a1 = 6.0, a2 = 12.0;
  double b1 = 0.9, b2 = 0.9;
  double d1 = 5.4, d2 = 10.8;
  double t_lo = 0.0, t_hi = 15.0;

  void validate() const {
    if (!(a1 > 0.0 && a2 > 0.0 && b1 > 0.0 && b2 > 0.0))
      throw config_error("gamma_hrf_params: shape and scale must be positive");
    if (d1 != a1 * b1 || d2 != a2 * b2)
      throw config_error("gamma_hrf_params: delays must satisfy d_i = a_i * b_i");
  }
};

inline gamma_hrf_params make_gamma_params(double A, double c, double a1, double a2, double b1, double b2,
                                          double t_lo, double t_hi) {
  gamma_hrf_params p;
  p.A = A;
  p.c = c;
  p.a1 = a1;
  p.a2 = a2;
  p.b1 = b1;
  p.b2 = b2;
  p.d1 = a1 * b1;
  p.d2 = a2 * b2;
  p.t_lo = t_lo;
  p.t_hi = t_hi;
  return p;
}

// H(t) = A (t/d1)^a1 exp(-(t-d1)/b1) - c (t/d2)^a2 exp(-(t-d2)/b2) inside the
// support, 0 outside. Total function of any finite t.
inline double canonical_hrf(const gamma_hrf_params& p, double t) {
  if (!(t >= p.t_lo && t < p.t_hi)) return 0.0;
  if (t <= 0.0) return 0.0;
  const double lobe = p.A * std::pow(t / p.d1, p.a1) * std::exp(-(t - p.d1) / p.b1);
  const double undershoot = p.c * std::pow(t / p.d2, p.a2) * std::exp(-(t - p.d2) / p.b2);
  return lobe - undershoot;
}

inline std::vector<double> sample_hrf(const gamma_hrf_params& p, int T, double dt = 1.0) {
  std::vector<double> out(static_cast<size_t>(T), 0.0);
  for (int t = 0; t < T; ++t) out[static_cast<size_t>(t)] = canonical_hrf(p, t * dt);
  return out;
}

enum class scenario_id { sim1, sim2 };

inline std::string scenario_name(scenario_id s) { return s == scenario_id::sim1 ? "sim1" : "sim2"; }

inline scenario_id parse_scenario(const std::string& name) {
  if (name == "sim1") return scenario_id::sim1;
  if (name == "sim2") return scenario_id::sim2;
  throw config_error("unknown scenario '" + name + "' (expected sim1 or sim2)");
}

// HRF shapes per pattern group: A = (1, 5, 3), a = (6,12), (4,8), (5,10),
// b = 0.9 throughout. Simulation I shifts the support of group j to start at
// j - 1; simulation II uses [0, 15) for all.
inline gamma_hrf_params scenario_hrf(scenario_id scenario, int group) {
  static const double amps[3] = {1.0, 5.0, 3.0};
  static const double shapes[3][2] = {{6.0, 12.0}, {4.0, 8.0}, {5.0, 10.0}};
  const double lo = scenario == scenario_id::sim1 ? static_cast<double>(group) : 0.0;
  return make_gamma_params(amps[group], 0.35, shapes[group][0], shapes[group][1], 0.9, 0.9, lo, 15.0);
}

inline double scenario_divisor(scenario_id scenario, int group) {
  static const double sim1_div[3] = {8.0, 4.0, 2.0};
  static const double sim2_div[3] = {6.0, 4.0, 2.0};
  return scenario == scenario_id::sim1 ? sim1_div[group] : sim2_div[group];
}

inline int scenario_stimuli(scenario_id scenario) { return scenario == scenario_id::sim1 ? 1 : 3; }

namespace detail {

inline void paint_rect(region_label_field& f, int x0, int x1, int y0, int y1, int label, int area) {
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const long v = voxel_index(f.dims, {x, y, 0});
      f.labels[static_cast<size_t>(v)] = label;
      f.area[static_cast<size_t>(v)] = area;
    }
}

}  // namespace detail

// Deterministic 40x40 layouts. Simulation I: nine areas in three pattern
// groups (rectangles, L-shapes, crosses, three sizes each) plus background.
// Simulation II: nine circles on a 3x3 grid of centers with radii 3, 5, 7
// arranged so every group mixes the three sizes; interiors are disjoint.
inline region_label_field make_regions(scenario_id scenario) {
  region_label_field field;
  field.dims = {40, 40, 1};
  field.labels.assign(1600, 0);
  field.area.assign(1600, 0);

  if (scenario == scenario_id::sim1) {
    // Group 1: rectangles. The 3x3 block is the smallest active area.
    detail::paint_rect(field, 3, 5, 3, 5, 1, 1);
    detail::paint_rect(field, 16, 20, 2, 5, 1, 2);
    detail::paint_rect(field, 30, 36, 3, 7, 1, 3);
    // Group 2: L-shapes.
    detail::paint_rect(field, 4, 5, 14, 19, 2, 4);
    detail::paint_rect(field, 6, 9, 18, 19, 2, 4);
    detail::paint_rect(field, 16, 18, 13, 20, 2, 5);
    detail::paint_rect(field, 19, 23, 19, 20, 2, 5);
    detail::paint_rect(field, 28, 30, 12, 21, 2, 6);
    detail::paint_rect(field, 31, 37, 20, 21, 2, 6);
    // Group 3: crosses.
    detail::paint_rect(field, 5, 9, 28, 30, 3, 7);
    detail::paint_rect(field, 6, 8, 26, 32, 3, 7);
    detail::paint_rect(field, 17, 23, 29, 31, 3, 8);
    detail::paint_rect(field, 19, 21, 26, 34, 3, 8);
    detail::paint_rect(field, 29, 37, 29, 31, 3, 9);
    detail::paint_rect(field, 32, 34, 25, 35, 3, 9);
    return field;
  }

  static const int centers[3] = {8, 20, 32};
  static const int radii[3] = {3, 5, 7};
  int area_id = 1;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) {
      const int cx = centers[i];
      const int cy = centers[j];
      const int group = (i + j) % 3;
      const int radius = radii[(i + 2 * j) % 3];
      for (int y = cy - radius; y <= cy + radius; ++y)
        for (int x = cx - radius; x <= cx + radius; ++x) {
          if (!in_bounds(field.dims, x, y, 0)) continue;
          const int ddx = x - cx;
          const int ddy = y - cy;
          if (ddx * ddx + ddy * ddy >= radius * radius) continue;
          const long v = voxel_index(field.dims, {x, y, 0});
          field.labels[static_cast<size_t>(v)] = group + 1;
          field.area[static_cast<size_t>(v)] = area_id;
        }
      ++area_id;
    }
  return field;
}

// Binary stimulus sequence: iid Bernoulli(p) onsets.
struct stimulus_series {
  std::vector<double> values;
  double p = 0.15;
  std::uint64_t seed = 0;

  int length() const { return static_cast<int>(values.size()); }
};

inline stimulus_series gen_stimulus(int T, double p, std::uint64_t seed) {
  if (T < 1) throw config_error("gen_stimulus: T must be at least 1");
  if (!(p > 0.0 && p < 1.0)) throw config_error("gen_stimulus: p must lie in (0, 1)");
  stimulus_series s;
  s.p = p;
  s.seed = seed;
  s.values.resize(static_cast<size_t>(T));
  rng_stream rng(seed);
  for (double& v : s.values) v = rng.next_bernoulli(p) ? 1.0 : 0.0;
  return s;
}

struct noise_spec {
  enum class kind { ar1, white } type = kind::white;
  double rho = 0.0;     // AR(1) coefficient
  double sigma2 = 0.0;  // innovation variance (AR) or marginal variance (white)

  static noise_spec ar1(double rho, double sigma2) { return {kind::ar1, rho, sigma2}; }
  static noise_spec white(double sigma) { return {kind::white, 0.0, sigma * sigma}; }
};

// AR(1) series start from the stationary law N(0, sigma^2/(1-rho^2)) so there
// is no burn-in transient. White noise is iid N(0, sigma^2).
inline std::vector<double> gen_noise(int T, const noise_spec& spec, std::uint64_t seed) {
  if (spec.type == noise_spec::kind::ar1 && std::abs(spec.rho) >= 1.0)
    throw config_error("gen_noise: AR(1) coefficient must satisfy |rho| < 1");
  std::vector<double> out(static_cast<size_t>(T), 0.0);
  if (spec.sigma2 <= 0.0) return out;
  rng_stream rng(seed);
  const double sigma = std::sqrt(spec.sigma2);
  if (spec.type == noise_spec::kind::white) {
    for (double& v : out) v = sigma * rng.next_normal();
    return out;
  }
  const double stationary_sd = sigma / std::sqrt(1.0 - spec.rho * spec.rho);
  out[0] = stationary_sd * rng.next_normal();
  for (int t = 1; t < T; ++t) out[static_cast<size_t>(t)] = spec.rho * out[static_cast<size_t>(t - 1)] + sigma * rng.next_normal();
  return out;
}

// Scenario configuration. Defaults reproduce the two reference setups; the
// sim2 noise level is set so the smallest-group SNR lands near 0.6.
struct simulation_config {
  scenario_id scenario = scenario_id::sim1;
  int T = 200;
  grid_dims dims = {40, 40, 1};
  noise_spec noise = noise_spec::ar1(0.3, 0.03);
  double bernoulli_p = 0.15;
  std::uint64_t seed = 0;

  void validate() const {
    if (T < 2) throw config_error("simulation_config: T must be at least 2");
    if (!(bernoulli_p > 0.0 && bernoulli_p < 1.0)) throw config_error("simulation_config: p must lie in (0, 1)");
    if (noise.type == noise_spec::kind::ar1 && std::abs(noise.rho) >= 1.0)
      throw config_error("simulation_config: |rho| < 1 required");
    if (dims.nx != 40 || dims.ny != 40 || dims.nz != 1)
      throw config_error("simulation_config: region layouts are defined on a 40x40 lattice");
  }
};

inline simulation_config sim1_config(std::uint64_t seed) {
  simulation_config c;
  c.scenario = scenario_id::sim1;
  c.noise = noise_spec::ar1(0.3, 0.03);
  c.seed = seed;
  return c;
}

inline simulation_config sim2_config(std::uint64_t seed) {
  simulation_config c;
  c.scenario = scenario_id::sim2;
  c.noise = noise_spec::white(1.5);
  c.seed = seed;
  return c;
}

// Per-stimulus ground truth: the scaled HRF samples each voxel responds with.
struct hrf_truth {
  grid_dims dims;
  int T = 0;
  std::vector<volume_series> h;  // one volume per stimulus
};

struct sim_dataset {
  volume_series data;
  std::vector<stimulus_series> stimuli;
  hrf_truth truth;
  region_label_field regions;
  simulation_config config;
};

namespace detail {

constexpr std::uint64_t kStimulusTag = 0x7374696dULL;  // "stim"
constexpr std::uint64_t kNoiseTag = 0x6e6f6973ULL;     // "nois"

}  // namespace detail

// Noise-free signal synthesis for given stimuli. Simulation I convolves the
// group HRF with the single stimulus; simulation II convolves each stimulus
// with its own HRF and sums. Group signals are divided by the group divisor.
inline volume_series synthesize_signal(const simulation_config& config, const region_label_field& regions,
                                       const std::vector<stimulus_series>& stimuli) {
  const int T = config.T;
  volume_series vol(regions.dims, T);
  const int m = scenario_stimuli(config.scenario);
  if (static_cast<int>(stimuli.size()) != m)
    throw config_error("synthesize_signal: expected " + std::to_string(m) + " stimuli");
  for (const auto& s : stimuli)
    if (s.length() != T) throw config_error("synthesize_signal: stimulus length must equal T");

  std::vector<std::vector<double>> group_signal(3);
  if (config.scenario == scenario_id::sim1) {
    for (int g = 0; g < 3; ++g) {
      const auto h = sample_hrf(scenario_hrf(config.scenario, g), 16);
      auto y = causal_convolve(h, stimuli[0].values);
      for (double& v : y) v /= scenario_divisor(config.scenario, g);
      group_signal[static_cast<size_t>(g)] = std::move(y);
    }
  } else {
    std::vector<double> composite(static_cast<size_t>(T), 0.0);
    for (int j = 0; j < m; ++j) {
      const auto h = sample_hrf(scenario_hrf(config.scenario, j), 16);
      const auto y = causal_convolve(h, stimuli[static_cast<size_t>(j)].values);
      for (int t = 0; t < T; ++t) composite[static_cast<size_t>(t)] += y[static_cast<size_t>(t)];
    }
    for (int g = 0; g < 3; ++g) {
      auto y = composite;
      for (double& v : y) v /= scenario_divisor(config.scenario, g);
      group_signal[static_cast<size_t>(g)] = std::move(y);
    }
  }

  const long n = regions.dims.voxels();
  for (long v = 0; v < n; ++v) {
    const int label = regions.label_at(v);
    if (label == 0) continue;
    const auto& y = group_signal[static_cast<size_t>(label - 1)];
    double* dst = vol.series(v);
    for (int t = 0; t < T; ++t) dst[t] = y[static_cast<size_t>(t)];
  }
  return vol;
}

// Ground-truth HRF volumes: voxel in group g responds to stimulus j with
// H_(g or j) / divisor(g); background voxels carry zero.
inline hrf_truth make_truth(const simulation_config& config, const region_label_field& regions) {
  const int m = scenario_stimuli(config.scenario);
  hrf_truth truth;
  truth.dims = regions.dims;
  truth.T = config.T;
  truth.h.reserve(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    volume_series vol(regions.dims, config.T);
    for (int g = 0; g < 3; ++g) {
      const int shape = config.scenario == scenario_id::sim1 ? g : j;
      auto h = sample_hrf(scenario_hrf(config.scenario, shape), config.T);
      const double div = scenario_divisor(config.scenario, g);
      for (double& v : h) v /= div;
      const long n = regions.dims.voxels();
      for (long v = 0; v < n; ++v) {
        if (regions.label_at(v) != g + 1) continue;
        double* dst = vol.series(v);
        for (int t = 0; t < config.T; ++t) dst[t] = h[static_cast<size_t>(t)];
      }
    }
    truth.h.push_back(std::move(vol));
  }
  return truth;
}

// Full synthetic dataset: signal plus per-voxel noise streams derived from
// (seed, voxel index), so generation is order-independent.
inline sim_dataset simulate_dataset(const simulation_config& config) {
  config.validate();
  sim_dataset out;
  out.config = config;
  out.regions = make_regions(config.scenario);

  const int m = scenario_stimuli(config.scenario);
  out.stimuli.reserve(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j)
    out.stimuli.push_back(gen_stimulus(config.T, config.bernoulli_p,
                                       derive_seed(config.seed, detail::kStimulusTag, static_cast<std::uint64_t>(j))));

  out.data = synthesize_signal(config, out.regions, out.stimuli);
  const long n = out.regions.dims.voxels();
  if (config.noise.sigma2 > 0.0) {
    for (long v = 0; v < n; ++v) {
      const auto eps = gen_noise(config.T, config.noise,
                                 derive_seed(config.seed, detail::kNoiseTag, static_cast<std::uint64_t>(v)));
      double* dst = out.data.series(v);
      for (int t = 0; t < config.T; ++t) dst[t] += eps[static_cast<size_t>(t)];
    }
  }
  out.truth = make_truth(config, out.regions);
  return out;
}

}  // namespace masm
