#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "masm/errors.hpp"
#include "masm/rng.hpp"
#include "masm/spectral.hpp"

namespace masm {

// Adaptive Neyman statistic: the maximal standardized partial sum of
// z_k^2 - 1 over truncation points, T_AN = max_m (2m)^{-1/2} sum_{k<=m} (z_k^2 - 1).
inline double adaptive_neyman_statistic(std::span<const double> z) {
  double partial = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (size_t m = 1; m <= z.size(); ++m) {
    const double v = z[m - 1];
    partial += v * v - 1.0;
    best = std::max(best, partial / std::sqrt(2.0 * static_cast<double>(m)));
  }
  return best;
}

// Critical values for the statistic come from simulated null tables (the
// extreme-value asymptotic converges too slowly to be usable). Tables are
// keyed by the z-vector length and significance level and cached per process.
inline double neyman_critical_value(int n, double alpha, int replications = 100000) {
  static std::map<std::pair<int, long>, double> cache;
  static std::mutex mutex;
  const long alpha_key = std::lround(alpha * 1e6);
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find({n, alpha_key});
    if (it != cache.end()) return it->second;
  }
  rng_stream rng(derive_seed(0x41444e45594d414eULL, static_cast<std::uint64_t>(n), alpha_key));
  std::vector<double> stats(static_cast<size_t>(replications));
  std::vector<double> z(static_cast<size_t>(n));
  for (int r = 0; r < replications; ++r) {
    for (double& v : z) v = rng.next_normal();
    stats[static_cast<size_t>(r)] = adaptive_neyman_statistic(z);
  }
  std::sort(stats.begin(), stats.end());
  const size_t idx = std::min(stats.size() - 1, static_cast<size_t>(std::floor((1.0 - alpha) * replications)));
  const double crit = stats[idx];
  std::lock_guard<std::mutex> lock(mutex);
  cache[{n, alpha_key}] = crit;
  return crit;
}

struct stop_test_result {
  double statistic = 0.0;
  bool reject = false;
};

// Builds the standardized difference vector (real parts of all frequencies in
// order, then imaginary parts) and tests it against the null of no change.
inline stop_test_result neyman_stop(const spectrum& est_l, const spectrum& est_lm1,
                                    std::span<const double> var_l, double alpha) {
  const int T = est_l.T;
  if (est_lm1.T != T || static_cast<int>(var_l.size()) != T)
    throw config_error("neyman_stop: length mismatch");
  std::vector<double> z(static_cast<size_t>(2 * T));
  for (int k = 0; k < T; ++k) {
    const double v = var_l[static_cast<size_t>(k)];
    if (!(v > 0.0)) throw numeric_error("neyman_stop: nonpositive variance");
    const double sd = std::sqrt(v);
    const cplx d = est_l[k] - est_lm1[k];
    z[static_cast<size_t>(k)] = d.real() / sd;
    z[static_cast<size_t>(T + k)] = d.imag() / sd;
  }
  stop_test_result res;
  res.statistic = adaptive_neyman_statistic(z);
  res.reject = res.statistic > neyman_critical_value(2 * T, alpha);
  return res;
}

}  // namespace masm
