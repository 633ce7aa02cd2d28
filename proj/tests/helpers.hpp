#pragma once

#include <complex>
#include <vector>

#include "masm/rng.hpp"
#include "masm/spectral.hpp"

namespace testutil {

inline std::vector<double> random_series(int T, masm::rng_stream& rng, double scale = 1.0) {
  std::vector<double> out(static_cast<size_t>(T));
  for (double& v : out) v = scale * rng.next_normal();
  return out;
}

inline masm::spectral_field random_field(masm::grid_dims dims, int T, masm::rng_stream& rng,
                                         masm::spectral_role role = masm::spectral_role::signal) {
  masm::spectral_field f(dims, T, role);
  for (auto& c : f.coeff) c = {rng.next_normal(), rng.next_normal()};
  if (role == masm::spectral_role::hrf_estimate)
    for (auto& v : f.variance) v = 0.1 + rng.next_uniform();
  return f;
}

inline masm::spectrum random_spectrum(int T, masm::rng_stream& rng) {
  masm::spectrum s(T);
  for (auto& c : s.coeff) c = {rng.next_normal(), rng.next_normal()};
  return s;
}

inline double rel_err(double got, double want) {
  const double denom = std::abs(want) > 1e-300 ? std::abs(want) : 1.0;
  return std::abs(got - want) / denom;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace testutil
