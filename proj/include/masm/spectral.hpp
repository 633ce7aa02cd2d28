#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "masm/errors.hpp"
#include "masm/grid.hpp"

namespace masm {

using cplx = std::complex<double>;

// Discrete Fourier coefficients at the fundamental frequencies f_k = k/T,
// k = 0..T-1, with the forward transform carrying no 1/T factor:
//   phi(f_k) = sum_t exp(-2*pi*i*k*t/T) * y(t).
struct spectrum {
  int T = 0;
  std::vector<cplx> coeff;

  spectrum() = default;
  explicit spectrum(int length) : T(length), coeff(static_cast<size_t>(length), cplx{0.0, 0.0}) {}

  cplx& operator[](int k) { return coeff[static_cast<size_t>(k)]; }
  const cplx& operator[](int k) const { return coeff[static_cast<size_t>(k)]; }
};

enum class spectral_role { signal, stimulus, hrf_estimate, residual };

// One spectrum per lattice voxel, stored voxel-major (coeff of voxel v at
// [v*T + k]). hrf-estimate fields also carry a per-(frequency, voxel) variance.
struct spectral_field {
  grid_dims dims;
  int T = 0;
  spectral_role role = spectral_role::signal;
  std::vector<cplx> coeff;
  std::vector<double> variance;  // empty unless role == hrf_estimate

  spectral_field() = default;
  spectral_field(grid_dims d, int length, spectral_role r)
      : dims(d), T(length), role(r), coeff(static_cast<size_t>(d.voxels()) * length, cplx{0.0, 0.0}) {
    if (r == spectral_role::hrf_estimate)
      variance.assign(static_cast<size_t>(d.voxels()) * length, 0.0);
  }

  cplx* row(long vox) { return coeff.data() + static_cast<size_t>(vox) * T; }
  const cplx* row(long vox) const { return coeff.data() + static_cast<size_t>(vox) * T; }
  double* var_row(long vox) { return variance.data() + static_cast<size_t>(vox) * T; }
  const double* var_row(long vox) const { return variance.data() + static_cast<size_t>(vox) * T; }
};

// Unit roots exp(-2*pi*i*m/T) for m = 0..T-1. Arguments are reduced mod T
// before lookup, which keeps the naive transforms accurate for large k*t.
class twiddle_table {
public:
  explicit twiddle_table(int T) : T_(T), w_(static_cast<size_t>(T)) {
    const double step = -2.0 * 3.141592653589793238462643383279 / T;
    for (int m = 0; m < T; ++m) w_[static_cast<size_t>(m)] = std::polar(1.0, step * m);
  }

  // exp(-2*pi*i*(k*t)/T)
  cplx forward(long k, long t) const { return w_[static_cast<size_t>((k * t) % T_)]; }
  // exp(+2*pi*i*(k*t)/T)
  cplx inverse(long k, long t) const { return std::conj(w_[static_cast<size_t>((k * t) % T_)]); }

  int length() const { return T_; }

private:
  int T_;
  std::vector<cplx> w_;
};

inline spectrum dft(std::span<const double> series) {
  const int T = static_cast<int>(series.size());
  if (T < 1) throw numeric_error("dft: empty series");
  for (double v : series)
    if (!std::isfinite(v)) throw numeric_error("dft: non-finite input value");
  const twiddle_table tw(T);
  spectrum out(T);
  for (int k = 0; k < T; ++k) {
    cplx acc{0.0, 0.0};
    for (int t = 0; t < T; ++t) acc += tw.forward(k, t) * series[static_cast<size_t>(t)];
    out[k] = acc;
  }
  return out;
}

inline spectrum dft(const std::vector<double>& series) {
  return dft(std::span<const double>(series.data(), series.size()));
}

// Exact inverse of dft: y(t) = (1/T) * sum_k phi(f_k) exp(+2*pi*i*t*f_k).
// Returns the real part; if max_imag is given, records the largest imaginary
// magnitude seen (a diagnostic for non-Hermitian inputs).
inline std::vector<double> idft(const spectrum& spec, double* max_imag = nullptr) {
  const int T = spec.T;
  const twiddle_table tw(T);
  std::vector<double> out(static_cast<size_t>(T), 0.0);
  double worst = 0.0;
  for (int t = 0; t < T; ++t) {
    cplx acc{0.0, 0.0};
    for (int k = 0; k < T; ++k) acc += tw.inverse(k, t) * spec[k];
    acc /= static_cast<double>(T);
    worst = std::max(worst, std::abs(acc.imag()));
    out[static_cast<size_t>(t)] = acc.real();
  }
  if (max_imag) *max_imag = std::max(*max_imag, worst);
  return out;
}

// Time-domain taper of the bias-reduced inverse transform. Equals
// (1/T) * sinc^2(pi*t/T); the t = 0 value is the analytic limit 1/T.
inline double taper_factor(int t, int T) {
  if (t == 0) return 1.0 / T;
  const double pi = 3.141592653589793238462643383279;
  const double x = 2.0 * pi * t / T;
  return (1.0 - std::cos(x)) / (pi * (2.0 * pi / T) * static_cast<double>(t) * t);
}

// Tapered inverse: H(t) = Re[ sum_k phi(f_k) exp(+2*pi*i*t*f_k) ] * g(t),
// evaluated at t = 0..T-1.
inline std::vector<double> tapered_inverse(const spectrum& spec, double* max_imag = nullptr) {
  const int T = spec.T;
  const twiddle_table tw(T);
  std::vector<double> out(static_cast<size_t>(T), 0.0);
  double worst = 0.0;
  for (int t = 0; t < T; ++t) {
    cplx acc{0.0, 0.0};
    for (int k = 0; k < T; ++k) acc += tw.inverse(k, t) * spec[k];
    const double g = taper_factor(t, T);
    worst = std::max(worst, std::abs(acc.imag()) * g);
    out[static_cast<size_t>(t)] = acc.real() * g;
  }
  if (max_imag) *max_imag = std::max(*max_imag, worst);
  return out;
}

// Averages conjugate pairs so that the inverse transform of the result is
// exactly real: phi(f_k) <- (phi(f_k) + conj(phi(f_{T-k mod T}))) / 2.
inline spectrum hermitian_symmetrize(const spectrum& spec) {
  const int T = spec.T;
  spectrum out(T);
  for (int k = 0; k < T; ++k) {
    const int mirror = (T - k) % T;
    out[k] = 0.5 * (spec[k] + std::conj(spec[mirror]));
  }
  return out;
}

// Circular convolution on the length-T grid: y(t) = sum_u h(u) x((t-u) mod T).
// In the frequency domain this is exactly phi_h * phi_x.
inline std::vector<double> circular_convolve(std::span<const double> h, std::span<const double> x) {
  const int T = static_cast<int>(x.size());
  std::vector<double> out(static_cast<size_t>(T), 0.0);
  for (int t = 0; t < T; ++t) {
    double acc = 0.0;
    for (int u = 0; u < static_cast<int>(h.size()); ++u) {
      int s = (t - u) % T;
      if (s < 0) s += T;
      acc += h[static_cast<size_t>(u)] * x[static_cast<size_t>(s)];
    }
    out[static_cast<size_t>(t)] = acc;
  }
  return out;
}

// Causal discrete convolution truncated to the acquisition grid:
// y(t) = sum_{u=0..t} h(u) x(t-u).
inline std::vector<double> causal_convolve(std::span<const double> h, std::span<const double> x) {
  const int T = static_cast<int>(x.size());
  std::vector<double> out(static_cast<size_t>(T), 0.0);
  for (int t = 0; t < T; ++t) {
    double acc = 0.0;
    const int umax = std::min<int>(t, static_cast<int>(h.size()) - 1);
    for (int u = 0; u <= umax; ++u) acc += h[static_cast<size_t>(u)] * x[static_cast<size_t>(t - u)];
    out[static_cast<size_t>(t)] = acc;
  }
  return out;
}

// DFT of every voxel series in a volume.
inline spectral_field dft_volume(const volume_series& vol, spectral_role role = spectral_role::signal) {
  const long n = vol.dims.voxels();
  spectral_field out(vol.dims, vol.T, role);
  const twiddle_table tw(vol.T);
  for (long v = 0; v < n; ++v) {
    const double* y = vol.series(v);
    cplx* row = out.row(v);
    for (int k = 0; k < vol.T; ++k) {
      cplx acc{0.0, 0.0};
      for (int t = 0; t < vol.T; ++t) acc += tw.forward(k, t) * y[t];
      row[k] = acc;
    }
  }
  return out;
}

}  // namespace masm
