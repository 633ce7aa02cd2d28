#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "helpers.hpp"
#include "masm/phantom.hpp"
#include "masm/spectral.hpp"

using namespace masm;

namespace {

// Independent O(T^2) transcription of the defining sum, evaluating each
// exponential directly.
spectrum naive_dft(const std::vector<double>& y) {
  const int T = static_cast<int>(y.size());
  spectrum out(T);
  const double two_pi = 2.0 * 3.141592653589793238462643383279;
  for (int k = 0; k < T; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (int t = 0; t < T; ++t)
      acc += std::exp(std::complex<double>(0.0, -two_pi * k * t / T)) * y[static_cast<size_t>(t)];
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("dft of a constant series concentrates at DC") {
  std::vector<double> y(8, 3.25);
  const spectrum s = dft(y);
  CHECK(s[0].real() == Catch::Approx(8 * 3.25).margin(1e-12));
  CHECK(s[0].imag() == Catch::Approx(0.0).margin(1e-12));
  for (int k = 1; k < 8; ++k) CHECK(std::abs(s[k]) < 1e-12);
}

TEST_CASE("dft of a unit impulse is flat") {
  std::vector<double> y(16, 0.0);
  y[0] = 1.0;
  const spectrum s = dft(y);
  for (int k = 0; k < 16; ++k) {
    CHECK(s[k].real() == Catch::Approx(1.0).margin(1e-14));
    CHECK(s[k].imag() == Catch::Approx(0.0).margin(1e-14));
  }
}

TEST_CASE("dft matches the direct-sum oracle on random input") {
  rng_stream rng(101);
  const auto y = testutil::random_series(200, rng);
  const spectrum got = dft(y);
  const spectrum want = naive_dft(y);
  double scale = 0.0;
  for (int k = 0; k < 200; ++k) scale = std::max(scale, std::abs(want[k]));
  for (int k = 0; k < 200; ++k) CHECK(std::abs(got[k] - want[k]) / scale < 1e-10);
}

TEST_CASE("dft rejects non-finite input") {
  std::vector<double> y = {1.0, std::nan(""), 0.0};
  CHECK_THROWS_AS(dft(y), numeric_error);
}

TEST_CASE("idft inverts dft") {
  rng_stream rng(7);
  const auto y = testutil::random_series(96, rng);
  const auto back = idft(dft(y));
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  CHECK(testutil::max_abs_diff(y, back) / scale < 1e-10);
}

TEST_CASE("idft of an all-zero spectrum is zero") {
  const spectrum zero(12);
  for (double v : idft(zero)) CHECK(v == 0.0);
}

TEST_CASE("roundtrip recovers sampled HRF curves") {
  const auto params = scenario_hrf(scenario_id::sim2, 0);
  const auto h = sample_hrf(params, 64);
  const auto back = idft(dft(h));
  CHECK(testutil::max_abs_diff(h, back) < 1e-10);
}

TEST_CASE("Hermitian symmetry of real-input spectra") {
  rng_stream rng(11);
  const auto y = testutil::random_series(128, rng);
  const spectrum s = dft(y);
  double scale = 0.0;
  for (int k = 0; k < 128; ++k) scale = std::max(scale, std::abs(s[k]));
  for (int k = 1; k < 128; ++k) CHECK(std::abs(s[k] - std::conj(s[128 - k])) / scale < 1e-12);
}

TEST_CASE("Parseval identity") {
  rng_stream rng(13);
  const auto y = testutil::random_series(200, rng);
  const spectrum s = dft(y);
  double time_energy = 0.0;
  for (double v : y) time_energy += v * v;
  double freq_energy = 0.0;
  for (int k = 0; k < 200; ++k) freq_energy += std::norm(s[k]);
  freq_energy /= 200.0;
  CHECK(testutil::rel_err(freq_energy, time_energy) < 1e-10);
}

TEST_CASE("convolution theorem holds exactly for circular convolution") {
  rng_stream rng(17);
  const int T = 100;
  const auto params = scenario_hrf(scenario_id::sim2, 1);
  const auto h = sample_hrf(params, 16);
  std::vector<double> x(static_cast<size_t>(T), 0.0);
  for (double& v : x) v = rng.next_bernoulli(0.15) ? 1.0 : 0.0;
  x[3] = 1.0;  // ensure at least one event

  const auto y = circular_convolve(h, x);
  const spectrum sy = dft(y);
  std::vector<double> h_padded(static_cast<size_t>(T), 0.0);
  std::copy(h.begin(), h.end(), h_padded.begin());
  const spectrum sh = dft(h_padded);
  const spectrum sx = dft(x);
  double scale = 0.0;
  for (int k = 0; k < T; ++k) scale = std::max(scale, std::abs(sy[k]));
  for (int k = 0; k < T; ++k) CHECK(std::abs(sy[k] - sh[k] * sx[k]) / scale < 1e-10);
}

TEST_CASE("taper limit at zero is exactly 1/T") {
  for (int T : {3, 16, 200}) CHECK(taper_factor(0, T) == 1.0 / T);
}

TEST_CASE("taper matches a high-precision oracle on t = 1..T-1") {
  const int T = 200;
  const long double pi = 3.14159265358979323846264338327950288L;
  for (int t = 1; t < T; ++t) {
    const long double x = 2.0L * pi * t / T;
    const long double want = (1.0L - std::cos(x)) / (pi * (2.0L * pi / T) * t * t);
    CHECK(testutil::rel_err(taper_factor(t, T) * T, static_cast<double>(want * T)) < 1e-12);
  }
}

TEST_CASE("taper is positive and decays monotonically up to T/2") {
  for (int T : {3, 8, 101, 200}) {
    for (int t = 0; t < T; ++t) CHECK(taper_factor(t, T) > 0.0);
    for (int t = 1; t + 1 <= T / 2; ++t) CHECK(taper_factor(t + 1, T) < taper_factor(t, T));
  }
}

TEST_CASE("tapered inverse of a constant spectrum starts at the mean") {
  const int T = 32;
  spectrum s(T);
  s[0] = {static_cast<double>(T), 0.0};
  const auto h = tapered_inverse(s);
  CHECK(h[0] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("hermitian_symmetrize forces a real inverse") {
  rng_stream rng(23);
  spectrum s = testutil::random_spectrum(33, rng);
  const spectrum sym = hermitian_symmetrize(s);
  double max_imag = 0.0;
  idft(sym, &max_imag);
  CHECK(max_imag < 1e-12);
  // Symmetrizing a spectrum of real data is the identity.
  const auto y = testutil::random_series(33, rng);
  const spectrum sr = dft(y);
  const spectrum sr_sym = hermitian_symmetrize(sr);
  for (int k = 0; k < 33; ++k) CHECK(std::abs(sr_sym[k] - sr[k]) < 1e-9);
}
