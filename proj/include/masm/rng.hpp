#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace masm {

// splitmix64 finalizer, used to derive independent stream seeds from
// (seed, stream id) pairs so per-voxel generation is order-independent.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
  return mix64(mix64(seed ^ 0x6d61736d2d726e67ULL) + mix64(stream) + 3 * mix64(substream + 1));
}

// Deterministic random source. mt19937_64 output is fully specified by the
// standard; uniform and normal variates are derived from it with fixed
// arithmetic (no std::*_distribution) so streams are reproducible across
// standard library implementations.
class rng_stream {
public:
  explicit rng_stream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double next_uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; draws are generated in pairs.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_uniform();
    while (u1 <= 0.0) u1 = next_uniform();
    const double u2 = next_uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  bool next_bernoulli(double p) { return next_uniform() < p; }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace masm
