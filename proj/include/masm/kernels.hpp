#pragma once

namespace masm {

// Localization kernel: (1 - x^2) on [0, 1], zero beyond.
inline double kernel_loc(double x) {
  if (x > 1.0) return 0.0;
  return 1.0 - x * x;
}

// Statistical-similarity kernel (Parzen window):
//   1 - 6x^2 + 6x^3 on [0, 0.5], 2(1-x)^3 on (0.5, 1], zero beyond.
// Both branches meet at 0.25 for x = 0.5.
inline double kernel_st(double x) {
  if (x > 1.0) return 0.0;
  if (x <= 0.5) return 1.0 + 6.0 * x * x * (x - 1.0);
  const double u = 1.0 - x;
  return 2.0 * u * u * u;
}

}  // namespace masm
