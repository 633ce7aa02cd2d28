#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "masm/errors.hpp"

namespace masm {

// Response height, time-to-peak and full-width at half-max of an HRF curve.
// The peak is located on a 100x-refined grid with cubic interpolation; the
// half-max crossings use linear interpolation of the samples. Flags mark
// degenerate shapes.
struct hrf_summary {
  double h_a = 0.0;
  double t_p = 0.0;
  double w = 0.0;
  bool truncated = false;   // a half-max crossing ran into the window edge
  bool flat = false;        // degenerate plateau; T_p tie-broken leftward
  bool multimodal = false;  // additional half-max exceedances outside the main lobe
};

namespace detail {

// Catmull-Rom interpolation through uniformly spaced samples, with clamped
// end handling.
inline double cubic_at(std::span<const double> y, double dt, double t) {
  const int n = static_cast<int>(y.size());
  const double pos = t / dt;
  int i = static_cast<int>(std::floor(pos));
  i = std::max(0, std::min(i, n - 2));
  const double u = pos - i;
  auto at = [&](int idx) { return y[static_cast<size_t>(std::max(0, std::min(idx, n - 1)))]; };
  const double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
  return 0.5 * (2.0 * p1 + (-p0 + p2) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * u * u * u);
}

inline double linear_at(std::span<const double> y, double dt, double t) {
  const int n = static_cast<int>(y.size());
  const double pos = t / dt;
  int i = static_cast<int>(std::floor(pos));
  i = std::max(0, std::min(i, n - 2));
  const double u = pos - i;
  return y[static_cast<size_t>(i)] * (1.0 - u) + y[static_cast<size_t>(i + 1)] * u;
}

}  // namespace detail

inline hrf_summary summary_stats(std::span<const double> series, double dt, double window_lo, double window_hi) {
  const int n = static_cast<int>(series.size());
  if (n < 1) throw config_error("summary_stats: empty series");
  if (!(dt > 0.0)) throw config_error("summary_stats: dt must be positive");
  const double support_hi = (n - 1) * dt;
  if (window_lo < 0.0 || window_hi > support_hi || !(window_lo < window_hi))
    throw config_error("summary_stats: window must lie within the series support");

  const double step = dt / 100.0;
  const long steps = std::lround((window_hi - window_lo) / step);

  hrf_summary out;
  double best = -std::numeric_limits<double>::infinity();
  double worst = std::numeric_limits<double>::infinity();
  long best_i = 0;
  for (long i = 0; i <= steps; ++i) {
    const double t = window_lo + i * step;
    const double v = detail::cubic_at(series, dt, t);
    worst = std::min(worst, v);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  out.h_a = best;
  out.t_p = window_lo + best_i * step;
  if (best == worst) {
    out.flat = true;
    out.t_p = window_lo;
  }

  const double half = out.h_a / 2.0;
  auto lin = [&](long i) { return detail::linear_at(series, dt, window_lo + i * step); };

  // Nearest refined index to the peak on the linear curve.
  long peak_i = std::lround((out.t_p - window_lo) / step);
  peak_i = std::max(0L, std::min(peak_i, steps));

  double left = window_lo;
  bool left_found = false;
  for (long i = peak_i; i >= 0; --i) {
    const double v = lin(i);
    if (v < half) {
      const double v_next = lin(std::min(i + 1, steps));
      const double t_i = window_lo + i * step;
      left = v_next == v ? t_i : t_i + step * (half - v) / (v_next - v);
      left_found = true;
      break;
    }
  }
  double right = window_hi;
  bool right_found = false;
  for (long i = peak_i; i <= steps; ++i) {
    const double v = lin(i);
    if (v < half) {
      const double v_prev = lin(std::max(i - 1, 0L));
      const double t_i = window_lo + i * step;
      right = v_prev == v ? t_i : t_i - step * (half - v) / (v_prev - v);
      right_found = true;
      break;
    }
  }
  if (!left_found || !right_found) out.truncated = true;
  if (out.flat) {
    left = window_lo;
    right = window_hi;
    out.truncated = true;
  }
  out.w = right - left;

  // Half-max exceedances beyond the main lobe mark a multimodal shape.
  for (long i = 0; i <= steps && !out.flat; ++i) {
    const double t = window_lo + i * step;
    if (t >= left && t <= right) continue;
    if (lin(i) > half) {
      out.multimodal = true;
      break;
    }
  }
  return out;
}

inline hrf_summary summary_stats(const std::vector<double>& series, double dt, double window_lo, double window_hi) {
  return summary_stats(std::span<const double>(series.data(), series.size()), dt, window_lo, window_hi);
}

// Replication-ensemble accuracy measure at one (time, voxel):
//   AM = sum_i (|x_i - H| - |y_i - H|) / (N * Std(x)),
// with the sample standard deviation (denominator N-1). Negative values favor
// the first method. Undefined when Std(x) = 0.
struct am_value {
  double value = 0.0;
  bool defined = false;
};

inline am_value accuracy_measure(std::span<const double> x_reps, std::span<const double> y_reps, double truth) {
  const size_t n = x_reps.size();
  if (n < 2 || y_reps.size() != n) throw config_error("accuracy_measure: need N >= 2 paired replications");
  double acc = 0.0;
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) {
    acc += std::abs(x_reps[i] - truth) - std::abs(y_reps[i] - truth);
    mean += x_reps[i];
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = x_reps[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  am_value out;
  if (sd == 0.0) return out;
  out.value = acc / (static_cast<double>(n) * sd);
  out.defined = true;
  return out;
}

// Per-voxel summary-statistic comparison:
//   D_d = (1/N) sum_i (|x_i - x0| - |y_i - x0|).
// Negative values mean the first method is closer to the truth.
inline double comparison_stat(std::span<const double> x_hats, std::span<const double> y_hats, double truth) {
  const size_t n = x_hats.size();
  if (n == 0 || y_hats.size() != n) throw config_error("comparison_stat: need equal nonempty replication sets");
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += std::abs(x_hats[i] - truth) - std::abs(y_hats[i] - truth);
  return acc / static_cast<double>(n);
}

// Paired t statistic with its degenerate outcomes kept explicit.
struct paired_t_value {
  enum class status { ok, plus_infinity, minus_infinity, undefined } state = status::undefined;
  double t = 0.0;

  bool defined() const { return state == status::ok; }
};

inline paired_t_value paired_t(std::span<const double> a, std::span<const double> b) {
  const size_t n = a.size();
  if (n < 2 || b.size() != n) throw config_error("paired_t: need N >= 2 paired values");
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  paired_t_value out;
  if (sd == 0.0) {
    if (mean == 0.0) return out;
    out.state = mean > 0.0 ? paired_t_value::status::plus_infinity : paired_t_value::status::minus_infinity;
    return out;
  }
  out.state = paired_t_value::status::ok;
  out.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  return out;
}

// Truncation used when rendering paired-t maps.
inline double truncate_for_map(double t, double limit = 20.0) {
  return std::max(-limit, std::min(limit, t));
}

}  // namespace masm
