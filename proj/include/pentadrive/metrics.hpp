#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "pentadrive/control.hpp"
#include "pentadrive/errors.hpp"

namespace pentadrive {

/// Uniformly sampled step-test trace, the input to all indicators.
/// step_onset is the index of the first sample after the reference step.
struct Trace {
  std::vector<double> t;
  std::vector<double> omega_ref;
  std::vector<double> omega_m;
  std::vector<double> torque;
  std::vector<double> torque_ref;
  std::vector<double> e_x;  // x-y current error; references are zero, so this
  std::vector<double> e_y;  // is just the measured x-y current
  std::vector<int> sc;
  double ts = 100e-6;
  std::size_t step_onset = 0;
  bool failed = false;  // divergence marker; indicators become penalties

  std::size_t size() const { return t.size(); }

  void validate() const {
    const std::size_t n = size();
    if (n < 2) throw ConfigError("trace needs at least 2 samples");
    if (omega_ref.size() != n || omega_m.size() != n || torque.size() != n ||
        torque_ref.size() != n || e_x.size() != n || e_y.size() != n ||
        sc.size() != n)
      throw ConfigError("trace columns have mismatched lengths");
    if (step_onset >= n) throw ConfigError("trace step onset out of range");
  }
};

/// The six per-test performance numbers.
struct IndicatorVector {
  double po = 0.0;    // speed overshoot (%)
  double tr = 0.0;    // rise time (s)
  double itae = 0.0;  // time-weighted relative speed error (dimensionless)
  double rt = 0.0;    // torque ripple (N m, RMS)
  double exy = 0.0;   // x-y harmonic content (A, RMS)
  double asf = 0.0;   // average per-leg switching frequency (Hz)
  bool rose = true;   // false if the speed never reached the reference
};

/// Indicator values assigned to a diverged (failed) run.
inline IndicatorVector failed_indicators() {
  return IndicatorVector{1e9, 1e9, 1e9, 1e9, 1e9, 1e9, false};
}

inline constexpr double kDefaultIndicatorWindow = 2.0;  // s after step onset

namespace detail {

/// [first, last) sample range of the evaluation window.
inline std::pair<std::size_t, std::size_t> window_range(const Trace& tr,
                                                        double window_s) {
  const std::size_t first = tr.step_onset;
  const auto span = static_cast<std::size_t>(std::llround(window_s / tr.ts));
  const std::size_t last = std::min(tr.size(), first + std::max<std::size_t>(span, 1));
  return {first, last};
}

/// +1 for an upward step, -1 for a downward one.
inline double step_direction(const Trace& tr) {
  const double target = tr.omega_ref[tr.step_onset];
  const double from = tr.omega_m[tr.step_onset];
  return (target >= from) ? 1.0 : -1.0;
}

}  // namespace detail

/// Peak speed deviation beyond the reference, in percent of the reference.
/// Negative when the reference is never reached. Downward steps are measured
/// in the step direction (peak undershoot below the target).
inline double overshoot(const Trace& tr, double window_s = kDefaultIndicatorWindow) {
  tr.validate();
  const auto [first, last] = detail::window_range(tr, window_s);
  const double target = tr.omega_ref[first];
  if (std::abs(target) < 1e-12)
    throw UndefinedIndicator("overshoot undefined for zero speed reference");
  const double dir = detail::step_direction(tr);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = first; k < last; ++k)
    peak = std::max(peak, dir * (tr.omega_m[k] - tr.omega_ref[k]));
  return 100.0 * peak / std::abs(target);
}

/// First time after the step at which the speed reaches the reference
/// (crossing measured in the step direction). The first post-step sample
/// counts as one full period. Returns the window length when the reference
/// is never reached; `rose`, when given, records which case occurred.
inline double rise_time(const Trace& tr, double window_s = kDefaultIndicatorWindow,
                        bool* rose = nullptr) {
  tr.validate();
  const auto [first, last] = detail::window_range(tr, window_s);
  const double dir = detail::step_direction(tr);
  for (std::size_t k = first; k < last; ++k) {
    if (dir * (tr.omega_m[k] - tr.omega_ref[k]) >= 0.0) {
      if (rose) *rose = true;
      return static_cast<double>(k - first + 1) * tr.ts;
    }
  }
  if (rose) *rose = false;
  return static_cast<double>(last - first) * tr.ts;
}

/// Sample-index-weighted mean relative speed error:
/// (1/N) * sum_k k * |w*(k) - w(k)| / max(|w*(k)|, eps), k = 1 at the first
/// post-step sample. Depends on the sampling rate by construction.
inline double itae(const Trace& tr, double window_s = kDefaultIndicatorWindow) {
  tr.validate();
  const auto [first, last] = detail::window_range(tr, window_s);
  const double eps = 1e-3;
  const auto n = static_cast<double>(last - first);
  if (n <= 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t k = first; k < last; ++k) {
    const double rel = std::abs(tr.omega_ref[k] - tr.omega_m[k]) /
                       std::max(std::abs(tr.omega_ref[k]), eps);
    acc += rel * static_cast<double>(k - first + 1);
  }
  return acc / n;
}

/// RMS deviation of the produced torque from its reference (N m).
inline double torque_ripple(const Trace& tr, double window_s = kDefaultIndicatorWindow) {
  tr.validate();
  const auto [first, last] = detail::window_range(tr, window_s);
  if (last == first) return 0.0;
  double acc = 0.0;
  for (std::size_t k = first; k < last; ++k) {
    const double d = tr.torque_ref[k] - tr.torque[k];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(last - first));
}

/// RMS magnitude of the x-y current error (A).
inline double harmonic_content(const Trace& tr, double window_s = kDefaultIndicatorWindow) {
  tr.validate();
  const auto [first, last] = detail::window_range(tr, window_s);
  if (last == first) return 0.0;
  double acc = 0.0;
  for (std::size_t k = first; k < last; ++k)
    acc += tr.e_x[k] * tr.e_x[k] + tr.e_y[k] * tr.e_y[k];
  return std::sqrt(acc / static_cast<double>(last - first));
}

/// Mean per-leg switching frequency: sum(SC) / (5 * N * Ts). Bounded by 1/Ts.
inline double avg_switching_freq(const Trace& tr, double window_s = kDefaultIndicatorWindow) {
  tr.validate();
  const auto [first, last] = detail::window_range(tr, window_s);
  if (last == first) return 0.0;
  long total = 0;
  for (std::size_t k = first; k < last; ++k) total += tr.sc[k];
  return static_cast<double>(total) /
         (5.0 * static_cast<double>(last - first) * tr.ts);
}

/// All six indicators over the post-step window.
inline IndicatorVector compute_all(const Trace& tr,
                                   double window_s = kDefaultIndicatorWindow) {
  if (tr.failed) return failed_indicators();
  IndicatorVector out;
  out.po = overshoot(tr, window_s);
  out.tr = rise_time(tr, window_s, &out.rose);
  out.itae = itae(tr, window_s);
  out.rt = torque_ripple(tr, window_s);
  out.exy = harmonic_content(tr, window_s);
  out.asf = avg_switching_freq(tr, window_s);
  return out;
}

/// Builds a Trace from closed-loop log records. The step onset is detected as
/// the first sample whose speed reference differs from the initial one, or 0
/// if the reference never changes.
inline Trace trace_from_records(const std::vector<LogRecord>& records, double ts) {
  Trace tr;
  tr.ts = ts;
  const std::size_t n = records.size();
  tr.t.reserve(n);
  tr.omega_ref.reserve(n);
  tr.omega_m.reserve(n);
  tr.torque.reserve(n);
  tr.torque_ref.reserve(n);
  tr.e_x.reserve(n);
  tr.e_y.reserve(n);
  tr.sc.reserve(n);
  for (const LogRecord& r : records) {
    tr.t.push_back(r.t);
    tr.omega_ref.push_back(r.omega_ref);
    tr.omega_m.push_back(r.omega_m);
    tr.torque.push_back(r.torque);
    tr.torque_ref.push_back(r.torque_ref);
    tr.e_x.push_back(r.i_x_ref - r.i_x);
    tr.e_y.push_back(r.i_y_ref - r.i_y);
    tr.sc.push_back(r.sc);
  }
  tr.step_onset = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (tr.omega_ref[k] != tr.omega_ref[0]) {
      tr.step_onset = k;
      break;
    }
  }
  return tr;
}

}  // namespace pentadrive
