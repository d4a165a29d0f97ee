#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dpdd/common.hpp"
#include "dpdd/pipeline.hpp"

namespace dpdd {

struct MixingTime {
  Index lag = 1;
  /// The autocorrelation never fell below 1/e within half the series; lag
  /// is then length / 2.
  bool truncated = false;
};

/// Smallest lag whose sample autocorrelation has magnitude below 1/e.
inline MixingTime mixing_time(const Eigen::VectorXd& series) {
  const Index n = series.size();
  if (n < 10) throw InvalidArgument("mixing_time: series too short (need >= 10, got " + std::to_string(n) + ")");
  const Eigen::ArrayXd c = series.array() - series.mean();
  const double c0 = c.square().sum();
  const Index limit = n / 2;
  if (c0 > 1e-300 * static_cast<double>(n)) {
    for (Index lag = 1; lag <= limit; ++lag) {
      const double r = (c.head(n - lag) * c.tail(n - lag)).sum() / c0;
      if (std::abs(r) < std::exp(-1.0)) return {lag, false};
    }
  }
  return {limit, true};
}

/// Per-time cross-sectional mean of the first coordinate over snapshots
/// first..last.
inline Eigen::VectorXd summary_series(const DistributionPanel& panel, std::size_t first, std::size_t last) {
  if (last >= panel.size() || first > last) throw InvalidArgument("summary_series: bad snapshot range");
  Eigen::VectorXd s(static_cast<Index>(last - first + 1));
  for (std::size_t t = first; t <= last; ++t) s(static_cast<Index>(t - first)) = panel[t].col(0).mean();
  return s;
}

struct WindowConfig {
  Index window_length = 0;
  Index mixing_time = 0;
  double min_multiplier = 2.0;
  double max_multiplier = 5.0;

  /// W = multiplier * tau_mix, multiplier within [min, max].
  static WindowConfig from_mixing_time(Index tau, double multiplier = 3.0) {
    WindowConfig w;
    if (tau < 1) throw InvalidArgument("window: mixing time must be >= 1");
    if (multiplier < w.min_multiplier || multiplier > w.max_multiplier)
      throw InvalidArgument("window: multiplier outside [2, 5]");
    w.mixing_time = tau;
    w.window_length = std::max<Index>(2, static_cast<Index>(std::lround(multiplier * static_cast<double>(tau))));
    return w;
  }
};

/// Refit DPDD on snapshots t-W+1..t and forecast h steps ahead from D_t.
/// Only data with time index <= t is read.
inline ForecastDensity sw_dpdd_forecast(const DistributionPanel& panel, std::size_t t, Index window, double h,
                                        const DpddConfig& cfg = {}) {
  if (window < 2) throw InvalidArgument("sw_dpdd_forecast: window must be >= 2");
  if (t >= panel.size()) throw InvalidArgument("sw_dpdd_forecast: origin beyond panel");
  if (static_cast<Index>(t) + 1 < window)
    throw InvalidArgument("sw_dpdd_forecast: insufficient history for window " + std::to_string(window) + " at t = " +
                          std::to_string(t));
  const std::size_t first = t + 1 - static_cast<std::size_t>(window);
  const DpddFit fit = fit_dpdd(panel, first, t, cfg);
  return fit.forecast(panel[t], h);
}

}  // namespace dpdd
