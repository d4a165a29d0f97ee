#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dpdd/common.hpp"

namespace dpdd {

/// Quantile function sampled on a strictly increasing probability grid in
/// (0, 1). Values are nondecreasing.
struct QuantileCurve {
  Eigen::VectorXd grid;
  Eigen::VectorXd values;

  Index size() const { return grid.size(); }

  bool monotone(double slack = 1e-12) const {
    for (Index i = 1; i < values.size(); ++i)
      if (values(i) < values(i - 1) - slack) return false;
    return true;
  }
};

/// n equispaced probabilities in [lo, hi].
inline Eigen::VectorXd uniform_probability_grid(Index n, double lo, double hi) {
  if (n < 2 || !(lo > 0.0) || !(hi < 1.0) || !(lo < hi)) throw InvalidArgument("probability grid must lie in (0,1)");
  return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

/// Cell midpoints (i + 1/2) / n, i = 0..n-1.
inline Eigen::VectorXd midpoint_probability_grid(Index n = 1024) {
  if (n < 2) throw InvalidArgument("probability grid needs at least 2 points");
  Eigen::VectorXd u(n);
  for (Index i = 0; i < n; ++i) u(i) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  return u;
}

inline void check_probability_grid(const Eigen::VectorXd& u) {
  if (u.size() < 2) throw InvalidArgument("probability grid needs at least 2 points");
  for (Index i = 0; i < u.size(); ++i) {
    if (!(u(i) > 0.0 && u(i) < 1.0)) throw InvalidArgument("probability grid must lie in (0,1)");
    if (i > 0 && !(u(i) > u(i - 1))) throw InvalidArgument("probability grid must be strictly increasing");
  }
}

/// Empirical quantile of sorted data with linear interpolation between order
/// statistics: position (n - 1) u, so the median of 1..100 is 50.5.
inline double sorted_quantile(const std::vector<double>& sorted, double u) {
  const std::size_t n = sorted.size();
  if (n == 0) throw InvalidArgument("quantile of empty sample");
  if (n == 1 || u <= 0.0) return sorted.front();
  if (u >= 1.0) return sorted.back();
  const double pos = static_cast<double>(n - 1) * u;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= n) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline QuantileCurve empirical_quantiles(const Eigen::Ref<const Eigen::VectorXd>& samples, const Eigen::VectorXd& grid) {
  if (samples.size() == 0) throw InvalidArgument("empirical quantiles: empty sample set");
  std::vector<double> s(samples.data(), samples.data() + samples.size());
  std::sort(s.begin(), s.end());
  QuantileCurve q{grid, Eigen::VectorXd(grid.size())};
  for (Index i = 0; i < grid.size(); ++i) q.values(i) = sorted_quantile(s, grid(i));
  return q;
}

/// Linear interpolation of a quantile curve at u, held constant beyond the
/// grid ends.
inline double interpolate_quantile(const QuantileCurve& q, double u) {
  const Index n = q.size();
  if (n == 0) throw InvalidArgument("interpolate_quantile: empty curve");
  if (u <= q.grid(0)) return q.values(0);
  if (u >= q.grid(n - 1)) return q.values(n - 1);
  const Index i = std::upper_bound(q.grid.data(), q.grid.data() + n, u) - q.grid.data();
  const double frac = (u - q.grid(i - 1)) / (q.grid(i) - q.grid(i - 1));
  return q.values(i - 1) + frac * (q.values(i) - q.values(i - 1));
}

/// Trapezoid-rule weights on an arbitrary increasing grid.
inline Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
  const Index n = grid.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (Index i = 0; i + 1 < n; ++i) {
    const double half = 0.5 * (grid(i + 1) - grid(i));
    w(i) += half;
    w(i + 1) += half;
  }
  return w;
}

}  // namespace dpdd
