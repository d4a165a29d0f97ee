#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dpdd/common.hpp"
#include "dpdd/forecast.hpp"
#include "dpdd/quantile.hpp"

namespace dpdd {

inline constexpr Index kAssignmentSizeCap = 2000;
inline constexpr Index kQuantileGridSize = 1024;

/// Square linear assignment (Hungarian method with shortest augmenting
/// paths and potentials, O(n^3)). Returns column assigned to each row.
inline std::vector<Index> solve_assignment(const Eigen::MatrixXd& cost) {
  const Index n = cost.rows();
  if (cost.cols() != n) throw InvalidArgument("solve_assignment: cost matrix must be square");
  if (n == 0) return {};
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c = cost;
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual start.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> match(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  std::vector<double> minv(static_cast<std::size_t>(n + 1));
  std::vector<char> used(static_cast<std::size_t>(n + 1));
  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) continue;
        const double cur = c(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[sj];
        if (cur < minv[sj]) {
          minv[sj] = cur;
          way[sj] = j0;
        }
        if (minv[sj] < delta) {
          delta = minv[sj];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        const auto sj = static_cast<std::size_t>(j);
        if (used[sj]) {
          u[static_cast<std::size_t>(match[sj])] += delta;
          v[sj] -= delta;
        } else {
          minv[sj] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_to_col(static_cast<std::size_t>(n));
  for (Index j = 1; j <= n; ++j) row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

namespace detail {

inline std::vector<double> sorted_copy(const Eigen::Ref<const Eigen::VectorXd>& x) {
  std::vector<double> s(x.data(), x.data() + x.size());
  std::sort(s.begin(), s.end());
  return s;
}

inline double trapezoid_l2_squared(const Eigen::VectorXd& grid, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd w = trapezoid_weights(grid);
  return (w.array() * (a - b).array().square()).sum();
}

/// Lexicographic comparison used to put the two arguments of a symmetric
/// distance in a canonical order.
inline bool points_less(const Points& a, const Points& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != b(i, j)) return a(i, j) < b(i, j);
  return false;
}

}  // namespace detail

/// W2 between two 1D sample sets. Equal sizes: sorted pairing (exact).
/// Unequal sizes: interpolated empirical quantiles on a common 1024-point
/// midpoint grid, trapezoid rule.
inline double w2_sorted_samples(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() == 0 || b.size() == 0) throw InvalidArgument("w2_sorted_samples: empty input");
  if (a.size() == b.size()) {
    const auto sa = detail::sorted_copy(a);
    const auto sb = detail::sorted_copy(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) acc += (sa[i] - sb[i]) * (sa[i] - sb[i]);
    return std::sqrt(acc / static_cast<double>(sa.size()));
  }
  const Eigen::VectorXd u = midpoint_probability_grid(kQuantileGridSize);
  const QuantileCurve qa = empirical_quantiles(a, u);
  const QuantileCurve qb = empirical_quantiles(b, u);
  return std::sqrt(detail::trapezoid_l2_squared(u, qa.values, qb.values));
}

/// sqrt of the trapezoid integral of (Q_a(u) - Q_b(u))^2 over the shared grid.
inline double w2_quantile_grid(const QuantileCurve& qa, const QuantileCurve& qb) {
  if (qa.grid.size() != qb.grid.size() || qa.grid != qb.grid)
    throw InvalidArgument("w2_quantile_grid: quantile curves are on different grids");
  if (qa.values.size() != qa.grid.size() || qb.values.size() != qb.grid.size())
    throw InvalidArgument("w2_quantile_grid: curve values do not match grid");
  return std::sqrt(detail::trapezoid_l2_squared(qa.grid, qa.values, qb.values));
}

/// Exact W2 between two equal-size uniform empirical measures in R^d via
/// optimal assignment on squared Euclidean cost.
inline double w2_assignment(const Points& a, const Points& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("w2_assignment: sample sets must have equal size");
  if (a.cols() != b.cols()) throw InvalidArgument("w2_assignment: dimension mismatch");
  if (a.rows() == 0) throw InvalidArgument("w2_assignment: empty input");
  if (a.rows() > kAssignmentSizeCap)
    throw InvalidArgument("w2_assignment: size " + std::to_string(a.rows()) + " exceeds cap " +
                          std::to_string(kAssignmentSizeCap));
  const bool swap = detail::points_less(b, a);
  const Points& x = swap ? b : a;
  const Points& y = swap ? a : b;
  const Index n = x.rows();
  Eigen::MatrixXd cost(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) cost(i, j) = (x.row(i) - y.row(j)).squaredNorm();
  const auto match = solve_assignment(cost);
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) acc += cost(i, match[static_cast<std::size_t>(i)]);
  return std::sqrt(acc / static_cast<double>(n));
}

/// n quasi-uniform points in (0,1)^d: first coordinate stratified midpoints,
/// second a golden-ratio rotation (Fibonacci-type lattice).
inline Points quasi_uniform_points(Index n, int d) {
  if (d < 1 || d > 2) throw InvalidArgument("quasi_uniform_points: supported for d in {1, 2}");
  constexpr double golden = 0.61803398874989484820;
  Points u(n, d);
  for (Index i = 0; i < n; ++i) {
    u(i, 0) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    if (d == 2) {
      const double t = 0.5 + static_cast<double>(i) * golden;
      u(i, 1) = t - std::floor(t);
    }
  }
  return u;
}

/// W2^2 between an observed sample set and a gridded forecast. 1D: quantile
/// curves on `u_grid`. 2D: exact assignment against the forecast evaluated
/// at n quasi-uniform points (n = number of observed samples).
inline double w2_squared_to_forecast(const Points& observed, const ForecastDensity& forecast,
                                     const Eigen::VectorXd& u_grid) {
  if (observed.cols() != forecast.dim()) throw InvalidArgument("mse_w2: dimension mismatch");
  if (forecast.dim() == 1) {
    const QuantileCurve qo = empirical_quantiles(observed.col(0), u_grid);
    const QuantileCurve qf = forecast.quantiles(u_grid);
    const double w = w2_quantile_grid(qo, qf);
    return w * w;
  }
  if (forecast.dim() == 2) {
    const Points draws = forecast.transform_uniforms(quasi_uniform_points(observed.rows(), 2));
    const double w = w2_assignment(observed, draws);
    return w * w;
  }
  throw InvalidArgument("mse_w2: dimension " + std::to_string(forecast.dim()) + " unsupported (d <= 2)");
}

/// Mean of squared W2 values.
inline double mean_squared_error(const std::vector<double>& w2_squared) {
  if (w2_squared.empty()) throw InvalidArgument("mse_w2: empty test set");
  return std::accumulate(w2_squared.begin(), w2_squared.end(), 0.0) / static_cast<double>(w2_squared.size());
}

/// MSE_W2 of one forecast against every test distribution.
inline double mse_w2(const std::vector<Points>& tests, const ForecastDensity& forecast,
                     const Eigen::VectorXd& u_grid = midpoint_probability_grid(kQuantileGridSize)) {
  if (tests.empty()) throw InvalidArgument("mse_w2: empty test set");
  std::vector<double> e;
  for (const auto& t : tests) e.push_back(w2_squared_to_forecast(t, forecast, u_grid));
  return mean_squared_error(e);
}

/// MSE_W2 with one forecast per test time.
inline double mse_w2(const std::vector<Points>& tests, const std::vector<ForecastDensity>& forecasts,
                     const Eigen::VectorXd& u_grid = midpoint_probability_grid(kQuantileGridSize)) {
  if (tests.empty()) throw InvalidArgument("mse_w2: empty test set");
  if (tests.size() != forecasts.size()) throw InvalidArgument("mse_w2: need one forecast per test distribution");
  std::vector<double> e;
  for (std::size_t i = 0; i < tests.size(); ++i) e.push_back(w2_squared_to_forecast(tests[i], forecasts[i], u_grid));
  return mean_squared_error(e);
}

}  // namespace dpdd
