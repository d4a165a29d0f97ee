#pragma once

#include <cmath>
#include <initializer_list>
#include <numbers>
#include <random>

#include "dpdd/common.hpp"

namespace dpdd::test {

inline Points column(std::initializer_list<double> v) {
  Points p(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) p(i++, 0) = x;
  return p;
}

inline Points normal_points(Index n, int d, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
  Rng rng = make_rng(seed, "test-normal");
  std::normal_distribution<double> z(mean, sd);
  Points p(n, d);
  for (Index i = 0; i < n; ++i)
    for (int a = 0; a < d; ++a) p(i, a) = z(rng);
  return p;
}

inline double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Bisection is slow but has no approximation error worth mentioning.
inline double normal_quantile(double u) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// OU path sampled with the exact Gaussian transition, stationary start.
inline Points exact_ou_path(Index n, double theta, double sigma, double step, std::uint64_t seed) {
  Rng rng = make_rng(seed, "test-ou");
  std::normal_distribution<double> z(0.0, 1.0);
  const double sd = sigma / std::sqrt(2.0 * theta);
  const double a = std::exp(-theta * step);
  const double e = sd * std::sqrt(1.0 - a * a);
  Points x(n + 1, 1);
  x(0, 0) = sd * z(rng);
  for (Index k = 1; k <= n; ++k) x(k, 0) = a * x(k - 1, 0) + e * z(rng);
  return x;
}

}  // namespace dpdd::test
