// Fit an OU process from one long path, then forecast a shifted cloud of
// particles one time unit ahead and compare with the exact transition law.

#include <cmath>
#include <iostream>
#include <random>

#include "dpdd/pipeline.hpp"
#include "dpdd/sim.hpp"

int main() {
  using namespace dpdd;
  const double theta = 1.0, sigma = 0.7;

  // 100k recorded points, 0.1 time units apart.
  const Points path = ou_trajectory(100000, theta, sigma, 0.01, 10, 42);
  const TransitionPairs pairs = pairs_from_trajectory(path);
  DpddConfig cfg;
  cfg.dt = 0.1;
  cfg.truncation = TruncationRule::fixed(2);
  const DpddFit fit = fit_dpdd(pairs, pairs.current, cfg);

  std::cout << "rates:";
  for (const auto& m : fit.model.modes) std::cout << ' ' << m.rate.real();
  std::cout << "  (exact -1, -2)\n";

  // Particles started far from equilibrium.
  Rng rng = make_rng(7, "demo");
  std::normal_distribution<double> start(1.0, 0.2);
  Points now(2000, 1);
  for (Index i = 0; i < now.rows(); ++i) now(i, 0) = start(rng);

  const double sd_inf = sigma / std::sqrt(2.0 * theta);
  for (double h : {0.0, 0.5, 1.0, 2.0}) {
    const ForecastDensity f = fit.forecast(now, h);
    const double a = std::exp(-theta * h);
    const double mean = a * 1.0;
    const double sd = std::sqrt(a * a * 0.04 + sd_inf * sd_inf * (1.0 - a * a));
    std::cout << "h=" << h << "  median " << f.quantile(0.5) << " (exact " << mean << ")"
              << "  IQR " << f.quantile(0.75) - f.quantile(0.25) << " (exact " << 1.3489795 * sd << ")"
              << "  clipped " << f.clipped_mass << '\n';
  }
}
