#pragma once

#include <memory>
#include <optional>

#include "dpdd/basis.hpp"
#include "dpdd/common.hpp"
#include "dpdd/density.hpp"
#include "dpdd/forecast.hpp"
#include "dpdd/koopman.hpp"
#include "dpdd/lattice.hpp"

namespace dpdd {

/// End-to-end settings for a DPDD fit.
struct DpddConfig {
  BasisKind basis = BasisKind::hermite;
  /// 0 picks 4 for 1D data and 3 otherwise.
  int degree = 0;
  TruncationRule truncation = TruncationRule::modulus_ratio(0.9);
  FitOptions fit;
  /// Likelihood cross-validated KDE bandwidth instead of Silverman.
  bool cv_bandwidth = false;
  /// Shrink the KDE so its variance matches the data (see variance_corrected).
  bool variance_correction = true;
  double dt = 1.0;
  /// Lattice points per axis for reconstruction, 0 = default.
  Index lattice_points = 0;
  /// Fixed standardization for the dictionary; default is the mean/std of
  /// the KDE samples.
  std::optional<Standardization> standardization;

  int degree_for(int dim) const { return degree > 0 ? degree : (dim == 1 ? 4 : 3); }
};

struct DpddFit {
  KoopmanModel model;  // truncated
  Lattice lattice;

  ForecastDensity forecast(const Points& samples, double h) const { return dpdd_forecast(model, samples, h, lattice); }
};

/// KDE on `kde_samples`, importance weights at the pair origins, weighted
/// EDMD, truncation.
inline DpddFit fit_dpdd(const TransitionPairs& pairs, const Points& kde_samples, const DpddConfig& cfg = {}) {
  if (kde_samples.cols() != pairs.dim()) throw InvalidArgument("fit_dpdd: sample dimension mismatch");
  KdeModel base = cfg.cv_bandwidth ? kde_fit_cv(kde_samples) : kde_fit(kde_samples);
  auto kde = std::make_shared<const KdeModel>(cfg.variance_correction ? variance_corrected(base) : std::move(base));
  const int d = pairs.dim();
  const Standardization s = cfg.standardization ? *cfg.standardization : Standardization::from_samples(kde_samples);
  const Dictionary dict(cfg.basis, cfg.degree_for(d), d, s);
  const WeightVector w = importance_weights(*kde, pairs.current);
  const MomentMatrices m = moment_matrices(pairs, w, dict);
  KoopmanModel model = truncate_modes(fit_koopman(m, dict, cfg.dt, cfg.fit, kde), cfg.truncation);
  Lattice grid = default_lattice(*kde, cfg.lattice_points);
  return {std::move(model), std::move(grid)};
}

/// Fit on snapshots first..last of a trajectory-linked panel.
inline DpddFit fit_dpdd(const DistributionPanel& panel, std::size_t first, std::size_t last,
                        const DpddConfig& cfg = {}) {
  return fit_dpdd(pairs_from_panel(panel, first, last), pooled_samples(panel, first, last), cfg);
}

}  // namespace dpdd
