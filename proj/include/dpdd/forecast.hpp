#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dpdd/common.hpp"
#include "dpdd/density.hpp"
#include "dpdd/koopman.hpp"
#include "dpdd/lattice.hpp"
#include "dpdd/quantile.hpp"

namespace dpdd {

/// Modal coefficients c_j at a time (in the model's time units).
struct ModalCoefficients {
  Eigen::VectorXcd values;
  double time = 0.0;
};

/// Lattice over [min - 3h, max + 3h] of the stationary-density samples,
/// 512 points in 1D and 128 per axis in 2D unless overridden.
inline Lattice default_lattice(const KdeModel& density, Index points_per_axis = 0) {
  const int d = density.dim();
  if (points_per_axis <= 0) points_per_axis = d == 1 ? 512 : d == 2 ? 128 : 32;
  const Eigen::VectorXd pad = 3.0 * density.bandwidth();
  return Lattice(density.sample_min() - pad, density.sample_max() + pad,
                 std::vector<Index>(static_cast<std::size_t>(d), points_per_axis));
}

/// Grid-discretized forecast density. values * cell_measure sums to 1.
struct ForecastDensity {
  Lattice grid;
  Eigen::VectorXd values;
  double horizon = 0.0;
  int mode_count = 0;
  /// Fraction of the raw reconstruction's absolute mass removed by clipping
  /// negative values.
  double clipped_mass = 0.0;

  int dim() const { return grid.dim(); }
  double cell_measure() const { return grid.cell_measure(); }
  double total_mass() const { return values.sum() * grid.cell_measure(); }

  /// Quantile of a 1D forecast. The CDF is the trapezoid integral between
  /// lattice points, so Q(0) and Q(1) are the lattice extremes.
  double quantile(double u) const {
    require_1d();
    return quantile_from_cdf(cdf(), u);
  }

  QuantileCurve quantiles(const Eigen::VectorXd& u) const {
    require_1d();
    const Eigen::VectorXd c = cdf();
    QuantileCurve q{u, Eigen::VectorXd(u.size())};
    for (Index i = 0; i < u.size(); ++i) q.values(i) = quantile_from_cdf(c, u(i));
    for (Index i = 1; i < u.size(); ++i) q.values(i) = std::max(q.values(i), q.values(i - 1));
    return q;
  }

  /// Map uniforms in (0,1)^d (one row per draw) to draws from the density
  /// by sequential conditional inverse CDFs. Each lattice point owns a cell
  /// of width `spacing` centred on it, with constant density inside.
  Points transform_uniforms(const Points& uniforms) const {
    if (uniforms.cols() != dim()) throw InvalidArgument("transform_uniforms: dimension mismatch");
    if (dim() > 2) throw InvalidArgument("transform_uniforms: supported for d <= 2");
    Points out(uniforms.rows(), dim());
    const Index nx = grid.counts[0];
    const Index ny = dim() == 2 ? grid.counts[1] : 1;
    Eigen::VectorXd marginal(nx);
    for (Index i = 0; i < nx; ++i) marginal(i) = values.segment(i * ny, ny).sum();
    for (Index r = 0; r < uniforms.rows(); ++r) {
      double frac = 0.0;
      const Index i = invert_cells(marginal, uniforms(r, 0), frac);
      out(r, 0) = grid.coordinate(0, i) + (frac - 0.5) * grid.spacing(0);
      if (dim() == 2) {
        const Index j = invert_cells(values.segment(i * ny, ny), uniforms(r, 1), frac);
        out(r, 1) = grid.coordinate(1, j) + (frac - 0.5) * grid.spacing(1);
      }
    }
    return out;
  }

 private:
  void require_1d() const {
    if (dim() != 1) throw InvalidArgument("quantile accessor is defined for 1D forecasts only");
  }

  Eigen::VectorXd cdf() const {
    Eigen::VectorXd c(values.size());
    c(0) = 0.0;
    for (Index i = 1; i < values.size(); ++i) c(i) = c(i - 1) + 0.5 * (values(i - 1) + values(i)) * grid.spacing(0);
    return c;
  }

  double quantile_from_cdf(const Eigen::VectorXd& c, double u) const {
    const Index n = values.size();
    if (u <= 0.0) return grid.coordinate(0, 0);
    if (u >= 1.0) return grid.coordinate(0, n - 1);
    const double target = u * c(n - 1);
    const Index i = std::lower_bound(c.data(), c.data() + n, target) - c.data();
    if (i == 0) return grid.coordinate(0, 0);
    if (i >= n) return grid.coordinate(0, n - 1);
    const double frac = (target - c(i - 1)) / (c(i) - c(i - 1));
    return grid.coordinate(0, i - 1) + frac * grid.spacing(0);
  }

  static Index invert_cells(const Eigen::Ref<const Eigen::VectorXd>& mass, double u, double& frac) {
    const double total = mass.sum();
    if (!(total > 0.0)) {
      frac = 0.5;
      return mass.size() / 2;
    }
    const double target = std::clamp(u, 0.0, 1.0) * total;
    double acc = 0.0;
    for (Index i = 0; i < mass.size(); ++i) {
      if (mass(i) > 0.0 && acc + mass(i) >= target) {
        frac = std::clamp((target - acc) / mass(i), 0.0, 1.0);
        return i;
      }
      acc += mass(i);
    }
    Index last = mass.size() - 1;
    while (last > 0 && !(mass(last) > 0.0)) --last;
    frac = 1.0;
    return last;
  }
};

/// c_j = (1/n) sum_x phi_j(x) - E_{p_s}[phi_j]: the plug-in estimate of
/// <q_T - 1, conj(phi_j)> in L2(p_s) with each eigenfunction centred under
/// the stationary estimate. Centring makes the reconstruction integrate to
/// one before clipping and removes the bias that sampling noise in p_s
/// would otherwise feed into every mode.
inline ModalCoefficients project_coefficients(const KoopmanModel& model, const Points& samples) {
  if (samples.rows() == 0) throw InvalidArgument("project_coefficients: empty sample set");
  if (samples.cols() != model.dim()) throw InvalidArgument("project_coefficients: sample dimension mismatch");
  const Eigen::MatrixXcd phi = model.eigenfunctions(samples);
  Eigen::VectorXcd c = phi.colwise().mean().transpose();
  for (int j = 0; j < model.mode_count(); ++j) c(j) -= model.modes[static_cast<std::size_t>(j)].stationary_mean;
  return {c, 0.0};
}

/// c_j(T + h) = exp(lambda_j h) c_j(T); h in the time units of model.dt.
inline ModalCoefficients propagate_coefficients(const ModalCoefficients& c, const KoopmanModel& model, double h) {
  if (!(h >= 0.0)) throw InvalidArgument("propagate_coefficients: horizon must be nonnegative");
  if (c.values.size() != model.mode_count()) throw InvalidArgument("propagate_coefficients: coefficient count mismatch");
  if (h == 0.0) return c;
  ModalCoefficients out{Eigen::VectorXcd(c.values.size()), c.time + h};
  for (int j = 0; j < model.mode_count(); ++j) {
    const auto& mode = model.modes[static_cast<std::size_t>(j)];
    const Complex factor = std::abs(mode.eigenvalue) == 0.0 ? Complex(0.0, 0.0) : std::exp(mode.rate * h);
    out.values(j) = factor * c.values(j);
  }
  return out;
}

/// sum_j conj(c_j) phi_j(x) at each point. Pairing each coefficient with the
/// conjugate-side eigenfunction keeps the sum independent of eigenvector
/// phase; for conjugate-paired coefficients it is real.
inline Eigen::VectorXcd modal_sum(const KoopmanModel& model, const ModalCoefficients& c, const Points& x) {
  if (c.values.size() != model.mode_count()) throw InvalidArgument("modal_sum: coefficient count mismatch");
  if (model.mode_count() == 0) return Eigen::VectorXcd::Zero(x.rows());
  return model.eigenfunctions(x) * c.values.conjugate();
}

/// p(x) = p_s(x) (1 + Re sum_j conj(c_j) phi_j(x)) on the lattice, negative
/// values clipped to zero, renormalized to unit mass.
inline ForecastDensity reconstruct_density(const KoopmanModel& model, const ModalCoefficients& c, const Lattice& grid) {
  if (!model.density) throw InvalidArgument("reconstruct_density: model has no stationary density");
  if (grid.dim() != model.dim()) throw InvalidArgument("reconstruct_density: lattice dimension mismatch");
  const Points pts = grid.points();
  const Eigen::VectorXd ps = model.density->evaluate_lattice(grid);
  const Eigen::VectorXd ratio = Eigen::VectorXd::Ones(pts.rows()) + modal_sum(model, c, pts).real();
  Eigen::VectorXd raw = ps.cwiseProduct(ratio);
  if (!raw.allFinite()) throw NumericalError("reconstruct_density: non-finite values");
  const double negative = (-raw.array()).max(0.0).sum();
  const double absolute = raw.cwiseAbs().sum();
  raw = raw.cwiseMax(0.0);
  const double mass = raw.sum() * grid.cell_measure();
  if (!(mass > 0.0)) throw NumericalError("degenerate reconstruction: no positive mass after clipping");
  ForecastDensity f;
  f.grid = grid;
  f.values = raw / mass;
  f.horizon = c.time;
  f.mode_count = model.mode_count();
  f.clipped_mass = absolute > 0.0 ? negative / absolute : 0.0;
  return f;
}

/// Project D_T, propagate by h, reconstruct.
inline ForecastDensity dpdd_forecast(const KoopmanModel& model, const Points& samples, double h, const Lattice& grid) {
  ModalCoefficients c = project_coefficients(model, samples);
  ForecastDensity f = reconstruct_density(model, propagate_coefficients(c, model, h), grid);
  f.horizon = h;
  return f;
}

}  // namespace dpdd
