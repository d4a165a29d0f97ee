#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dpdd/common.hpp"
#include "dpdd/lattice.hpp"

namespace dpdd {

/// Gaussian product-kernel density estimate
///   p(x) = 1/(M prod_i h_i) sum_k prod_i K((x_i - z_ki) / h_i).
/// Immutable after construction.
class KdeModel {
 public:
  /// Workloads (queries x samples) above this are evaluated on a binned grid.
  static constexpr double kExactBudget = 1e8;
  static constexpr double kDensityFloor = 1e-300;

  KdeModel(Points samples, Eigen::VectorXd bandwidth) : samples_(std::move(samples)), h_(std::move(bandwidth)) {
    if (samples_.rows() == 0) throw InvalidArgument("kde_fit: empty sample set");
    if (h_.size() != samples_.cols()) throw InvalidArgument("kde_fit: bandwidth dimension mismatch");
    for (Index a = 0; a < h_.size(); ++a)
      if (!(h_(a) > 0.0) || !std::isfinite(h_(a)))
        throw InvalidArgument("kde_fit: bandwidth must be positive on axis " + std::to_string(a));
    if (!samples_.allFinite()) throw InvalidArgument("kde_fit: non-finite sample");
    norm_ = 1.0 / static_cast<double>(samples_.rows());
    for (Index a = 0; a < h_.size(); ++a) norm_ /= h_(a) * std::sqrt(2.0 * std::numbers::pi);
  }

  int dim() const { return static_cast<int>(samples_.cols()); }
  Index sample_count() const { return samples_.rows(); }
  const Points& samples() const { return samples_; }
  const Eigen::VectorXd& bandwidth() const { return h_; }

  Eigen::VectorXd sample_min() const { return samples_.colwise().minCoeff().transpose(); }
  Eigen::VectorXd sample_max() const { return samples_.colwise().maxCoeff().transpose(); }

  template <class Derived>
  double operator()(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != dim()) throw InvalidArgument("kde: query dimension mismatch");
    Points q(1, dim());
    for (int a = 0; a < dim(); ++a) q(0, a) = x(a);
    return evaluate_exact(q)(0);
  }

  /// Density at each row of x. Large workloads in d <= 2 go through the
  /// binned evaluator; everything else is summed exactly.
  Eigen::VectorXd evaluate(const Points& x) const {
    check_dim(x);
    const double work = static_cast<double>(x.rows()) * static_cast<double>(samples_.rows());
    if (work > kExactBudget && dim() <= 2) return evaluate_binned(x);
    return evaluate_exact(x);
  }

  Eigen::VectorXd evaluate_exact(const Points& x) const {
    check_dim(x);
    const Index m = samples_.rows();
    Eigen::MatrixXd scaled(m, dim());
    for (int a = 0; a < dim(); ++a) scaled.col(a) = samples_.col(a) / h_(a);
    Eigen::VectorXd out(x.rows());
    Eigen::ArrayXd d2(m);
    for (Index i = 0; i < x.rows(); ++i) {
      d2.setZero();
      for (int a = 0; a < dim(); ++a) d2 += (scaled.col(a).array() - x(i, a) / h_(a)).square();
      out(i) = norm_ * (-0.5 * d2).exp().sum();
    }
    return out;
  }

  /// Linear binning onto a regular grid, separable Gaussian convolution and
  /// (bi)linear interpolation. Relative error is O((spacing/h)^2); query
  /// points outside the grid are evaluated exactly.
  Eigen::VectorXd evaluate_binned(const Points& x) const {
    check_dim(x);
    if (dim() > 2) return evaluate_exact(x);
    const Index g = dim() == 1 ? 4096 : 512;
    Eigen::VectorXd lo(dim()), step(dim());
    for (int a = 0; a < dim(); ++a) {
      lo(a) = samples_.col(a).minCoeff() - 6.0 * h_(a);
      const double hi = samples_.col(a).maxCoeff() + 6.0 * h_(a);
      step(a) = (hi - lo(a)) / static_cast<double>(g - 1);
    }
    const Index gy = dim() == 2 ? g : 1;
    Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(g, gy);
    for (Index k = 0; k < samples_.rows(); ++k) {
      const double fx = (samples_(k, 0) - lo(0)) / step(0);
      const Index ix = std::min<Index>(static_cast<Index>(fx), g - 2);
      const double tx = fx - static_cast<double>(ix);
      if (dim() == 1) {
        grid(ix, 0) += 1.0 - tx;
        grid(ix + 1, 0) += tx;
      } else {
        const double fy = (samples_(k, 1) - lo(1)) / step(1);
        const Index iy = std::min<Index>(static_cast<Index>(fy), g - 2);
        const double ty = fy - static_cast<double>(iy);
        grid(ix, iy) += (1.0 - tx) * (1.0 - ty);
        grid(ix + 1, iy) += tx * (1.0 - ty);
        grid(ix, iy + 1) += (1.0 - tx) * ty;
        grid(ix + 1, iy + 1) += tx * ty;
      }
    }
    grid = convolve_axis(grid, kernel_taps(step(0), h_(0)), 0);
    if (dim() == 2) grid = convolve_axis(grid, kernel_taps(step(1), h_(1)), 1);
    grid *= norm_;

    Eigen::VectorXd out(x.rows());
    std::vector<Index> outside;
    for (Index i = 0; i < x.rows(); ++i) {
      const double fx = (x(i, 0) - lo(0)) / step(0);
      const double fy = dim() == 2 ? (x(i, 1) - lo(1)) / step(1) : 0.0;
      if (fx < 0.0 || fx > static_cast<double>(g - 1) || fy < 0.0 || fy > static_cast<double>(gy - 1)) {
        outside.push_back(i);
        continue;
      }
      const Index ix = std::min<Index>(static_cast<Index>(fx), g - 2);
      const double tx = fx - static_cast<double>(ix);
      if (dim() == 1) {
        out(i) = (1.0 - tx) * grid(ix, 0) + tx * grid(ix + 1, 0);
      } else {
        const Index iy = std::min<Index>(static_cast<Index>(fy), gy - 2);
        const double ty = fy - static_cast<double>(iy);
        out(i) = (1.0 - tx) * (1.0 - ty) * grid(ix, iy) + tx * (1.0 - ty) * grid(ix + 1, iy) +
                 (1.0 - tx) * ty * grid(ix, iy + 1) + tx * ty * grid(ix + 1, iy + 1);
      }
      out(i) = std::max(out(i), 0.0);
    }
    if (!outside.empty()) {
      Points rest(static_cast<Index>(outside.size()), dim());
      for (std::size_t r = 0; r < outside.size(); ++r) rest.row(static_cast<Index>(r)) = x.row(outside[r]);
      const Eigen::VectorXd v = evaluate_exact(rest);
      for (std::size_t r = 0; r < outside.size(); ++r) out(outside[r]) = v(static_cast<Index>(r));
    }
    return out;
  }

  /// Density at every lattice point (lattice ordering). In 2D the product
  /// kernel factorizes, so the lattice sum is a matrix product.
  Eigen::VectorXd evaluate_lattice(const Lattice& lattice) const {
    if (lattice.dim() != dim()) throw InvalidArgument("kde: lattice dimension mismatch");
    if (dim() != 2) return evaluate(lattice.points());
    const Eigen::VectorXd xs = lattice.axis_coordinates(0);
    const Eigen::VectorXd ys = lattice.axis_coordinates(1);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(xs.size(), ys.size());
    const Index block = 16384;
    for (Index start = 0; start < samples_.rows(); start += block) {
      const Index len = std::min(block, samples_.rows() - start);
      Eigen::MatrixXd kx(xs.size(), len), ky(ys.size(), len);
      for (Index k = 0; k < len; ++k) {
        kx.col(k) = (-0.5 * ((xs.array() - samples_(start + k, 0)) / h_(0)).square()).exp().matrix();
        ky.col(k) = (-0.5 * ((ys.array() - samples_(start + k, 1)) / h_(1)).square()).exp().matrix();
      }
      acc.noalias() += kx * ky.transpose();
    }
    Eigen::VectorXd out(lattice.size());
    for (Index i = 0; i < xs.size(); ++i)
      for (Index j = 0; j < ys.size(); ++j) out(i * ys.size() + j) = norm_ * acc(i, j);
    return out;
  }

 private:
  void check_dim(const Points& x) const {
    if (x.cols() != dim())
      throw InvalidArgument("kde: query dimension " + std::to_string(x.cols()) + " does not match model dimension " +
                            std::to_string(dim()));
  }

  static Eigen::VectorXd kernel_taps(double step, double h) {
    const Index half = static_cast<Index>(std::ceil(6.0 * h / step));
    Eigen::VectorXd taps(2 * half + 1);
    for (Index m = -half; m <= half; ++m) {
      const double u = static_cast<double>(m) * step / h;
      taps(m + half) = std::exp(-0.5 * u * u);
    }
    return taps;
  }

  static Eigen::MatrixXd convolve_axis(const Eigen::MatrixXd& in, const Eigen::VectorXd& taps, int axis) {
    const Index half = (taps.size() - 1) / 2;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(in.rows(), in.cols());
    const Index n = axis == 0 ? in.rows() : in.cols();
    for (Index i = 0; i < n; ++i) {
      const Index m0 = std::max<Index>(-half, -i);
      const Index m1 = std::min<Index>(half, n - 1 - i);
      for (Index m = m0; m <= m1; ++m) {
        const double t = taps(m + half);
        if (axis == 0)
          out.row(i) += t * in.row(i + m);
        else
          out.col(i) += t * in.col(i + m);
      }
    }
    return out;
  }

  Points samples_;
  Eigen::VectorXd h_;
  double norm_ = 1.0;
};

/// Rule-of-thumb bandwidth per axis: sigma_i * (4 / ((d + 2) M))^(1 / (d + 4)).
inline Eigen::VectorXd silverman_bandwidth(const Points& samples) {
  const Index m = samples.rows();
  const Index d = samples.cols();
  if (m < 2) throw InvalidArgument("silverman_bandwidth: need at least 2 samples");
  const double factor =
      std::pow(4.0 / (static_cast<double>(d + 2) * static_cast<double>(m)), 1.0 / static_cast<double>(d + 4));
  Eigen::VectorXd h(d);
  for (Index a = 0; a < d; ++a) {
    const double s = sample_stddev(samples.col(a));
    if (!(s > 0.0)) throw InvalidArgument("silverman_bandwidth: axis " + std::to_string(a) + " has zero variance");
    h(a) = s * factor;
  }
  return h;
}

/// Fit a Gaussian KDE; without an explicit bandwidth, Silverman's rule.
inline KdeModel kde_fit(const Points& samples, std::optional<Eigen::VectorXd> bandwidth = std::nullopt) {
  if (samples.rows() == 0) throw InvalidArgument("kde_fit: empty sample set");
  Eigen::VectorXd h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  return KdeModel(samples, std::move(h));
}

/// Same bandwidth, samples shrunk toward their mean per axis by
/// sqrt(1 - h^2 / s^2) so the mixture variance equals the sample variance s^2
/// instead of s^2 + h^2. Axes with h >= s collapse onto the mean.
inline KdeModel variance_corrected(const KdeModel& kde) {
  Points z = kde.samples();
  if (z.rows() < 2) return kde;
  for (Index a = 0; a < z.cols(); ++a) {
    const double mu = z.col(a).mean();
    const double s = sample_stddev(z.col(a));
    const double h = kde.bandwidth()(a);
    const double f = s > 0.0 ? std::sqrt(std::max(0.0, 1.0 - (h * h) / (s * s))) : 1.0;
    z.col(a) = ((z.col(a).array() - mu) * f + mu).matrix();
  }
  return KdeModel(std::move(z), kde.bandwidth());
}

/// k-fold likelihood cross-validation over multiples of the Silverman
/// bandwidth. Folds are assigned round-robin, so the result is deterministic.
inline KdeModel kde_fit_cv(const Points& samples, int folds = 5) {
  if (folds < 2) throw InvalidArgument("kde_fit_cv: need at least 2 folds");
  if (samples.rows() < folds) throw InvalidArgument("kde_fit_cv: fewer samples than folds");
  const Eigen::VectorXd base = silverman_bandwidth(samples);
  const double multipliers[] = {0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0};
  double best_score = -std::numeric_limits<double>::infinity();
  double best_mult = 1.0;
  for (double mult : multipliers) {
    double score = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<Index> train, test;
      for (Index i = 0; i < samples.rows(); ++i) (i % folds == f ? test : train).push_back(i);
      Points tr(static_cast<Index>(train.size()), samples.cols()), te(static_cast<Index>(test.size()), samples.cols());
      for (std::size_t i = 0; i < train.size(); ++i) tr.row(static_cast<Index>(i)) = samples.row(train[i]);
      for (std::size_t i = 0; i < test.size(); ++i) te.row(static_cast<Index>(i)) = samples.row(test[i]);
      const Eigen::VectorXd p = KdeModel(tr, base * mult).evaluate(te);
      for (Index i = 0; i < p.size(); ++i) score += std::log(std::max(p(i), KdeModel::kDensityFloor));
    }
    if (score > best_score) {
      best_score = score;
      best_mult = mult;
    }
  }
  return KdeModel(samples, base * best_mult);
}

/// Normalized nonnegative weights, sum 1.
struct WeightVector {
  Eigen::VectorXd values;
  Index size() const { return values.size(); }
};

/// Normalize unnormalized densities into weights. Values below the density
/// floor are clamped to it; if every value is zero the weights are undefined.
inline WeightVector normalize_weights(const Eigen::VectorXd& densities) {
  if (densities.size() == 0) throw InvalidArgument("importance_weights: empty trajectory");
  if (!densities.allFinite()) throw NumericalError("importance_weights: non-finite density value");
  if (!(densities.maxCoeff() > 0.0))
    throw NumericalError("importance_weights: all densities are numerically zero; weights undefined");
  Eigen::VectorXd w = densities.cwiseMax(KdeModel::kDensityFloor);
  w /= w.sum();
  return {std::move(w)};
}

/// w_k = p_s(z_k) / sum_l p_s(z_l).
inline WeightVector importance_weights(const KdeModel& model, const Points& trajectory) {
  if (trajectory.cols() != model.dim()) throw InvalidArgument("importance_weights: trajectory dimension mismatch");
  return normalize_weights(model.evaluate(trajectory));
}

}  // namespace dpdd
