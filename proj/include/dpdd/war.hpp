#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "dpdd/common.hpp"
#include "dpdd/quantile.hpp"

namespace dpdd {

/// Row t = empirical quantile curve of snapshot t (one axis) on u_grid.
inline Eigen::MatrixXd quantile_matrix(const DistributionPanel& panel, const Eigen::VectorXd& u_grid, int axis = 0) {
  if (panel.empty()) throw InvalidArgument("quantile_matrix: empty panel");
  check_probability_grid(u_grid);
  if (axis < 0 || axis >= panel.dim()) throw InvalidArgument("quantile_matrix: axis out of range");
  Eigen::MatrixXd q(static_cast<Index>(panel.size()), u_grid.size());
  for (std::size_t t = 0; t < panel.size(); ++t) {
    if (panel[t].rows() == 0)
      throw InvalidArgument("quantile_matrix: distribution at time " + std::to_string(t) + " is empty");
    q.row(static_cast<Index>(t)) = empirical_quantiles(panel[t].col(axis), u_grid).values.transpose();
  }
  return q;
}

/// Functional PCA of quantile curves under the trapezoid inner product on
/// the probability grid.
struct FpcaModel {
  QuantileCurve mean_curve;
  Eigen::VectorXd weights;      // quadrature weights of the grid
  Eigen::MatrixXd components;   // U x K, orthonormal under `weights`
  Eigen::VectorXd eigenvalues;  // all eigenvalues, descending
  int retained = 0;
  double explained_variance = 1.0;

  Eigen::VectorXd scores(const Eigen::VectorXd& curve) const {
    if (curve.size() != mean_curve.size()) throw InvalidArgument("fpca: curve length mismatch");
    return components.transpose() * weights.cwiseProduct(curve - mean_curve.values);
  }

  Eigen::VectorXd reconstruct(const Eigen::VectorXd& s) const {
    if (s.size() != retained) throw InvalidArgument("fpca: score length mismatch");
    return mean_curve.values + components * s;
  }
};

/// Retains the smallest K whose cumulative eigenvalue fraction reaches
/// `threshold`. All-equal rows give K = 0.
inline FpcaModel fpca(const Eigen::MatrixXd& curves, const Eigen::VectorXd& u_grid, double threshold = 0.95) {
  const Index nt = curves.rows();
  if (nt < 3) throw InvalidArgument("fpca: need at least 3 curves");
  if (curves.cols() != u_grid.size()) throw InvalidArgument("fpca: curve length does not match grid");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidArgument("fpca: threshold must lie in (0, 1]");
  check_probability_grid(u_grid);

  FpcaModel m;
  m.weights = trapezoid_weights(u_grid);
  m.mean_curve = {u_grid, curves.colwise().mean().transpose()};
  const Eigen::MatrixXd centred = curves.rowwise() - m.mean_curve.values.transpose();
  const Eigen::VectorXd sw = m.weights.cwiseSqrt();
  const Eigen::MatrixXd b = centred * sw.asDiagonal();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinV);
  m.eigenvalues = svd.singularValues().array().square() / static_cast<double>(nt - 1);
  const double total = m.eigenvalues.sum();
  const double scale = std::max(1.0, (m.mean_curve.values.array().square() * m.weights.array()).sum());
  if (!(total > 1e-24 * scale)) {
    m.components = Eigen::MatrixXd(u_grid.size(), 0);
    m.retained = 0;
    m.explained_variance = 1.0;
    return m;
  }
  double acc = 0.0;
  int k = 0;
  while (k < m.eigenvalues.size()) {
    acc += m.eigenvalues(k);
    ++k;
    if (acc / total >= threshold - 1e-12) break;
  }
  m.retained = k;
  m.explained_variance = acc / total;
  m.components = sw.cwiseInverse().asDiagonal() * svd.matrixV().leftCols(k);
  for (int j = 0; j < k; ++j) {
    Index arg = 0;
    m.components.col(j).cwiseAbs().maxCoeff(&arg);
    if (m.components(arg, j) < 0.0) m.components.col(j) *= -1.0;
  }
  return m;
}

/// Independent AR(1) with intercept per score component:
/// s_{t+1,k} = a_k s_{t,k} + b_k + e.
struct ScoreAr1 {
  Eigen::VectorXd coefficient;
  Eigen::VectorXd intercept;
  Eigen::VectorXd innovation_variance;
  /// |a_k| >= 1 for some component (reported, not enforced).
  bool nonstationary = false;

  Eigen::VectorXd step(const Eigen::VectorXd& s) const {
    return coefficient.cwiseProduct(s) + intercept;
  }
};

inline ScoreAr1 fit_score_ar1(const Eigen::MatrixXd& scores) {
  const Index nt = scores.rows();
  const Index k = scores.cols();
  ScoreAr1 ar{Eigen::VectorXd::Zero(k), Eigen::VectorXd::Zero(k), Eigen::VectorXd::Zero(k), false};
  if (k == 0) return ar;
  if (nt < 2) throw InvalidArgument("fit_score_ar1: need at least 2 time points");
  for (Index j = 0; j < k; ++j) {
    const Eigen::VectorXd x = scores.col(j).head(nt - 1);
    const Eigen::VectorXd y = scores.col(j).tail(nt - 1);
    const double mx = x.mean(), my = y.mean();
    const double sxx = (x.array() - mx).square().sum();
    const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
    const double a = sxx > 1e-300 ? sxy / sxx : 0.0;
    ar.coefficient(j) = a;
    ar.intercept(j) = my - a * mx;
    const Eigen::ArrayXd resid = y.array() - a * x.array() - ar.intercept(j);
    const double dof = static_cast<double>(std::max<Index>(1, nt - 3));
    ar.innovation_variance(j) = resid.square().sum() / dof;
    if (std::abs(a) >= 1.0) ar.nonstationary = true;
  }
  return ar;
}

/// Weighted pool-adjacent-violators: the nondecreasing sequence closest to
/// y in the weighted L2 norm.
inline Eigen::VectorXd isotonic_regression(const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  if (y.size() != w.size()) throw InvalidArgument("isotonic_regression: weight length mismatch");
  struct Block {
    double mean, weight;
    Index count;
  };
  std::vector<Block> blocks;
  blocks.reserve(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i) {
    blocks.push_back({y(i), std::max(w(i), 1e-300), 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      const double wt = a.weight + b.weight;
      a.mean = (a.mean * a.weight + b.mean * b.weight) / wt;
      a.weight = wt;
      a.count += b.count;
    }
  }
  Eigen::VectorXd out(y.size());
  Index pos = 0;
  for (const auto& b : blocks)
    for (Index c = 0; c < b.count; ++c) out(pos++) = b.mean;
  return out;
}

struct WarModel {
  FpcaModel fpca;
  ScoreAr1 ar;
  Eigen::MatrixXd training_scores;  // T x K
};

inline WarModel war_fit(const Eigen::MatrixXd& curves, const Eigen::VectorXd& u_grid, double threshold = 0.95) {
  WarModel w;
  w.fpca = fpca(curves, u_grid, threshold);
  w.training_scores.resize(curves.rows(), w.fpca.retained);
  for (Index t = 0; t < curves.rows(); ++t) w.training_scores.row(t) = w.fpca.scores(curves.row(t).transpose()).transpose();
  w.ar = fit_score_ar1(w.training_scores);
  return w;
}

/// Iterate the score AR(1) h steps from the last row of scores_history,
/// rebuild the curve and project it onto nondecreasing curves.
inline QuantileCurve war_forecast(const FpcaModel& model, const ScoreAr1& ar, const Eigen::MatrixXd& scores_history,
                                  int h) {
  if (h < 1) throw InvalidArgument("war_forecast: horizon must be >= 1");
  if (scores_history.rows() == 0) throw InvalidArgument("war_forecast: empty score history");
  if (scores_history.cols() != model.retained) throw InvalidArgument("war_forecast: score width mismatch");
  Eigen::VectorXd s = scores_history.row(scores_history.rows() - 1).transpose();
  for (int i = 0; i < h; ++i) s = ar.step(s);
  const Eigen::VectorXd raw = model.reconstruct(s);
  return {model.mean_curve.grid, isotonic_regression(raw, model.weights)};
}

/// Forecast from an observed origin curve.
inline QuantileCurve war_forecast(const WarModel& model, const Eigen::VectorXd& origin_curve, int h) {
  const Eigen::MatrixXd s = model.fpca.scores(origin_curve).transpose();
  return war_forecast(model.fpca, model.ar, s, h);
}

}  // namespace dpdd
