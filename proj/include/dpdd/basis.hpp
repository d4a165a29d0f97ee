#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dpdd/common.hpp"

namespace dpdd {

enum class BasisKind { hermite, monomial };

inline std::string to_string(BasisKind k) { return k == BasisKind::hermite ? "hermite" : "monomial"; }

inline BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "hermite") return BasisKind::hermite;
  if (s == "monomial") return BasisKind::monomial;
  throw InvalidArgument("unknown basis kind '" + s + "'");
}

/// Per-axis affine map x -> (x - shift) / scale applied before polynomial
/// evaluation.
struct Standardization {
  Eigen::VectorXd shift;
  Eigen::VectorXd scale;

  static Standardization identity(int dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
  }

  /// Per-axis mean and sample standard deviation.
  static Standardization from_samples(const Points& x) {
    if (x.rows() < 2) throw InvalidArgument("standardization needs at least 2 samples");
    Standardization s{Eigen::VectorXd(x.cols()), Eigen::VectorXd(x.cols())};
    for (Index j = 0; j < x.cols(); ++j) {
      s.shift(j) = x.col(j).mean();
      s.scale(j) = sample_stddev(x.col(j));
      if (!(s.scale(j) > 0.0))
        throw InvalidArgument("standardization: axis " + std::to_string(j) + " has zero variance");
    }
    return s;
  }
};

/// Tensor-product polynomial dictionary truncated at total degree
/// max_degree. The first function is the constant 1.
///
/// Multi-indices are ordered by total degree, then by exponent tuple in
/// descending lexicographic order, so for d = 2 the degree-1 block is
/// (x, y) and the degree-2 block is (x^2, xy, y^2).
///
/// Hermite kind uses probabilists' polynomials He_n, orthogonal under the
/// standard Gaussian weight. Hermite *functions* (with the Gaussian factor)
/// and kernel-based dictionaries would slot in as further kinds.
class Dictionary {
 public:
  Dictionary(BasisKind kind, int max_degree, int dim, Standardization standardization)
      : kind_(kind), max_degree_(max_degree), dim_(dim), std_(std::move(standardization)) {
    if (max_degree < 1) throw InvalidArgument("dictionary max_degree must be >= 1");
    if (dim < 1) throw InvalidArgument("dictionary dim must be >= 1");
    if (std_.shift.size() != dim || std_.scale.size() != dim)
      throw InvalidArgument("standardization dimension does not match dictionary dim");
    for (Index j = 0; j < dim; ++j)
      if (!(std_.scale(j) > 0.0) || !std::isfinite(std_.scale(j)))
        throw InvalidArgument("standardization scale must be strictly positive");
    build_indices();
  }

  BasisKind kind() const { return kind_; }
  int max_degree() const { return max_degree_; }
  int dim() const { return dim_; }
  int size() const { return static_cast<int>(indices_.size()); }
  const Standardization& standardization() const { return std_; }
  const std::vector<std::vector<int>>& multi_indices() const { return indices_; }

  /// Feature vector Psi(x) of length size().
  template <class Derived>
  Eigen::VectorXd features(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != dim_)
      throw InvalidArgument("eval_features: point has dimension " + std::to_string(x.size()) +
                            ", dictionary expects " + std::to_string(dim_));
    Points row(1, dim_);
    for (int j = 0; j < dim_; ++j) row(0, j) = x(j);
    return features(row).row(0).transpose();
  }

  /// Feature matrix (N x J), row i = Psi(points.row(i)).
  Eigen::MatrixXd features(const Points& points) const {
    if (points.cols() != dim_)
      throw InvalidArgument("eval_features: points have dimension " + std::to_string(points.cols()) +
                            ", dictionary expects " + std::to_string(dim_));
    const Index n = points.rows();
    // One univariate table per axis: tables[axis](i, k) = p_k(x~_i).
    std::vector<Eigen::MatrixXd> tables(dim_);
    for (int a = 0; a < dim_; ++a) {
      Eigen::VectorXd z = (points.col(a).array() - std_.shift(a)) / std_.scale(a);
      tables[a] = univariate_table(z);
    }
    Eigen::MatrixXd out(n, size());
    out.col(0).setOnes();
    for (int f = 1; f < size(); ++f) {
      Eigen::ArrayXd col = Eigen::ArrayXd::Ones(n);
      for (int a = 0; a < dim_; ++a) {
        const int e = indices_[f][a];
        if (e > 0) col *= tables[a].col(e).array();
      }
      out.col(f) = col.matrix();
    }
    return out;
  }

  /// Row i = E[Psi(c_i + sd * eps)] with eps standard normal per axis, i.e.
  /// the features averaged under a Gaussian kernel centred at c_i. Exact:
  /// Gauss-Hermite quadrature with max_degree + 1 nodes per axis.
  Eigen::MatrixXd smoothed_features(const Points& centers, const Eigen::VectorXd& sd) const {
    if (centers.cols() != dim_ || sd.size() != dim_)
      throw InvalidArgument("smoothed_features: dimension mismatch");
    const int nq = max_degree_ + 1;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(nq, nq);
    for (int k = 1; k < nq; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    const Eigen::VectorXd nodes = es.eigenvalues();
    const Eigen::VectorXd weights = es.eigenvectors().row(0).transpose().array().square();

    const Index n = centers.rows();
    std::vector<Eigen::MatrixXd> tables(dim_);
    for (int a = 0; a < dim_; ++a) {
      tables[a] = Eigen::MatrixXd::Zero(n, max_degree_ + 1);
      for (int q = 0; q < nq; ++q) {
        Eigen::VectorXd z = (centers.col(a).array() + sd(a) * nodes(q) - std_.shift(a)) / std_.scale(a);
        tables[a] += weights(q) * univariate_table(z);
      }
    }
    Eigen::MatrixXd out(n, size());
    for (int f = 0; f < size(); ++f) {
      Eigen::ArrayXd col = Eigen::ArrayXd::Ones(n);
      for (int a = 0; a < dim_; ++a) col *= tables[a].col(indices_[f][a]).array();
      out.col(f) = col.matrix();
    }
    return out;
  }

 private:
  Eigen::MatrixXd univariate_table(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd t(z.size(), max_degree_ + 1);
    t.col(0).setOnes();
    t.col(1) = z;
    for (int k = 1; k < max_degree_; ++k) {
      if (kind_ == BasisKind::hermite)
        t.col(k + 1) = (z.array() * t.col(k).array() - static_cast<double>(k) * t.col(k - 1).array()).matrix();
      else
        t.col(k + 1) = (z.array() * t.col(k).array()).matrix();
    }
    return t;
  }

  void build_indices() {
    std::vector<int> cur(dim_, 0);
    enumerate(0, max_degree_, cur);
    std::sort(indices_.begin(), indices_.end(), [](const auto& a, const auto& b) {
      int sa = 0, sb = 0;
      for (int v : a) sa += v;
      for (int v : b) sb += v;
      if (sa != sb) return sa < sb;
      return a > b;
    });
  }

  void enumerate(int axis, int remaining, std::vector<int>& cur) {
    if (axis == dim_) {
      indices_.push_back(cur);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      cur[axis] = e;
      enumerate(axis + 1, remaining - e, cur);
    }
    cur[axis] = 0;
  }

  BasisKind kind_;
  int max_degree_;
  int dim_;
  Standardization std_;
  std::vector<std::vector<int>> indices_;
};

inline Dictionary build_dictionary(BasisKind kind, int max_degree, int dim, Standardization s) {
  return Dictionary(kind, max_degree, dim, std::move(s));
}

inline Dictionary build_dictionary(BasisKind kind, int max_degree, int dim) {
  if (dim < 1) throw InvalidArgument("dictionary dim must be >= 1");
  return Dictionary(kind, max_degree, dim, Standardization::identity(dim));
}

}  // namespace dpdd
