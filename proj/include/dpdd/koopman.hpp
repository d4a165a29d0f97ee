#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dpdd/basis.hpp"
#include "dpdd/common.hpp"
#include "dpdd/density.hpp"

namespace dpdd {

/// Snapshot pairs (z_k, z_{k+1}); row k of `current` maps to row k of `next`.
struct TransitionPairs {
  Points current;
  Points next;

  Index size() const { return current.rows(); }
  int dim() const { return static_cast<int>(current.cols()); }
};

/// Consecutive pairs of a single ordered trajectory of M + 1 points.
inline TransitionPairs pairs_from_trajectory(const Points& trajectory) {
  if (trajectory.rows() < 2) throw InvalidArgument("trajectory: need >= 2 points");
  const Index m = trajectory.rows() - 1;
  return {trajectory.topRows(m), trajectory.bottomRows(m)};
}

/// Per-unit transitions between snapshots first..last (inclusive). Pairs
/// never span two different units. Ordering is time-major, then row.
inline TransitionPairs pairs_from_panel(const DistributionPanel& panel, std::size_t first, std::size_t last) {
  if (last >= panel.size() || first >= last) throw InvalidArgument("pairs_from_panel: need at least two snapshots");
  if (!panel.linked()) throw InvalidArgument("pairs_from_panel: snapshots are not trajectory-linked");
  const Index n = panel[first].rows();
  const Index m = n * static_cast<Index>(last - first);
  TransitionPairs p{Points(m, panel.dim()), Points(m, panel.dim())};
  for (std::size_t t = first; t < last; ++t) {
    const Index off = static_cast<Index>(t - first) * n;
    p.current.middleRows(off, n) = panel[t];
    p.next.middleRows(off, n) = panel[t + 1];
  }
  return p;
}

/// All samples of snapshots first..last stacked in time order.
inline Points pooled_samples(const DistributionPanel& panel, std::size_t first, std::size_t last) {
  if (last >= panel.size() || first > last) throw InvalidArgument("pooled_samples: bad snapshot range");
  Index rows = 0;
  for (std::size_t t = first; t <= last; ++t) rows += panel[t].rows();
  Points out(rows, panel.dim());
  Index off = 0;
  for (std::size_t t = first; t <= last; ++t) {
    out.middleRows(off, panel[t].rows()) = panel[t];
    off += panel[t].rows();
  }
  return out;
}

/// Weighted Gram G = sum_k w_k Psi(z_k) Psi(z_k)^T and cross matrix
/// A = sum_k w_k Psi(z_{k+1}) Psi(z_k)^T. `empirical_gram` is the unweighted
/// average (1/M) sum_k Psi(z_k) Psi(z_k)^T, which estimates the L2(p_s) Gram
/// when the z_k are drawn from p_s.
struct MomentMatrices {
  Eigen::MatrixXd gram;
  Eigen::MatrixXd cross;
  Eigen::MatrixXd empirical_gram;
  Index sample_count = 0;
  std::vector<std::string> diagnostics;
};

inline MomentMatrices moment_matrices(const TransitionPairs& pairs, const WeightVector& weights,
                                      const Dictionary& dict) {
  if (pairs.current.rows() != pairs.next.rows() || pairs.current.cols() != pairs.next.cols())
    throw InvalidArgument("moment_matrices: current/next shape mismatch");
  if (weights.size() != pairs.size())
    throw InvalidArgument("moment_matrices: " + std::to_string(weights.size()) + " weights for " +
                          std::to_string(pairs.size()) + " transition pairs");
  if (pairs.dim() != dict.dim()) throw InvalidArgument("moment_matrices: dictionary dimension mismatch");
  if (pairs.size() == 0) throw InvalidArgument("moment_matrices: no transition pairs");

  const Eigen::MatrixXd psi0 = dict.features(pairs.current);
  const Eigen::MatrixXd psi1 = dict.features(pairs.next);
  const Eigen::MatrixXd weighted = psi0.array().colwise() * weights.values.array();

  MomentMatrices m;
  m.sample_count = pairs.size();
  m.gram.noalias() = psi0.transpose() * weighted;
  m.gram = 0.5 * (m.gram + m.gram.transpose()).eval();
  m.cross.noalias() = psi1.transpose() * weighted;
  m.empirical_gram.noalias() = psi0.transpose() * psi0;
  m.empirical_gram /= static_cast<double>(pairs.size());
  if (pairs.size() < dict.size())
    m.diagnostics.push_back("underdetermined: " + std::to_string(pairs.size()) + " pairs for " +
                            std::to_string(dict.size()) + " basis functions");
  return m;
}

inline MomentMatrices moment_matrices(const Points& trajectory, const WeightVector& weights, const Dictionary& dict) {
  return moment_matrices(pairs_from_trajectory(trajectory), weights, dict);
}

/// Measure under which eigenfunctions are scaled to unit norm.
///   weighted:  sum_k w_k |phi(z_k)|^2 = 1
///   empirical: (1/M) sum_k |phi(z_k)|^2 = 1, the L2(p_s) norm for a
///              stationary trajectory; this is the scaling under which the
///              moment estimator c_j = E_{p_T}[phi_j] is the modal coefficient.
enum class ModeNormalization { weighted, empirical };

inline std::string to_string(ModeNormalization n) { return n == ModeNormalization::weighted ? "weighted" : "empirical"; }

inline ModeNormalization mode_normalization_from_string(const std::string& s) {
  if (s == "weighted") return ModeNormalization::weighted;
  if (s == "empirical") return ModeNormalization::empirical;
  throw InvalidArgument("unknown mode normalization '" + s + "'");
}

struct FitOptions {
  double ridge = 1e-8;
  bool whiten = true;
  bool regularize = true;
  ModeNormalization normalization = ModeNormalization::empirical;
  /// |mu - 1| below this makes a mode a candidate for the stationary mode.
  double trivial_tolerance = 0.02;
  double unstable_modulus = 1.05;
};

/// One eigenpair. phi(x) = Psi(x)^T xi; xi_whitened expresses the same
/// function in the whitened features G^{-1/2} Psi.
struct KoopmanMode {
  Complex eigenvalue;
  Complex rate;  // log(eigenvalue) / dt, principal branch
  Eigen::VectorXcd xi;
  Eigen::VectorXcd xi_whitened;
  bool unstable = false;
  /// E[phi] under the stationary density estimate; zero when none is
  /// attached. A non-stationary eigenfunction has zero stationary mean in
  /// exact arithmetic, so forecasts project onto phi - stationary_mean.
  Complex stationary_mean{0.0, 0.0};
};

struct KoopmanModel {
  Dictionary dictionary;
  double dt = 1.0;
  /// A G^+ in the original dictionary coordinates.
  Eigen::MatrixXd op;
  /// Pseudo-inverse square root of the (regularized) Gram.
  Eigen::MatrixXd whitening;
  /// Every eigenvalue of the operator, descending modulus.
  std::vector<Complex> spectrum;
  /// Modes propagated by forecasts, descending modulus; excludes the
  /// stationary mode.
  std::vector<KoopmanMode> modes;
  std::optional<KoopmanMode> trivial;
  std::shared_ptr<const KdeModel> density;
  ModeNormalization normalization = ModeNormalization::empirical;
  bool regularized = false;
  std::vector<std::string> diagnostics;

  int dim() const { return dictionary.dim(); }
  int mode_count() const { return static_cast<int>(modes.size()); }

  /// N x r matrix of phi_j(x_i).
  Eigen::MatrixXcd eigenfunctions(const Points& x) const {
    const Eigen::MatrixXcd psi = dictionary.features(x).cast<Complex>();
    Eigen::MatrixXcd xi(dictionary.size(), mode_count());
    for (int j = 0; j < mode_count(); ++j) xi.col(j) = modes[static_cast<std::size_t>(j)].xi;
    return psi * xi;
  }
};

namespace detail {

inline bool mode_order(const KoopmanMode& a, const KoopmanMode& b) {
  const double ma = std::abs(a.eigenvalue), mb = std::abs(b.eigenvalue);
  if (ma != mb) return ma > mb;
  if (a.eigenvalue.real() != b.eigenvalue.real()) return a.eigenvalue.real() > b.eigenvalue.real();
  return a.eigenvalue.imag() > b.eigenvalue.imag();
}

inline bool is_conjugate_partner(const KoopmanMode& a, const KoopmanMode& b) {
  if (a.eigenvalue.imag() == 0.0) return false;
  const double scale = std::max(1.0, std::abs(a.eigenvalue));
  return std::abs(b.eigenvalue - std::conj(a.eigenvalue)) <= 1e-12 * scale;
}

}  // namespace detail

/// Weighted EDMD fit: K = A G^+ and the eigenpairs of its adjoint action on
/// dictionary coefficients, A^T xi = mu G xi.
///
/// G is regularized with `ridge` I when lambda_min(G) < 1e-10 trace(G) / J.
/// With `whiten`, the eigenproblem is solved for W A W (W = G^{-1/2}), whose
/// Gram is the identity. Modes are scaled to unit norm under
/// options.normalization and phase-fixed so their largest coefficient is
/// real and positive. The stationary mode is the candidate with |mu - 1| <
/// trivial_tolerance having the largest normalized overlap with psi_1.
inline KoopmanModel fit_koopman(const MomentMatrices& m, const Dictionary& dict, double dt,
                                const FitOptions& options = {}, std::shared_ptr<const KdeModel> density = nullptr) {
  const Index nj = dict.size();
  if (m.gram.rows() != nj || m.gram.cols() != nj || m.cross.rows() != nj || m.cross.cols() != nj)
    throw InvalidArgument("fit_koopman: moment matrices do not match dictionary size");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("fit_koopman: dt must be positive");
  if (!m.gram.allFinite() || !m.cross.allFinite())
    throw NumericalError("fit_koopman: non-finite entries in moment matrices");
  if (m.gram.cwiseAbs().maxCoeff() == 0.0) throw InvalidArgument("fit_koopman: Gram matrix is identically zero");

  KoopmanModel model{dict, dt, {}, {}, {}, {}, std::nullopt, std::move(density), options.normalization, false,
                     m.diagnostics};

  Eigen::MatrixXd g = 0.5 * (m.gram + m.gram.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ges(g);
  if (ges.info() != Eigen::Success) throw NumericalError("fit_koopman: Gram eigendecomposition failed");
  if (options.regularize && ges.eigenvalues().minCoeff() < 1e-10 * g.trace() / static_cast<double>(nj)) {
    g += options.ridge * Eigen::MatrixXd::Identity(nj, nj);
    ges.compute(g);
    if (ges.info() != Eigen::Success) throw NumericalError("fit_koopman: Gram eigendecomposition failed");
    model.regularized = true;
    model.diagnostics.push_back("Gram regularized with ridge " + std::to_string(options.ridge));
  }

  const Eigen::VectorXd ev = ges.eigenvalues();
  const Eigen::MatrixXd& v = ges.eigenvectors();
  const double cutoff = static_cast<double>(std::max<Index>(nj, m.sample_count)) *
                        std::numeric_limits<double>::epsilon() * ev.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv(nj), inv_sqrt(nj), sqrt_ev(nj);
  for (Index i = 0; i < nj; ++i) {
    const bool keep = ev(i) > cutoff;
    inv(i) = keep ? 1.0 / ev(i) : 0.0;
    inv_sqrt(i) = keep ? 1.0 / std::sqrt(ev(i)) : 0.0;
    sqrt_ev(i) = keep ? std::sqrt(ev(i)) : 0.0;
  }
  const Eigen::MatrixXd g_pinv = v * inv.asDiagonal() * v.transpose();
  model.whitening = v * inv_sqrt.asDiagonal() * v.transpose();
  const Eigen::MatrixXd g_sqrt = v * sqrt_ev.asDiagonal() * v.transpose();
  model.op = m.cross * g_pinv;

  const Eigen::MatrixXd target =
      options.whiten ? Eigen::MatrixXd((model.whitening * m.cross * model.whitening).transpose())
                     : Eigen::MatrixXd(g_pinv * m.cross.transpose());
  Eigen::EigenSolver<Eigen::MatrixXd> es(target, true);
  if (es.info() != Eigen::Success) throw NumericalError("fit_koopman: eigen-solver failed to converge");

  const Eigen::MatrixXd norm_gram =
      options.normalization == ModeNormalization::weighted ? Eigen::MatrixXd(0.5 * (m.gram + m.gram.transpose()))
                                                            : m.empirical_gram;
  const Eigen::MatrixXcd norm_c = norm_gram.cast<Complex>();

  std::vector<KoopmanMode> all;
  for (Index j = 0; j < nj; ++j) {
    const Complex mu = es.eigenvalues()(j);
    model.spectrum.push_back(mu);
    const Eigen::VectorXcd vec = es.eigenvectors().col(j);
    KoopmanMode mode;
    mode.eigenvalue = mu;
    if (options.whiten) {
      mode.xi = model.whitening.cast<Complex>() * vec;
      mode.xi_whitened = vec;
    } else {
      mode.xi = vec;
      mode.xi_whitened = g_sqrt.cast<Complex>() * vec;
    }
    const double norm2 = (mode.xi.adjoint() * norm_c * mode.xi)(0, 0).real();
    if (!(norm2 > 1e-300)) {
      model.diagnostics.push_back("dropped eigenvector with zero norm (eigenvalue " + std::to_string(std::abs(mu)) +
                                  ")");
      continue;
    }
    const double s = 1.0 / std::sqrt(norm2);
    Index arg = 0;
    mode.xi.cwiseAbs().maxCoeff(&arg);
    const Complex phase = std::conj(mode.xi(arg)) / std::abs(mode.xi(arg));
    mode.xi *= s * phase;
    mode.xi_whitened *= s * phase;
    mode.rate = std::log(mu) / dt;
    mode.unstable = std::abs(mu) > options.unstable_modulus;
    if (mode.unstable) model.diagnostics.push_back("unstable mode with |mu| = " + std::to_string(std::abs(mu)));
    if (!mode.xi.allFinite()) throw NumericalError("fit_koopman: non-finite eigenvector");
    all.push_back(std::move(mode));
  }
  std::sort(model.spectrum.begin(), model.spectrum.end(), [](Complex a, Complex b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });
  std::stable_sort(all.begin(), all.end(), detail::mode_order);

  if (model.density) {
    const KdeModel& k = *model.density;
    const Eigen::RowVectorXcd mean =
        dict.smoothed_features(k.samples(), k.bandwidth()).colwise().mean().cast<Complex>();
    for (auto& mode : all) mode.stationary_mean = (mean * mode.xi)(0, 0);
  }

  std::optional<std::size_t> trivial_at;
  double best_overlap = -1.0;
  const double g11 = norm_gram(0, 0);
  for (std::size_t j = 0; j < all.size(); ++j) {
    if (std::abs(all[j].eigenvalue - 1.0) >= options.trivial_tolerance) continue;
    const Eigen::VectorXcd ng = norm_c * all[j].xi;
    const double overlap = std::abs(ng(0)) / std::sqrt(std::max(g11, 1e-300));
    if (overlap > best_overlap) {
      best_overlap = overlap;
      trivial_at = j;
    }
  }
  for (std::size_t j = 0; j < all.size(); ++j) {
    if (trivial_at && j == *trivial_at)
      model.trivial = all[j];
    else
      model.modes.push_back(all[j]);
  }
  return model;
}

struct TruncationRule {
  enum class Kind { fixed, modulus_ratio };
  Kind kind = Kind::modulus_ratio;
  int count = 0;
  double ratio = 0.9;

  static TruncationRule fixed(int r) { return {Kind::fixed, r, 0.0}; }
  static TruncationRule modulus_ratio(double rho = 0.9) { return {Kind::modulus_ratio, 0, rho}; }
};

/// Keep the leading propagated modes.
///   fixed(r): the r largest-modulus modes; a conjugate pair cut by the
///             boundary is kept whole, so r + 1 modes may survive.
///   modulus_ratio(rho): modes with |mu| >= rho * max |mu| over the
///             non-stationary modes.
inline KoopmanModel truncate_modes(const KoopmanModel& model, const TruncationRule& rule) {
  if (model.spectrum.empty()) throw InvalidArgument("truncate_modes: model has no eigenpairs");
  KoopmanModel out = model;
  out.modes.clear();
  if (rule.kind == TruncationRule::Kind::fixed) {
    if (rule.count <= 0) throw InvalidArgument("truncate_modes: fixed rank must be >= 1");
    if (static_cast<std::size_t>(rule.count) > model.modes.size())
      throw InvalidArgument("truncate_modes: requested " + std::to_string(rule.count) + " modes but only " +
                            std::to_string(model.modes.size()) + " non-stationary modes are available");
    std::size_t keep = static_cast<std::size_t>(rule.count);
    if (keep < model.modes.size() && detail::is_conjugate_partner(model.modes[keep - 1], model.modes[keep])) ++keep;
    out.modes.assign(model.modes.begin(), model.modes.begin() + static_cast<std::ptrdiff_t>(keep));
  } else {
    if (!(rule.ratio >= 0.0) || rule.ratio > 1.0) throw InvalidArgument("truncate_modes: ratio must lie in [0, 1]");
    if (model.modes.empty()) return out;
    const double top = std::abs(model.modes.front().eigenvalue);
    for (const auto& m : model.modes)
      if (std::abs(m.eigenvalue) >= rule.ratio * top) out.modes.push_back(m);
  }
  return out;
}

}  // namespace dpdd
