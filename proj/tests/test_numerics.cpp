#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "dpdd/basis.hpp"
#include "dpdd/density.hpp"
#include "dpdd/lattice.hpp"
#include "dpdd/quantile.hpp"
#include "dpdd/transport.hpp"
#include "test_support.hpp"

using namespace dpdd;
using test::column;
using test::normal_points;

namespace {

// Closed-form probabilists' Hermite polynomial, independent of the recurrence.
double hermite_explicit(int n, double x) {
  double acc = 0.0;
  for (int m = 0; 2 * m <= n; ++m) {
    const double term = std::tgamma(n + 1.0) / (std::tgamma(m + 1.0) * std::tgamma(n - 2.0 * m + 1.0)) *
                        std::pow(x, n - 2 * m) / std::pow(2.0, m);
    acc += (m % 2 ? -term : term);
  }
  return acc;
}

double brute_force_w2(const Points& a, const Points& b) {
  std::vector<Index> perm(static_cast<std::size_t>(a.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (Index i = 0; i < a.rows(); ++i) acc += (a.row(i) - b.row(perm[static_cast<std::size_t>(i)])).squaredNorm();
    best = std::min(best, acc);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(a.rows()));
}

}  // namespace

// ---- dictionary ----

TEST(Dictionary, SizesFollowTotalDegreeTruncation) {
  EXPECT_EQ(build_dictionary(BasisKind::hermite, 2, 1).size(), 3);
  EXPECT_EQ(build_dictionary(BasisKind::hermite, 2, 2).size(), 6);
  EXPECT_EQ(build_dictionary(BasisKind::monomial, 2, 1).size(), 3);
  EXPECT_EQ(build_dictionary(BasisKind::hermite, 4, 1).size(), 5);
  EXPECT_EQ(build_dictionary(BasisKind::hermite, 3, 2).size(), 10);
  EXPECT_EQ(build_dictionary(BasisKind::monomial, 3, 3).size(), 20);
}

TEST(Dictionary, HermiteValuesAtKnownPoints) {
  const Dictionary d = build_dictionary(BasisKind::hermite, 2, 1);
  const Eigen::VectorXd at0 = d.features(Eigen::VectorXd::Constant(1, 0.0));
  EXPECT_DOUBLE_EQ(at0(0), 1.0);
  EXPECT_DOUBLE_EQ(at0(1), 0.0);
  EXPECT_DOUBLE_EQ(at0(2), -1.0);
  const Eigen::VectorXd at2 = d.features(Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(at2(0), 1.0);
  EXPECT_DOUBLE_EQ(at2(1), 2.0);
  EXPECT_DOUBLE_EQ(at2(2), 3.0);
}

TEST(Dictionary, HermiteRecurrenceMatchesExplicitFormula) {
  const Dictionary d = build_dictionary(BasisKind::hermite, 7, 1);
  for (double x : {-2.5, -1.0, 0.3, 1.7, 3.0}) {
    const Eigen::VectorXd f = d.features(Eigen::VectorXd::Constant(1, x));
    for (int n = 0; n <= 7; ++n) EXPECT_NEAR(f(n), hermite_explicit(n, x), 1e-10 * (1.0 + std::abs(f(n)))) << n;
  }
}

TEST(Dictionary, FirstFeatureIsConstant) {
  const Dictionary d = build_dictionary(BasisKind::monomial, 3, 2);
  const Eigen::MatrixXd f = d.features(normal_points(50, 2, 3));
  EXPECT_TRUE((f.col(0).array() == 1.0).all());
}

TEST(Dictionary, TwoDimensionalOrderingAndStandardization) {
  Standardization s{Eigen::Vector2d(1.0, -1.0), Eigen::Vector2d(2.0, 0.5)};
  const Dictionary d(BasisKind::monomial, 2, 2, s);
  const Eigen::VectorXd f = d.features(Eigen::Vector2d(3.0, 0.0));  // standardized (1, 2)
  ASSERT_EQ(f.size(), 6);
  const double expect[] = {1.0, 1.0, 2.0, 1.0, 2.0, 4.0};  // 1, x, y, x^2, xy, y^2
  for (int i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(f(i), expect[i]);
}

TEST(Dictionary, RejectsBadInput) {
  EXPECT_THROW(build_dictionary(BasisKind::hermite, 0, 1), InvalidArgument);
  EXPECT_THROW(build_dictionary(BasisKind::hermite, 2, 0), InvalidArgument);
  const Dictionary d = build_dictionary(BasisKind::hermite, 2, 2);
  EXPECT_THROW(d.features(Eigen::VectorXd::Zero(3)), InvalidArgument);
  EXPECT_THROW(Dictionary(BasisKind::hermite, 2, 1, {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)}),
               InvalidArgument);
  EXPECT_THROW(basis_kind_from_string("legendre"), InvalidArgument);
}

TEST(Dictionary, SmoothedMonomialsMatchGaussianMoments) {
  const Dictionary d = build_dictionary(BasisKind::monomial, 4, 1);
  const Points c = column({0.0, 0.7, -1.3});
  const double s = 0.4;
  const Eigen::MatrixXd f = d.smoothed_features(c, Eigen::VectorXd::Constant(1, s));
  for (Index i = 0; i < c.rows(); ++i) {
    const double m = c(i, 0), s2 = s * s;
    EXPECT_NEAR(f(i, 1), m, 1e-12);
    EXPECT_NEAR(f(i, 2), m * m + s2, 1e-12);
    EXPECT_NEAR(f(i, 3), m * m * m + 3 * m * s2, 1e-12);
    EXPECT_NEAR(f(i, 4), std::pow(m, 4) + 6 * m * m * s2 + 3 * s2 * s2, 1e-12);
  }
}

TEST(Dictionary, SmoothedHermiteMatchesNumericalIntegration) {
  Standardization st{Eigen::Vector2d(0.2, -0.1), Eigen::Vector2d(0.8, 1.3)};
  const Dictionary d(BasisKind::hermite, 3, 2, st);
  Points c(1, 2);
  c << 0.5, -0.4;
  const Eigen::Vector2d sd(0.3, 0.6);
  const Eigen::VectorXd got = d.smoothed_features(c, sd).row(0).transpose();
  // Tensor trapezoid over +-8 sd.
  const int n = 401;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d.size());
  double mass = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double e1 = -8.0 + 16.0 * i / (n - 1), e2 = -8.0 + 16.0 * j / (n - 1);
      const double w = std::exp(-0.5 * (e1 * e1 + e2 * e2));
      acc += w * d.features(Eigen::Vector2d(c(0, 0) + sd(0) * e1, c(0, 1) + sd(1) * e2));
      mass += w;
    }
  acc /= mass;
  for (int k = 0; k < d.size(); ++k) EXPECT_NEAR(got(k), acc(k), 1e-9) << k;
}

// ---- lattice ----

TEST(Lattice, RowMajorOrderAndMeasure) {
  const Lattice g(Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 2.0), {3, 5});
  EXPECT_EQ(g.size(), 15);
  EXPECT_DOUBLE_EQ(g.cell_measure(), 0.5 * 0.5);
  const Points p = g.points();
  EXPECT_DOUBLE_EQ(p(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(p(1, 1), 0.5);
  EXPECT_DOUBLE_EQ(p(5, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(14, 0), 1.0);
  EXPECT_DOUBLE_EQ(p(14, 1), 2.0);
  EXPECT_THROW(Lattice(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), {1}), InvalidArgument);
}

// ---- density ----

TEST(Kde, SilvermanFormula) {
  Points x = normal_points(100, 1, 11);
  x.col(0) = (x.col(0).array() - x.col(0).mean()) / sample_stddev(x.col(0));
  const Eigen::VectorXd h = silverman_bandwidth(x);
  EXPECT_NEAR(h(0), std::pow(4.0 / 300.0, 0.2), 1e-12);
  EXPECT_NEAR(h(0), 0.4217, 1e-4);
  const Eigen::VectorXd h2 = silverman_bandwidth(Points(2.0 * x));
  EXPECT_NEAR(h2(0), 2.0 * h(0), 1e-12);
  EXPECT_THROW(silverman_bandwidth(column({1.0})), InvalidArgument);
}

TEST(Kde, SingleBump) {
  const KdeModel k = kde_fit(column({0.0}), Eigen::VectorXd::Ones(1));
  EXPECT_NEAR(k(Eigen::VectorXd::Zero(1)), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
}

TEST(Kde, StandardNormalAtZero) {
  const KdeModel k = kde_fit(normal_points(100000, 1, 5));
  EXPECT_NEAR(k(Eigen::VectorXd::Zero(1)), 0.39894, 0.02);
}

TEST(Kde, NonnegativeAndBinnedCloseToExact) {
  const KdeModel k = kde_fit(normal_points(3000, 1, 6));
  const Lattice g(Eigen::VectorXd::Constant(1, -6.0), Eigen::VectorXd::Constant(1, 6.0), {40000});
  const Eigen::VectorXd binned = k.evaluate(g.points());
  const Eigen::VectorXd exact = k.evaluate_exact(g.points());
  EXPECT_GE(binned.minCoeff(), 0.0);
  EXPECT_LT((binned - exact).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(exact.sum() * g.cell_measure(), 1.0, 1e-6);
}

TEST(Kde, TwoDimensionalLatticeMatchesExact) {
  const KdeModel k = kde_fit(normal_points(800, 2, 7));
  const Lattice g(Eigen::Vector2d(-4.0, -4.0), Eigen::Vector2d(4.0, 4.0), {61, 61});
  const Eigen::VectorXd a = k.evaluate_lattice(g);
  const Eigen::VectorXd b = k.evaluate_exact(g.points());
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-4 * b.maxCoeff());
}

TEST(Kde, VarianceCorrectionMatchesSampleVariance) {
  const Points x = normal_points(500, 2, 8, 1.0, 0.5);
  const KdeModel base = kde_fit(x);
  const KdeModel vc = variance_corrected(base);
  EXPECT_EQ(vc.bandwidth(), base.bandwidth());
  for (int a = 0; a < 2; ++a) {
    const double s = sample_stddev(x.col(a)), h = base.bandwidth()(a);
    const double n = static_cast<double>(x.rows());
    const Eigen::ArrayXd z = vc.samples().col(a).array();
    const double mixture_var = (z - z.mean()).square().mean() + h * h;
    EXPECT_NEAR(z.mean(), x.col(a).mean(), 1e-12);
    EXPECT_NEAR(mixture_var, (n - 1) / n * (s * s - h * h) + h * h, 1e-12);
  }
}

TEST(Kde, CrossValidatedBandwidthIsAMultipleOfSilverman) {
  const Points x = normal_points(400, 1, 9);
  const KdeModel k = kde_fit_cv(x);
  const double r = k.bandwidth()(0) / silverman_bandwidth(x)(0);
  const double allowed[] = {0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0};
  EXPECT_TRUE(std::any_of(std::begin(allowed), std::end(allowed), [&](double m) { return std::abs(m - r) < 1e-12; }));
}

TEST(Weights, NormalizationArithmetic) {
  const WeightVector w = normalize_weights(Eigen::Vector2d(0.2, 0.6));
  EXPECT_DOUBLE_EQ(w.values(0), 0.25);
  EXPECT_DOUBLE_EQ(w.values(1), 0.75);
  EXPECT_THROW(normalize_weights(Eigen::Vector2d(0.0, 0.0)), NumericalError);
  EXPECT_THROW(normalize_weights(Eigen::VectorXd()), InvalidArgument);
}

TEST(Weights, IdenticalPointsGiveUniformWeights) {
  const KdeModel k = kde_fit(normal_points(200, 1, 10));
  const WeightVector w = importance_weights(k, Points::Constant(7, 1, 0.3));
  for (Index i = 0; i < 7; ++i) EXPECT_NEAR(w.values(i), 1.0 / 7.0, 1e-15);
}

TEST(Weights, SumToOne) {
  const Points x = normal_points(300, 2, 12);
  const WeightVector w = importance_weights(kde_fit(x), x);
  EXPECT_NEAR(w.values.sum(), 1.0, 1e-12);
  EXPECT_GE(w.values.minCoeff(), 0.0);
}

// ---- quantiles ----

TEST(Quantiles, MedianOfOneToHundred) {
  Eigen::VectorXd x(100);
  for (int i = 0; i < 100; ++i) x(i) = 100 - i;
  const QuantileCurve q = empirical_quantiles(x, Eigen::VectorXd::Constant(1, 0.5));
  EXPECT_DOUBLE_EQ(q.values(0), 50.5);
}

TEST(Quantiles, GridsAndWeights) {
  const Eigen::VectorXd u = uniform_probability_grid(128, 0.005, 0.995);
  EXPECT_DOUBLE_EQ(u(0), 0.005);
  EXPECT_DOUBLE_EQ(u(127), 0.995);
  EXPECT_NEAR(trapezoid_weights(u).sum(), 0.99, 1e-14);
  EXPECT_THROW(uniform_probability_grid(10, 0.0, 0.9), InvalidArgument);
  Eigen::VectorXd bad(3);
  bad << 0.1, 0.3, 0.2;
  EXPECT_THROW(check_probability_grid(bad), InvalidArgument);
}

TEST(Quantiles, InterpolationIsFlatOutsideGrid) {
  const QuantileCurve q{Eigen::Vector2d(0.25, 0.75), Eigen::Vector2d(1.0, 3.0)};
  EXPECT_DOUBLE_EQ(interpolate_quantile(q, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(interpolate_quantile(q, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(interpolate_quantile(q, 0.9), 3.0);
}

// ---- transport ----

TEST(Transport, SortedSamplesBasics) {
  const Eigen::Vector2d a(0.0, 1.0), b(2.0, 1.0);
  EXPECT_DOUBLE_EQ(w2_sorted_samples(a, a), 0.0);
  EXPECT_DOUBLE_EQ(w2_sorted_samples(a, b), 1.0);
}

TEST(Transport, GaussianShiftOracle) {
  const Points a = normal_points(10000, 1, 21);
  const Points b = normal_points(10000, 1, 22, 1.0);
  EXPECT_NEAR(w2_sorted_samples(a.col(0), b.col(0)), 1.0, 0.03);
}

TEST(Transport, UnequalSizesUseQuantileGrid) {
  const Points a = normal_points(3000, 1, 23);
  const Points b = normal_points(2000, 1, 24, 0.5);
  EXPECT_NEAR(w2_sorted_samples(a.col(0), b.col(0)), 0.5, 0.06);
}

TEST(Transport, QuantileGridOracles) {
  const Eigen::VectorXd u = midpoint_probability_grid(1024);
  const QuantileCurve qa{u, u}, qb{u, 2.0 * u}, qc{u, u.array() + 0.3};
  EXPECT_DOUBLE_EQ(w2_quantile_grid(qa, qa), 0.0);
  EXPECT_NEAR(w2_quantile_grid(qa, qc), 0.3, 1e-3);
  EXPECT_NEAR(w2_quantile_grid(qa, qb), 1.0 / std::sqrt(3.0), 1e-3);
  const QuantileCurve other{midpoint_probability_grid(512), midpoint_probability_grid(512)};
  EXPECT_THROW(w2_quantile_grid(qa, other), InvalidArgument);
}

TEST(Transport, AssignmentExamples) {
  Points a(2, 2), b(2, 2), c(2, 2);
  a << 0, 0, 1, 0;
  b << 1, 0, 0, 0;
  c << 1, 0, 1, 1;
  Points d(2, 2);
  d << 0, 0, 0, 1;
  EXPECT_DOUBLE_EQ(w2_assignment(a, a), 0.0);
  EXPECT_DOUBLE_EQ(w2_assignment(a, b), 0.0);
  EXPECT_DOUBLE_EQ(w2_assignment(d, c), 1.0);
  EXPECT_THROW(w2_assignment(a, Points(3, 2)), InvalidArgument);
}

TEST(Transport, AssignmentMatchesBruteForce) {
  Rng rng = make_rng(31, "test-assign");
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    Points a(6, 2), b(6, 2);
    for (Index i = 0; i < 6; ++i)
      for (int k = 0; k < 2; ++k) {
        a(i, k) = unif(rng);
        b(i, k) = unif(rng);
      }
    EXPECT_NEAR(w2_assignment(a, b), brute_force_w2(a, b), 1e-12);
  }
}

TEST(Transport, AssignmentEqualsSortedIn1D) {
  Rng rng = make_rng(32, "test-1d");
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Points a(50, 1), b(50, 1);
    for (Index i = 0; i < 50; ++i) {
      a(i, 0) = z(rng);
      b(i, 0) = 2.0 * z(rng) + 0.5;
    }
    EXPECT_NEAR(w2_assignment(a, b), w2_sorted_samples(a.col(0), b.col(0)), 1e-9);
  }
}

TEST(Transport, TriangleInequality) {
  Rng rng = make_rng(33, "test-triangle");
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Points p[3];
    for (auto& x : p) {
      x.resize(12, 2);
      for (Index i = 0; i < 12; ++i)
        for (int k = 0; k < 2; ++k) x(i, k) = z(rng) * (1 + trial % 3);
    }
    EXPECT_LE(w2_assignment(p[0], p[2]), w2_assignment(p[0], p[1]) + w2_assignment(p[1], p[2]) + 1e-9);
  }
}

TEST(Transport, SymmetricAndCanonical) {
  const Points a = normal_points(40, 2, 34), b = normal_points(40, 2, 35, 0.3);
  EXPECT_EQ(w2_assignment(a, b), w2_assignment(b, a));
}

TEST(Transport, MeanSquaredError) {
  EXPECT_DOUBLE_EQ(mean_squared_error({0.01, 0.03}), 0.02);
  EXPECT_THROW(mean_squared_error({}), InvalidArgument);
}

TEST(Transport, QuasiUniformPointsAreStratified) {
  const Points u = quasi_uniform_points(100, 2);
  EXPECT_DOUBLE_EQ(u(0, 0), 0.005);
  EXPECT_GT(u.minCoeff(), 0.0);
  EXPECT_LT(u.maxCoeff(), 1.0);
  // Each tenth of the second axis gets roughly a tenth of the points.
  for (int b = 0; b < 10; ++b) {
    const auto count = (u.col(1).array() >= b / 10.0 && u.col(1).array() < (b + 1) / 10.0).count();
    EXPECT_NEAR(static_cast<double>(count), 10.0, 2.0);
  }
}
