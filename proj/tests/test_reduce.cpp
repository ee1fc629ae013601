#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "chestprog/error.hpp"
#include "chestprog/reduce.hpp"

using namespace chestprog::reduce;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd gaussian(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

// Cyclic Jacobi rotations, independent of Eigen's solvers. Returns eigenvalues descending.
VectorXd jacobi_eigenvalues(MatrixXd a) {
  const int n = static_cast<int>(a.rows());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-26) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  VectorXd ev = a.diagonal();
  std::sort(ev.data(), ev.data() + n, std::greater<>());
  return ev;
}

VectorXd labels01(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(0.5);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = b(rng) ? 1.0 : 0.0;
  return y;
}

}  // namespace

TEST(Standardize, TwoPointColumn) {
  MatrixXd x(2, 1);
  x << 1, 3;
  const auto s = standardize_fit(x);
  EXPECT_EQ(s.mean(0), 2.0);
  EXPECT_EQ(s.stddev(0), 1.0);
  const auto z = standardize_apply(s, x);
  EXPECT_EQ(z(0, 0), -1.0);
  EXPECT_EQ(z(1, 0), 1.0);
}

TEST(Standardize, ConstantColumnFlaggedAndZeroed) {
  MatrixXd x(3, 2);
  x << 1, 7, 2, 7, 3, 7;
  const auto s = standardize_fit(x);
  EXPECT_FALSE(s.zero_variance[0]);
  EXPECT_TRUE(s.zero_variance[1]);
  const auto z = standardize_apply(s, x);
  EXPECT_TRUE(z.col(1).isZero(0.0));
}

TEST(Standardize, RandomTableMomentsAfterApply) {
  MatrixXd x = gaussian(30, 12, 4) * 5.0;
  x.array() += 11.0;
  const auto z = standardize_apply(standardize_fit(x), x);
  for (int j = 0; j < z.cols(); ++j) {
    const double m = z.col(j).mean();
    EXPECT_NEAR(m, 0.0, 1e-10);
    EXPECT_NEAR(std::sqrt((z.col(j).array() - m).square().mean()), 1.0, 1e-10);
  }
}

TEST(Standardize, SingleRowRejected) { EXPECT_THROW(standardize_fit(MatrixXd::Ones(1, 3)), chestprog::Error); }

TEST(Lasso, SoftThreshold) {
  EXPECT_EQ(soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_EQ(soft_threshold(0.5, 1.0), 0.0);
  EXPECT_EQ(soft_threshold(-1.0, 1.0), 0.0);
}

TEST(Lasso, ZeroLambdaIsLeastSquares) {
  const MatrixXd x = gaussian(40, 5, 1);
  const VectorXd y = gaussian(40, 1, 2).col(0);
  const auto fit = lasso_fit(x, y, 0.0, {1e-12, 100000});
  const VectorXd ls = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  EXPECT_LT((fit.beta - ls).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Lasso, LambdaMaxShutsEverythingOff) {
  const MatrixXd x = gaussian(25, 8, 3);
  const VectorXd y = labels01(25, 4);
  const double lmax = lasso_lambda_max(x, y);
  EXPECT_NEAR(lmax, (x.transpose() * y).cwiseAbs().maxCoeff() / 25.0, 1e-15);
  EXPECT_TRUE(lasso_fit(x, y, lmax).beta.isZero(0.0));
  EXPECT_TRUE(lasso_fit(x, y, 2 * lmax).beta.isZero(0.0));
  EXPECT_FALSE(lasso_fit(x, y, 0.5 * lmax).beta.isZero(0.0));
}

TEST(Lasso, OrthonormalDesignMatchesSoftThreshold) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const int n = 30, p = 6;
    // Columns scaled so that x_j^T x_j / n = 1, which makes coordinate descent exact.
    const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(gaussian(n, p, seed)).householderQ() * MatrixXd::Identity(n, p);
    const MatrixXd x = q * std::sqrt(static_cast<double>(n));
    const VectorXd y = gaussian(n, 1, seed + 50).col(0);
    const double lambda = 0.3 * lasso_lambda_max(x, y);
    const auto fit = lasso_fit(x, y, lambda);
    for (int j = 0; j < p; ++j) {
      EXPECT_NEAR(fit.beta(j), soft_threshold(x.col(j).dot(y) / n, lambda), 1e-8);
    }
  }
}

TEST(Lasso, KktHoldsOnRandomProblems) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const int n = 15 + static_cast<int>(rng() % 30), p = 3 + static_cast<int>(rng() % 40);
    const MatrixXd x = gaussian(n, p, seed * 7 + 1);
    const VectorXd y = labels01(n, seed * 7 + 2);
    const double lambda = lasso_lambda_max(x, y) * (0.02 + 0.9 * (rng() % 1000) / 1000.0);
    const auto fit = lasso_fit(x, y, lambda, {1e-10, 200000});
    ASSERT_TRUE(fit.converged) << seed;
    const VectorXd grad = x.transpose() * (y - x * fit.beta) / n;
    for (int j = 0; j < p; ++j) {
      if (fit.beta(j) == 0.0) {
        EXPECT_LE(std::abs(grad(j)), lambda + 1e-6) << seed << " " << j;
      } else {
        EXPECT_NEAR(grad(j), lambda * (fit.beta(j) > 0 ? 1.0 : -1.0), 1e-6) << seed << " " << j;
      }
    }
  }
}

TEST(Lasso, L1NormMonotoneInLambda) {
  const MatrixXd x = gaussian(30, 20, 8);
  const VectorXd y = labels01(30, 9);
  const double lmax = lasso_lambda_max(x, y);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 20; ++k) {
    const double l1 = lasso_fit(x, y, lmax * std::pow(10.0, -2.0 + 0.1 * k), {1e-11, 200000}).beta.lpNorm<1>();
    EXPECT_LE(l1, prev + 1e-8);
    prev = l1;
  }
}

TEST(Lasso, SelectLambdaIsOnGrid) {
  const MatrixXd x = gaussian(24, 10, 12);
  VectorXd y = (x.col(2).array() > 0).cast<double>();
  const double lmax = lasso_lambda_max(x, y);
  const double l = lasso_select_lambda(x, y);
  EXPECT_GT(l, 0.0);
  EXPECT_LE(l, lmax * (1 + 1e-12));
  EXPECT_EQ(l, lasso_select_lambda(x, y));
}

TEST(Pca, CollinearPointsHaveOneComponent) {
  MatrixXd x(6, 2);
  for (int i = 0; i < 6; ++i) x.row(i) << i, 2.0 * i - 1.0;
  const auto m = pca_fit(x, {1, 0.95});
  EXPECT_NEAR(m.explained_fraction(0), 1.0, 1e-10);
  EXPECT_NEAR(std::abs(m.components(1, 0) / m.components(0, 0)), 2.0, 1e-10);
}

TEST(Pca, FullRankReconstruction) {
  const MatrixXd x = gaussian(12, 5, 3);
  const auto m = pca_fit(x, {5, 0.95});
  const MatrixXd centred = x.rowwise() - m.mean.transpose();
  const MatrixXd scores = centred * m.components;
  EXPECT_LT((scores * m.components.transpose() - centred).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, WideTableMatchesJacobiOracle) {
  const MatrixXd x = gaussian(20, 50, 5);
  const auto m = pca_fit(x, {10, 0.95});
  EXPECT_TRUE(m.dual);
  ASSERT_EQ(m.components.cols(), 10);
  EXPECT_LT((m.components.transpose() * m.components - MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-8);
  const MatrixXd centred = x.rowwise() - x.colwise().mean();
  const VectorXd oracle = jacobi_eigenvalues(centred * centred.transpose() / 20.0);
  for (int k = 0; k < 10; ++k) EXPECT_NEAR(m.explained_variance(k), oracle(k), 1e-9 * oracle(0));
  const MatrixXd scores = centred * m.components;
  const MatrixXd cov = scores.transpose() * scores / 20.0;
  for (int a = 0; a < 10; ++a)
    for (int b = 0; b < 10; ++b) {
      EXPECT_NEAR(cov(a, b), a == b ? oracle(a) : 0.0, 1e-8 * oracle(0));
    }
  for (int k = 1; k < 10; ++k) EXPECT_LE(m.explained_variance(k), m.explained_variance(k - 1));
  EXPECT_LE(m.explained_fraction.sum(), 1.0 + 1e-10);
}

TEST(Pca, TallTableUsesPrimal) {
  const MatrixXd x = gaussian(40, 6, 6);
  const auto m = pca_fit(x, {std::nullopt, 0.9});
  EXPECT_FALSE(m.dual);
  const MatrixXd centred = x.rowwise() - x.colwise().mean();
  const VectorXd oracle = jacobi_eigenvalues(centred.transpose() * centred / 40.0);
  for (int k = 0; k < m.components.cols(); ++k) EXPECT_NEAR(m.explained_variance(k), oracle(k), 1e-10);
  EXPECT_GE(m.explained_fraction.sum(), 0.9);
  if (m.components.cols() > 1) {
    EXPECT_LT(m.explained_fraction.head(m.components.cols() - 1).sum(), 0.9);
  }
}

TEST(Pca, SignConvention) {
  const auto m = pca_fit(gaussian(15, 8, 7), {4, 0.95});
  for (int k = 0; k < 4; ++k) {
    Eigen::Index at;
    m.components.col(k).cwiseAbs().maxCoeff(&at);
    EXPECT_GT(m.components(at, k), 0.0);
  }
}

TEST(Reduction, IdentityIsExactOnStandardizedRows) {
  const MatrixXd x = gaussian(10, 4, 1);
  ReductionOptions o;
  const auto t = fit_reduction(x, labels01(10, 2), o);
  EXPECT_EQ(reduce_apply(t, x), standardize_apply(t.scaler, x));
  o.standardize = false;
  EXPECT_EQ(reduce_apply(fit_reduction(x, labels01(10, 2), o), x), x);
}

TEST(Reduction, LassoKeepsSomethingWhenAllZero) {
  const MatrixXd x = gaussian(10, 4, 3);
  ReductionOptions o;
  o.kind = ReductionKind::kLasso;
  o.lambda = 1e6;
  const auto t = fit_reduction(x, labels01(10, 4), o);
  EXPECT_EQ(t.output_dim(), 1u);
}

TEST(Reduction, RecordsTrainingRows) {
  ReductionOptions o;
  o.kind = ReductionKind::kPca;
  o.pca.components = 2;
  const auto t = fit_reduction(gaussian(6, 5, 1), labels01(6, 1), o, 3, {"a", "b", "c", "d", "e", "f"});
  EXPECT_EQ(t.training_fold, 3);
  EXPECT_EQ(t.fitted_on.size(), 6u);
  EXPECT_EQ(t.output_dim(), 2u);
}

TEST(Reduction, JsonRoundTripPreservesOutputs) {
  const MatrixXd x = gaussian(20, 9, 5);
  const VectorXd y = labels01(20, 6);
  for (auto kind : {ReductionKind::kIdentity, ReductionKind::kLasso, ReductionKind::kPca}) {
    ReductionOptions o;
    o.kind = kind;
    o.pca.components = 3;
    const auto t = fit_reduction(x, y, o, 1, {"s"});
    const auto back = reduction_from_json(to_json(t));
    EXPECT_EQ(reduce_apply(back, x), reduce_apply(t, x)) << to_string(kind);
    EXPECT_EQ(to_json(back).dump(), to_json(t).dump());
  }
}

TEST(Reduction, WrongWidthRejected) {
  const auto t = fit_reduction(gaussian(6, 4, 1), labels01(6, 1), {});
  EXPECT_THROW(reduce_apply(t, gaussian(2, 5, 1)), chestprog::Error);
}

TEST(Reduction, ParseNames) {
  EXPECT_EQ(parse_reduction("lasso"), ReductionKind::kLasso);
  EXPECT_EQ(parse_reduction("pca"), ReductionKind::kPca);
  EXPECT_EQ(parse_reduction("identity"), ReductionKind::kIdentity);
  EXPECT_FALSE(parse_reduction("ica").has_value());
}
