#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ipad/sparse_regression.hpp"
#include "oracles.hpp"

using namespace ipad;

namespace {

double soft(double z, double t) { return std::copysign(std::max(std::abs(z) - t, 0.0), z); }

double scale_of(const Matrix& a, const Vector& y) { return (a.transpose() * y).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(LassoCd, FullShrinkageAboveLambdaMax) {
  std::mt19937_64 eng(1);
  const Matrix a = oracle::random_matrix(30, 8, eng);
  const Vector y = oracle::random_vector(30, eng);
  const double top = lambda_max(a, y);
  EXPECT_DOUBLE_EQ(top, 2.0 * scale_of(a, y));
  for (double lam : {top, 1.5 * top}) {
    const LassoFit fit = lasso_cd(a, y, lam);
    EXPECT_EQ(fit.beta, Vector::Zero(8));
    EXPECT_TRUE(fit.converged);
    EXPECT_EQ(kkt_check(a, y, fit.beta, lam), 0.0);
  }
}

TEST(LassoCd, SingleUnitColumnIsSoftThreshold) {
  std::mt19937_64 eng(2);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix a = oracle::random_matrix(15, 1, eng);
    a /= a.norm();
    const Vector y = oracle::random_vector(15, eng);
    const double z = a.col(0).dot(y);
    for (double lam : {0.0, 0.3 * std::abs(z), std::abs(z), 3.0 * std::abs(z)}) {
      const LassoFit fit = lasso_cd(a, y, lam);
      EXPECT_NEAR(fit.beta(0), soft(z, lam / 2.0), 1e-12);
    }
  }
}

TEST(LassoCd, OrthogonalPairMatchesLatticeSearch) {
  std::mt19937_64 eng(3);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::HouseholderQR<Matrix> qr(oracle::random_matrix(12, 2, eng));
    const Matrix a = qr.householderQ() * Matrix::Identity(12, 2);
    const Vector y = 2.0 * oracle::random_vector(12, eng);
    const double lam = 0.5 * lambda_max(a, y);
    const LassoFit fit = lasso_cd(a, y, lam);
    const Vector grid = oracle::lasso_grid_2d(a, y, lam, 10.0, 1e-6);
    for (int j = 0; j < 2; ++j) {
      EXPECT_NEAR(fit.beta(j), grid(j), 1e-4);
      EXPECT_NEAR(fit.beta(j), soft(a.col(j).dot(y), lam / 2.0), 1e-10);
    }
  }
}

TEST(LassoCd, MatchesSignPatternEnumeration) {
  std::mt19937_64 eng(4);
  std::uniform_real_distribution<double> frac(0.02, 0.9);
  for (int rep = 0; rep < 60; ++rep) {
    const int m = 1 + rep % 3;
    const Matrix a = oracle::random_matrix(10, m, eng);
    const Vector y = oracle::random_vector(10, eng);
    const double lam = frac(eng) * lambda_max(a, y);
    const LassoFit fit = lasso_cd(a, y, lam);
    ASSERT_TRUE(fit.converged);
    EXPECT_LE((fit.beta - oracle::lasso_enumerate(a, y, lam)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(fit.kkt_violation, kDefaultLassoTol * scale_of(a, y));
    EXPECT_NEAR(fit.objective, oracle::lasso_objective(a, y, fit.beta, lam), 1e-10 * fit.objective);
  }
}

TEST(LassoCd, HighDimensionalFitsAreKktOptimal) {
  std::mt19937_64 eng(5);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix a = oracle::random_matrix(60, 200, eng);
    Vector beta = Vector::Zero(200);
    beta.head(5).setConstant(2.0);
    const Vector y = a * beta + oracle::random_vector(60, eng);
    for (double frac : {0.5, 0.05, 0.002}) {
      const double lam = frac * lambda_max(a, y);
      const LassoFit fit = lasso_cd(a, y, lam);
      EXPECT_TRUE(fit.converged) << frac;
      EXPECT_LE(kkt_check(a, y, fit.beta, lam), kDefaultLassoTol * scale_of(a, y));
    }
  }
}

TEST(LassoCd, WarmStartAndPathAgreeWithColdStart) {
  std::mt19937_64 eng(6);
  const Matrix a = oracle::random_matrix(40, 25, eng);
  const Vector y = oracle::random_vector(40, eng);
  const std::vector<double> lams = lambda_grid(lambda_max(a, y), 10, 0.01);
  const std::vector<LassoFit> path = lasso_path(a, y, lams);
  ASSERT_EQ(path.size(), lams.size());
  for (std::size_t k = 0; k < lams.size(); ++k) {
    EXPECT_LE(path[k].kkt_violation, kDefaultLassoTol * scale_of(a, y));
    const LassoFit cold = lasso_cd(a, y, lams[k]);
    EXPECT_LE(std::abs(cold.objective - path[k].objective), 1e-8 * std::max(1.0, cold.objective));
  }
  const LassoFit warm = lasso_cd(a, y, lams[5], path[4].beta);
  EXPECT_TRUE(warm.converged);
}

TEST(LassoCd, ZeroColumnStaysAtZero) {
  std::mt19937_64 eng(7);
  Matrix a = oracle::random_matrix(20, 4, eng);
  a.col(2).setZero();
  const Vector y = oracle::random_vector(20, eng);
  const LassoFit fit = lasso_cd(a, y, 0.01 * lambda_max(a, y));
  EXPECT_EQ(fit.beta(2), 0.0);
  EXPECT_TRUE(fit.converged);
}

TEST(LassoCd, RejectsBadInputs) {
  EXPECT_THROW(lasso_cd(Matrix::Ones(3, 2), Vector::Ones(4), 1.0), ValidationError);
  EXPECT_THROW(lasso_cd(Matrix::Ones(3, 2), Vector::Ones(3), -1.0), ValidationError);
  EXPECT_THROW(lasso_cd(Matrix::Ones(3, 2), Vector::Ones(3), 1.0, Vector::Ones(5)), ValidationError);
}

TEST(KktCheck, DetectsPerturbation) {
  std::mt19937_64 eng(8);
  const Matrix a = oracle::random_matrix(30, 10, eng);
  const Vector y = oracle::random_vector(30, eng);
  const double lam = 0.2 * lambda_max(a, y);
  const LassoFit fit = lasso_cd(a, y, lam);
  const double tol = kDefaultLassoTol * scale_of(a, y);
  EXPECT_LE(kkt_check(a, y, fit.beta, lam), tol);
  Vector bumped = fit.beta;
  bumped(0) += 1e-3;
  EXPECT_GT(kkt_check(a, y, bumped, lam), tol);
}

TEST(LassoCv, CurveMatchesEnumerationOracle) {
  // Three columns are few enough to solve every training fit by enumeration.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 eng(100 + seed);
    const Matrix a = oracle::random_matrix(30, 3, eng);
    const Vector y = 0.5 * a.col(1) + oracle::random_vector(30, eng);
    const CvResult cv = lasso_cv(a, y, 5, 12, {seed, 0});
    ASSERT_EQ(cv.cv_mse.size(), cv.lambda_grid.size());
    for (std::size_t g = 0; g < cv.lambda_grid.size(); ++g) {
      double mse = 0.0;
      for (int k = 0; k < 5; ++k) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < 30; ++i) (cv.fold_of_row[static_cast<std::size_t>(i)] == k ? te : tr).push_back(i);
        const Matrix a_tr = a(tr, Eigen::all);
        const Vector b = oracle::lasso_enumerate(a_tr, y(tr), cv.lambda_grid[g] * 24.0 / 30.0);
        mse += (y(te) - a(te, Eigen::all) * b).squaredNorm() / 6.0 / 5.0;
      }
      EXPECT_NEAR(cv.cv_mse[g], mse, 1e-6 * mse) << seed << ' ' << g;
    }
  }
}

TEST(LassoCv, StrongSignalIsSelected) {
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 eng(200 + seed);
    const Matrix a = oracle::random_matrix(100, 30, eng);
    const Vector y = 3.0 * a.col(7) + oracle::random_vector(100, eng);
    const CvResult cv = lasso_cv(a, y, 10, 50, {seed, 0});
    if (lasso_cd(a, y, cv.lambda_star).beta(7) != 0.0) ++successes;
  }
  EXPECT_GE(successes, 18);
}

TEST(LassoCv, GridAndMinimum) {
  std::mt19937_64 eng(9);
  const Matrix a = oracle::random_matrix(50, 10, eng);
  const Vector y = a.col(0) + oracle::random_vector(50, eng);
  const CvResult cv = lasso_cv(a, y, 5, 20, {4, 4});
  ASSERT_FALSE(cv.lambda_grid.empty());
  EXPECT_DOUBLE_EQ(cv.lambda_grid.front(), lambda_max(a, y));
  for (std::size_t k = 1; k < cv.lambda_grid.size(); ++k) EXPECT_LT(cv.lambda_grid[k], cv.lambda_grid[k - 1]);
  ASSERT_EQ(cv.cv_mse.size(), cv.lambda_grid.size());
  const auto best = std::min_element(cv.cv_mse.begin(), cv.cv_mse.end()) - cv.cv_mse.begin();
  EXPECT_EQ(cv.lambda_star, cv.lambda_grid[static_cast<std::size_t>(best)]);
  EXPECT_EQ(cv.fold_of_row.size(), 50u);
  for (int f = 0; f < 5; ++f) EXPECT_EQ(std::count(cv.fold_of_row.begin(), cv.fold_of_row.end(), f), 10);
}

TEST(LassoCv, Deterministic) {
  std::mt19937_64 eng(10);
  const Matrix a = oracle::random_matrix(40, 15, eng);
  const Vector y = oracle::random_vector(40, eng);
  const CvResult c1 = lasso_cv(a, y, 10, 30, {3, 1});
  const CvResult c2 = lasso_cv(a, y, 10, 30, {3, 1});
  EXPECT_EQ(c1.lambda_grid, c2.lambda_grid);
  EXPECT_EQ(c1.cv_mse, c2.cv_mse);
  EXPECT_EQ(c1.lambda_star, c2.lambda_star);
  EXPECT_EQ(c1.fold_of_row, c2.fold_of_row);
}

TEST(LassoCv, RejectsBadFoldCounts) {
  EXPECT_THROW(lasso_cv(Matrix::Identity(5, 2), Vector::Ones(5), 6, 10, {}), ValidationError);
  EXPECT_THROW(lasso_cv(Matrix::Identity(5, 2), Vector::Ones(5), 1, 10, {}), ValidationError);
  EXPECT_THROW(lasso_cv(Matrix::Identity(5, 2), Vector::Ones(5), 2, 1, {}), ValidationError);
}

TEST(Ols, IdentityAndMean) {
  Vector y(3);
  y << 1, -2, 5;
  EXPECT_LE((ols(Matrix::Identity(3, 3), y) - y).norm(), 1e-14);
  Vector y2(2);
  y2 << 1, 3;
  EXPECT_NEAR(ols(Matrix::Ones(2, 1), y2)(0), 2.0, 1e-14);
}

TEST(Ols, MatchesGramSchmidt) {
  std::mt19937_64 eng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix a = oracle::random_matrix(20, 5, eng);
    const Vector y = oracle::random_vector(20, eng);
    const Vector b = ols(a, y);
    EXPECT_LE((b - oracle::ols_gram_schmidt(a, y)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((a.transpose() * (y - a * b)).norm(), 1e-8 * a.norm() * y.norm());
  }
}

TEST(Ols, RankDeficiencyNamesColumn) {
  std::mt19937_64 eng(12);
  Matrix a = oracle::random_matrix(10, 3, eng);
  a.col(2) = a.col(0) - a.col(1);
  try {
    ols(a, oracle::random_vector(10, eng));
    FAIL() << "expected a rank-deficiency error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("column"), std::string::npos);
  }
  EXPECT_THROW(ols(Matrix::Ones(2, 3), Vector::Ones(2)), ValidationError);
}

TEST(Serialization, SparseJson) {
  LassoFit fit;
  fit.beta = Vector::Zero(4);
  fit.beta(2) = 1.5;
  fit.lambda = 0.25;
  const std::string js = lasso_fit_to_json(fit);
  EXPECT_NE(js.find("\"beta\""), std::string::npos);
  EXPECT_NE(js.find("1.5"), std::string::npos);
}
