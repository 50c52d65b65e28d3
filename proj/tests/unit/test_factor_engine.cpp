#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ipad/factor_engine.hpp"
#include "oracles.hpp"

using namespace ipad;

namespace {

Matrix planted_factors(int n, int p, int r, double noise, std::mt19937_64& eng) {
  const Matrix f = oracle::random_matrix(n, r, eng);
  const Matrix l = oracle::random_matrix(p, r, eng);
  return f * l.transpose() + noise * oracle::random_matrix(n, p, eng);
}

// PC_p1 evaluated from eigen truncations rather than the production SVD.
std::vector<double> brute_pc_p1(const Matrix& x, int r_max) {
  const double n = static_cast<double>(x.rows()), p = static_cast<double>(x.cols());
  std::vector<double> v(static_cast<std::size_t>(r_max) + 1);
  for (int k = 0; k <= r_max; ++k)
    v[static_cast<std::size_t>(k)] = (x - oracle::eigen_truncation(x, k)).squaredNorm() / (n * p);
  const double sbar = v.back();
  const double pen = (n + p) / (n * p) * std::log(n * p / (n + p));
  std::vector<double> out(v.size());
  for (int k = 0; k <= r_max; ++k)
    out[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)] + k * sbar * pen;
  return out;
}

}  // namespace

TEST(FitPc, ExactRankOne) {
  Matrix x(2, 2);
  x << 1, 2, 2, 4;
  const FactorEstimate fe = fit_pc(x, 1);
  EXPECT_LE((fe.c_hat - x).norm(), 1e-12);
  EXPECT_LE(fe.e_hat.norm(), 1e-12);
  EXPECT_NEAR(fe.sigma2_hat, 0.0, 1e-24);
}

TEST(FitPc, ZeroFactors) {
  std::mt19937_64 eng(1);
  const Matrix x = oracle::random_matrix(5, 4, eng);
  const FactorEstimate fe = fit_pc(x, 0);
  EXPECT_EQ(fe.r_hat, 0);
  EXPECT_EQ(fe.c_hat, Matrix::Zero(5, 4));
  EXPECT_EQ(fe.e_hat, x);
  EXPECT_EQ(fe.f_hat.cols(), 0);
}

TEST(FitPc, MatchesEigenTruncation) {
  std::mt19937_64 eng(2);
  for (int rep = 0; rep < 25; ++rep) {
    const Matrix x = oracle::random_matrix(6, 5, eng);
    const FactorEstimate fe = fit_pc(x, 2);
    EXPECT_LE((fe.c_hat - oracle::eigen_truncation(x, 2)).norm(), 1e-8);
  }
}

TEST(FitPc, StructuralInvariants) {
  std::mt19937_64 eng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix x = planted_factors(40, 30, 3, 0.5, eng);
    const FactorEstimate fe = fit_pc(x, 3);
    const double n = 40.0;
    EXPECT_LE((fe.f_hat.transpose() * fe.f_hat / n - Matrix::Identity(3, 3)).norm(), 1e-10);
    EXPECT_LE((fe.lambda_hat - x.transpose() * fe.f_hat / n).norm(), 1e-10 * x.norm());
    EXPECT_LE((fe.c_hat - fe.f_hat * fe.lambda_hat.transpose()).norm(), 1e-10 * x.norm());
    EXPECT_LE((fe.c_hat + fe.e_hat - x).norm(), 1e-14 * x.norm());
    EXPECT_LE((fe.c_hat.transpose() * fe.e_hat).norm(), 1e-8 * std::max(1.0, x.squaredNorm()));
    EXPECT_NEAR(fe.sigma2_hat, fe.e_hat.squaredNorm() / (40.0 * 30.0), 1e-12);
    Eigen::JacobiSVD<Matrix> svd(fe.c_hat);
    svd.setThreshold(1e-10);
    EXPECT_LE(svd.rank(), 3);
  }
}

TEST(FitPc, OrientationIsDeterministic) {
  std::mt19937_64 eng(4);
  const Matrix x = planted_factors(30, 20, 2, 0.3, eng);
  const FactorEstimate a = fit_pc(x, 2);
  const FactorEstimate b = fit_pc(x, 2);
  EXPECT_EQ(a.f_hat, b.f_hat);
  EXPECT_EQ(a.lambda_hat, b.lambda_hat);
  for (Eigen::Index k = 0; k < 2; ++k) {
    Eigen::Index arg;
    a.lambda_hat.col(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(a.lambda_hat(arg, k), 0.0);
  }
}

TEST(FitPc, NoWorseThanAlternatingLeastSquares) {
  std::mt19937_64 eng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix x = oracle::random_matrix(8, 6, eng);
    const FactorEstimate fe = fit_pc(x, 2);
    const Matrix als = oracle::als_low_rank(x, 2, 1e-6, eng);
    EXPECT_LE((x - fe.c_hat).norm(), (x - als).norm() + 1e-10);
  }
}

TEST(FitPc, RejectsBadRank) {
  EXPECT_THROW(fit_pc(Matrix::Ones(3, 4), 4), ValidationError);
  EXPECT_THROW(fit_pc(Matrix::Ones(3, 4), -1), ValidationError);
  Matrix bad = Matrix::Ones(3, 3);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(fit_pc(bad, 1), NumericalError);
}

TEST(NumFactors, StrongThreeFactorModel) {
  std::mt19937_64 eng(6);
  const Matrix x = planted_factors(200, 200, 3, 0.01, eng);
  EXPECT_EQ(estimate_num_factors(x, 8), 3);
}

TEST(NumFactors, PureNoiseGivesZero) {
  std::mt19937_64 eng(7);
  const Matrix x = oracle::random_matrix(200, 200, eng);
  const std::vector<double> brute = brute_pc_p1(x, 8);
  const auto argmin = std::min_element(brute.begin(), brute.end()) - brute.begin();
  EXPECT_EQ(argmin, 0);
  EXPECT_EQ(estimate_num_factors(x, 8), 0);
}

TEST(NumFactors, CriterionMatchesBruteForce) {
  std::mt19937_64 eng(8);
  const Matrix x = planted_factors(40, 30, 2, 1.0, eng);
  const std::vector<double> crit = pc_p1_criterion(x, 6);
  const std::vector<double> brute = brute_pc_p1(x, 6);
  ASSERT_EQ(crit.size(), brute.size());
  for (std::size_t k = 0; k < crit.size(); ++k) EXPECT_NEAR(crit[k], brute[k], 1e-10 * brute[0]);
}

TEST(NumFactors, ExactRankOne) {
  std::mt19937_64 eng(9);
  const Matrix x = oracle::random_vector(12, eng) * oracle::random_vector(10, eng).transpose();
  EXPECT_EQ(estimate_num_factors(x, 4), 1);
}

TEST(NumFactors, ScaleEquivariant) {
  std::mt19937_64 eng(10);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix x = planted_factors(50, 40, 2, 0.8, eng);
    const int k = estimate_num_factors(x, 5);
    EXPECT_EQ(estimate_num_factors(x * 37.5, 5), k);
    EXPECT_EQ(estimate_num_factors(x * 1e-3, 5), k);
  }
}

TEST(NumFactors, RejectsOutOfRangeBound) {
  EXPECT_THROW(estimate_num_factors(Matrix::Ones(10, 10), 0), ValidationError);
  EXPECT_THROW(estimate_num_factors(Matrix::Ones(10, 10), 6), ValidationError);
  EXPECT_LE(default_r_max(10, 10), 5);
  EXPECT_EQ(default_r_max(500, 500), 8);
}

TEST(NoiseVariance, HandValues) {
  Matrix pm(2, 2);
  pm << 1, -1, -1, 1;
  EXPECT_DOUBLE_EQ(noise_variance(pm), 1.0);
  EXPECT_DOUBLE_EQ(noise_variance(Matrix::Zero(3, 2)), 0.0);
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_DOUBLE_EQ(noise_variance(m), 7.5);
}

TEST(Serialization, WritesAllParts) {
  std::mt19937_64 eng(11);
  const FactorEstimate fe = fit_pc(oracle::random_matrix(6, 4, eng), 1);
  const auto dir = std::filesystem::temp_directory_path() / "ipad_fe_serialization";
  std::filesystem::remove_all(dir);
  save_factor_estimate(fe, dir);
  for (const char* f : {"f_hat.csv", "lambda_hat.csv", "c_hat.csv", "e_hat.csv", "header.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  std::filesystem::remove_all(dir);
}
