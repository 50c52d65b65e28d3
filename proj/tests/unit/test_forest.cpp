#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ipad/forest.hpp"
#include "oracles.hpp"

using namespace ipad;

namespace {

ForestConfig config(int trees, int mtry, std::uint64_t seed) {
  ForestConfig c;
  c.n_trees = trees;
  c.mtry = mtry;
  c.seed = {seed, 3};
  return c;
}

}  // namespace

TEST(Forest, DefaultConfig) {
  const ForestConfig c = default_forest_config(100, {1, 2});
  EXPECT_EQ(c.n_trees, 500);
  EXPECT_EQ(c.mtry, 33);
  EXPECT_EQ(c.min_leaf, 5);
  EXPECT_EQ(default_forest_config(2, {}).mtry, 1);
}

TEST(Forest, ConstantResponse) {
  std::mt19937_64 eng(1);
  const Matrix a = oracle::random_matrix(40, 3, eng);
  const Vector y = Vector::Constant(40, 2.5);
  const ForestModel model = fit_forest(a, y, config(20, 2, 1));
  const Vector pred = model.predict(a);
  for (Eigen::Index i = 0; i < 40; ++i) EXPECT_DOUBLE_EQ(pred(i), 2.5);
  for (const auto& t : model.trees()) EXPECT_EQ(t.nodes().size(), 1u);
  EXPECT_EQ(mda(model, a, y, {1, 4}).importance, Vector::Zero(3));
}

TEST(Forest, NoiselessIdentityHasHighOobFit) {
  std::mt19937_64 eng(2);
  const Matrix a = oracle::random_matrix(200, 3, eng);
  const Vector y = a.col(0);
  const ForestModel model = fit_forest(a, y, config(300, 1, 2));
  const Vector oob = model.oob_predictions(a);
  double ss_res = 0.0, ss_tot = 0.0;
  const double mean = y.mean();
  for (Eigen::Index i = 0; i < 200; ++i) {
    if (std::isnan(oob(i))) continue;
    ss_res += (y(i) - oob(i)) * (y(i) - oob(i));
    ss_tot += (y(i) - mean) * (y(i) - mean);
  }
  EXPECT_GE(1.0 - ss_res / ss_tot, 0.8);
}

TEST(Forest, DeterministicAndThreadIndependent) {
  std::mt19937_64 eng(3);
  const Matrix a = oracle::random_matrix(60, 4, eng);
  const Vector y = a.col(1) + 0.3 * oracle::random_vector(60, eng);
  ForestConfig c = config(30, 2, 3);
  const Vector p1 = fit_forest(a, y, c).predict(a);
  const Vector p2 = fit_forest(a, y, c).predict(a);
  c.threads = 3;
  const ForestModel threaded = fit_forest(a, y, c);
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(p1, threaded.predict(a));
  EXPECT_EQ(mda(threaded, a, y, {7, 4}).importance, mda(threaded, a, y, {7, 4}).importance);
}

TEST(Forest, OutOfBagSetsAreDisjointFromBootstrap) {
  std::mt19937_64 eng(4);
  const Matrix a = oracle::random_matrix(50, 2, eng);
  const ForestModel model = fit_forest(a, oracle::random_vector(50, eng), config(40, 1, 4));
  double total = 0.0;
  for (const auto& rows : model.oob_rows()) {
    EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end()));
    total += static_cast<double>(rows.size());
  }
  // Expected out-of-bag share (1 - 1/n)^n is about 0.364 at n = 50.
  EXPECT_NEAR(total / (40.0 * 50.0), 0.364, 0.05);
}

TEST(Forest, RejectsBadConfigs) {
  const Matrix a = Matrix::Ones(8, 2);
  const Vector y = Vector::Ones(8);
  EXPECT_THROW(fit_forest(a, y, config(0, 1, 1)), ValidationError);
  EXPECT_THROW(fit_forest(a, y, config(5, 3, 1)), ValidationError);
  EXPECT_THROW(fit_forest(a, y, config(5, 1, 1)), ValidationError);  // 8 rows < 2 * min_leaf
  EXPECT_THROW(fit_forest(a, Vector::Ones(7), config(5, 1, 1)), ValidationError);
}

TEST(Mda, NoiseColumnIsNegligible) {
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 eng(500 + seed);
    const Matrix a = oracle::random_matrix(200, 4, eng);
    const Vector y = 3.0 * a.col(0) + 0.5 * oracle::random_vector(200, eng);
    const ForestModel model = fit_forest(a, y, config(100, 2, seed));
    const Vector imp = mda(model, a, y, {seed, 4}).importance;
    bool ok = true;
    for (int j = 1; j < 4; ++j) ok = ok && std::abs(imp(j)) <= 0.1 * imp(0);
    if (ok) ++successes;
  }
  EXPECT_GE(successes, 18);
}

TEST(Mda, IdentityModelRanksTheSignalFirst) {
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 eng(700 + seed);
    const Matrix a = oracle::random_matrix(200, 5, eng);
    const Vector y = a.col(0);
    const ForestModel model = fit_forest(a, y, config(100, 1, seed));
    Eigen::Index arg;
    mda(model, a, y, {seed, 4}).importance.maxCoeff(&arg);
    if (arg == 0) ++successes;
  }
  EXPECT_GE(successes, 18);
}

TEST(Mda, UnusedColumnHasExactlyZeroImportance) {
  std::mt19937_64 eng(5);
  Matrix a = oracle::random_matrix(80, 3, eng);
  a.col(2).setConstant(1.0);  // a constant column admits no split
  const Vector y = a.col(0) + a.col(1);
  const ForestModel model = fit_forest(a, y, config(50, 3, 5));
  for (const auto& t : model.trees()) EXPECT_FALSE(t.uses_feature(2));
  const MdaReport rep = mda(model, a, y, {5, 4});
  EXPECT_EQ(rep.importance.size(), 3);
  EXPECT_EQ(rep.importance(2), 0.0);
  EXPECT_TRUE(rep.importance.allFinite());
}
