#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ipad/factor_engine.hpp"
#include "ipad/simlab.hpp"
#include "oracles.hpp"

using namespace ipad;

namespace {

DesignSpec small_spec(Design d) {
  DesignSpec s;
  s.design = d;
  s.n = 80;
  s.p = 40;
  s.s = 6;
  s.r = d == Design::d3 ? 0 : 2;
  s.reps = 4;
  s.seed = {123, 0};
  s.forest_trees = 40;
  return s;
}

}  // namespace

TEST(Designs, NamesRoundTrip) {
  for (Design d : {Design::d1, Design::d2, Design::d3, Design::d4, Design::real_x})
    EXPECT_EQ(design_from_string(to_string(d)), d);
  EXPECT_EQ(design_from_string("3"), Design::d3);
  EXPECT_THROW(design_from_string("7"), ValidationError);
}

TEST(Designs, Validation) {
  DesignSpec s = small_spec(Design::d3);
  s.r = 1;
  EXPECT_THROW(validate(s), ValidationError);
  s = small_spec(Design::d1);
  s.s = 41;
  EXPECT_THROW(validate(s), ValidationError);
  s = small_spec(Design::d2);
  s.oracle_knockoffs = true;
  EXPECT_THROW(validate(s), ValidationError);
  s = small_spec(Design::real_x);
  EXPECT_THROW(validate(s), ValidationError);
  EXPECT_NO_THROW(validate(small_spec(Design::d4)));
}

TEST(GenDesign, CoefficientsHaveTheStatedShape) {
  DesignSpec s = small_spec(Design::d1);
  s.p = 100;
  s.s = 50;
  const GeneratedData g = gen_design(s, 0);
  EXPECT_EQ((g.beta.array() != 0.0).count(), 50);
  for (int j : g.support) EXPECT_EQ(std::abs(g.beta(j)), s.amplitude);
  EXPECT_EQ(g.support.size(), 50u);
  EXPECT_TRUE(std::is_sorted(g.support.begin(), g.support.end()));
  for (Eigen::Index j = 0; j < g.x.cols(); ++j) EXPECT_NEAR(g.x.col(j).norm(), 1.0, 1e-12);
  const int positive = static_cast<int>((g.beta.array() > 0.0).count());
  EXPECT_GT(positive, 10);
  EXPECT_LT(positive, 40);
}

TEST(GenDesign, Deterministic) {
  const DesignSpec s = small_spec(Design::d2);
  const GeneratedData a = gen_design(s, 3);
  const GeneratedData b = gen_design(s, 3);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.support, b.support);
  EXPECT_NE(a.x, gen_design(s, 4).x);
}

TEST(GenDesign, IndependentRowsWithoutCorrelation) {
  DesignSpec s = small_spec(Design::d3);
  s.n = 2000;
  s.p = 10;
  s.rho = 0.0;
  const GeneratedData g = gen_design(s, 0);
  const Matrix raw = g.x * g.column_norms.asDiagonal();
  const Matrix cov = raw.transpose() * raw / static_cast<double>(s.n);
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(cov(i, i), 1.0, 0.1);
    for (int j = 0; j < i; ++j) EXPECT_LE(std::abs(cov(i, j)), 0.1);
  }
}

TEST(GenDesign, AutoregressiveCovariance) {
  DesignSpec s = small_spec(Design::d3);
  s.n = 4000;
  s.p = 6;
  s.rho = 0.5;
  const GeneratedData g = gen_design(s, 1);
  const Matrix raw = g.x * g.column_norms.asDiagonal();
  const Matrix cov = raw.transpose() * raw / static_cast<double>(s.n);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(cov(i, j), std::pow(0.5, std::abs(i - j)), 0.08);
}

TEST(GenDesign, FatTailedErrors) {
  DesignSpec s = small_spec(Design::d2);
  s.n = 500;
  s.p = 200;
  s.nu_df = 8;
  const GeneratedData g = gen_design(s, 0);
  const Matrix raw = g.x * g.column_norms.asDiagonal();
  const Matrix e = raw - g.c0;
  const double mean = e.mean();
  const double m2 = (e.array() - mean).square().mean();
  const double m4 = (e.array() - mean).pow(4).mean();
  EXPECT_GT(m4 / (m2 * m2) - 3.0, 0.5);
}

TEST(GenDesign, FactorGramStructure) {
  // Given the common component, E[raw' raw / n] = C0' C0 / n + r theta I.
  DesignSpec s = small_spec(Design::d1);
  s.n = 400;
  s.p = 20;
  s.r = 3;
  s.theta = 1.5;
  double diag_err = 0.0, off_err = 0.0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    const GeneratedData g = gen_design(s, rep);
    const Matrix raw = g.x * g.column_norms.asDiagonal();
    const Matrix d = (raw.transpose() * raw - g.c0.transpose() * g.c0) / s.n -
                     s.r * s.theta * Matrix::Identity(s.p, s.p);
    diag_err += d.diagonal().mean();
    off_err += (d.sum() - d.diagonal().sum()) / (s.p * (s.p - 1.0));
    EXPECT_NEAR(g.sigma2_0, 4.5, 1e-15);
  }
  // Standard errors of both averages are well below 0.1 at these sizes.
  EXPECT_LE(std::abs(diag_err / reps), 0.1);
  EXPECT_LE(std::abs(off_err / reps), 0.1);
}

TEST(GenDesign, NonlinearResponse) {
  const GeneratedData g = gen_design(small_spec(Design::d4), 0);
  const Vector lin = g.x * g.beta;
  for (Eigen::Index i = 0; i < lin.size(); ++i)
    EXPECT_NEAR(g.signal(i), std::sin(lin(i)) * std::exp(lin(i)), 1e-12 * std::max(1.0, std::abs(g.signal(i))));
}

TEST(GenDesign, RealDesignIsCenteredAndRescaled) {
  std::mt19937_64 eng(1);
  DesignSpec s = small_spec(Design::real_x);
  s.r = 0;
  auto x = std::make_shared<Matrix>(oracle::random_matrix(s.n, s.p, eng) + Matrix::Constant(s.n, s.p, 3.0));
  s.real_x = x;
  const GeneratedData g = gen_design(s, 0);
  for (Eigen::Index j = 0; j < s.p; ++j) {
    EXPECT_NEAR(g.x.col(j).norm(), 1.0, 1e-12);
    EXPECT_LE(std::abs(g.x.col(j).mean()), 1e-12);
  }
}

TEST(RunRep, DeterministicRecord) {
  const DesignSpec s = small_spec(Design::d1);
  const RepRecord a = run_rep(s, 2);
  const RepRecord b = run_rep(s, 2);
  EXPECT_FALSE(a.failed) << a.error;
  EXPECT_EQ(a.fdp, b.fdp);
  EXPECT_EQ(a.tdp, b.tdp);
  EXPECT_EQ(a.fdp_plus, b.fdp_plus);
  EXPECT_EQ(a.r2, b.r2);
  EXPECT_GE(a.r2, 0.0);
  EXPECT_LE(a.r2, 1.0);
  EXPECT_LE(a.selected_plus, a.selected);
}

TEST(RunRep, OracleKnockoffs) {
  DesignSpec s = small_spec(Design::d1);
  s.oracle_knockoffs = true;
  const RepRecord rec = run_rep(s, 0);
  EXPECT_FALSE(rec.failed) << rec.error;
  EXPECT_EQ(rec.r_hat, s.r);
}

TEST(RunRep, ForestDesign) {
  const RepRecord rec = run_rep(small_spec(Design::d4), 0);
  EXPECT_FALSE(rec.failed) << rec.error;
}

TEST(MonteCarlo, AggregatesAndWorkerIndependence) {
  const DesignSpec s = small_spec(Design::d1);
  const SimulationReport serial = run_monte_carlo(s, 1);
  const SimulationReport parallel = run_monte_carlo(s, 3);
  EXPECT_EQ(report_json(serial), report_json(parallel));
  ASSERT_EQ(serial.reps_completed, 4);
  double fdr = 0.0, power = 0.0, fdr_plus = 0.0, power_plus = 0.0, r2 = 0.0;
  for (const auto& r : serial.per_rep) {
    fdr += r.fdp / 4;
    power += r.tdp / 4;
    fdr_plus += r.fdp_plus / 4;
    power_plus += r.tdp_plus / 4;
    r2 += r.r2 / 4;
  }
  EXPECT_NEAR(serial.fdr, fdr, 1e-12);
  EXPECT_NEAR(serial.power, power, 1e-12);
  EXPECT_NEAR(serial.fdr_plus, fdr_plus, 1e-12);
  EXPECT_NEAR(serial.power_plus, power_plus, 1e-12);
  EXPECT_NEAR(serial.r2_mean, r2, 1e-12);
}

TEST(MonteCarlo, CsvSchema) {
  DesignSpec s = small_spec(Design::d1);
  s.reps = 1;
  const std::string csv = report_csv(run_monte_carlo(s, 1));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "design,n,p,s,A,c,r,theta,q,reps,fdr,power,fdr_plus,power_plus,r2");
  EXPECT_EQ(csv.substr(csv.find('\n') + 1, 19), "d1,80,40,6,4,0.2,2,");
}
