#include <benchmark/benchmark.h>

#include <random>

#include "ipad/factor_engine.hpp"
#include "ipad/forest.hpp"
#include "ipad/knockoff_factory.hpp"
#include "ipad/knockoff_inference.hpp"
#include "ipad/sparse_regression.hpp"

namespace {

ipad::Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z;
  ipad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = z(eng);
  return m;
}

// Augmented design of a factor model with a sparse linear response.
struct Problem {
  ipad::Matrix a;
  ipad::Vector y;
};

Problem augmented_problem(int n, int p) {
  const ipad::Matrix x = gaussian(n, 3, 1) * gaussian(p, 3, 2).transpose() + gaussian(n, p, 3);
  const ipad::FactorEstimate fe = ipad::fit_pc(x, 3);
  ipad::Matrix a = ipad::augment(x, ipad::generate(fe.c_hat, fe.sigma2_hat, {4, 0}));
  for (Eigen::Index j = 0; j < a.cols(); ++j) a.col(j) /= a.col(j).norm();
  ipad::Vector beta = ipad::Vector::Zero(a.cols());
  for (int j = 0; j < p / 20; ++j) beta(j * 7) = 4.0;
  const ipad::Vector y = a * beta + 0.45 * gaussian(n, 1, 5).col(0);
  return {a, y};
}

void BM_LassoCd(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Problem pr = augmented_problem(n, n);
  const double lam = 0.05 * ipad::lambda_max(pr.a, pr.y);
  for (auto _ : state) benchmark::DoNotOptimize(ipad::lasso_cd(pr.a, pr.y, lam).beta.data());
}
BENCHMARK(BM_LassoCd)->Arg(100)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_LassoCv(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Problem pr = augmented_problem(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(ipad::lasso_cv(pr.a, pr.y, 10, 50, {1, 2}).lambda_star);
}
BENCHMARK(BM_LassoCv)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_FitPc(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ipad::Matrix x = gaussian(n, n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(ipad::fit_pc(x, 3).c_hat.data());
}
BENCHMARK(BM_FitPc)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_EstimateNumFactors(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ipad::Matrix x = gaussian(n, 3, 7) * gaussian(n, 3, 8).transpose() + gaussian(n, n, 9);
  for (auto _ : state) benchmark::DoNotOptimize(ipad::estimate_num_factors(x, 8));
}
BENCHMARK(BM_EstimateNumFactors)->Arg(200)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_ForestAndMda(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ipad::Matrix a = gaussian(n, 100, 10);
  const ipad::Vector lin = a.leftCols(10).rowwise().sum() / 4.0;
  const ipad::Vector y = lin.array().sin() * lin.array().exp();
  ipad::ForestConfig cfg = ipad::default_forest_config(a.cols(), {11, 0});
  cfg.n_trees = 100;
  for (auto _ : state) {
    const ipad::ForestModel model = ipad::fit_forest(a, y, cfg);
    benchmark::DoNotOptimize(ipad::mda(model, a, y, {12, 0}).importance.data());
  }
}
BENCHMARK(BM_ForestAndMda)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_KnockoffThreshold(benchmark::State& state) {
  const ipad::WStats w{gaussian(state.range(0), 1, 13).col(0), ipad::StatisticKind::lcd};
  for (auto _ : state) benchmark::DoNotOptimize(ipad::knockoff_threshold(w, 0.2, true));
}
BENCHMARK(BM_KnockoffThreshold)->Arg(500)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
