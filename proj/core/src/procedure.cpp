#include "ipad/procedure.hpp"

#include <algorithm>

#include "ipad/factor_engine.hpp"
#include "ipad/forest.hpp"
#include "ipad/sparse_regression.hpp"

namespace ipad {

ProcedureResult run_ipad(const Matrix& x, const Vector& y, const ProcedureOptions& opt, const SeedSpec& seed) {
  if (x.rows() != y.size()) throw ValidationError("ipad: response length does not match design rows");
  int r = 0;
  if (opt.fixed_rank) {
    r = *opt.fixed_rank;
  } else {
    const int r_max = std::min(opt.r_max, default_r_max(x.rows(), x.cols(), opt.r_max));
    r = r_max >= 1 ? estimate_num_factors(x, r_max) : 0;
  }
  const FactorEstimate fe = fit_pc(x, r);
  const KnockoffMatrix k = generate(fe.c_hat, fe.sigma2_hat, child(seed, 1));
  ProcedureResult res = run_knockoff_inference(x, k, y, opt, seed);
  res.r_hat = r;
  res.sigma2_hat = fe.sigma2_hat;
  return res;
}

ProcedureResult run_knockoff_inference(const Matrix& x, const KnockoffMatrix& knockoffs, const Vector& y,
                                       const ProcedureOptions& opt, const SeedSpec& seed) {
  const Matrix a = augment(x, knockoffs);
  ProcedureResult res;
  res.sigma2_hat = knockoffs.sigma2_used;

  if (opt.statistic == StatisticKind::lcd) {
    if (opt.lambda) {
      res.lambda = *opt.lambda;
    } else {
      res.lambda = lasso_cv(a, y, opt.cv_folds, opt.cv_grid, child(seed, 2)).lambda_star;
    }
    const LassoFit fit = lasso_cd(a, y, res.lambda);
    res.raw = fit.beta;
    res.w = lcd(fit.beta);
  } else {
    ForestConfig cfg = default_forest_config(a.cols(), child(seed, 3));
    cfg.n_trees = opt.forest_trees;
    cfg.min_leaf = opt.forest_min_leaf;
    if (opt.forest_mtry) cfg.mtry = *opt.forest_mtry;
    cfg.threads = opt.threads;
    const ForestModel model = fit_forest(a, y, cfg);
    res.raw = mda(model, a, y, child(seed, 4)).importance;
    res.w = mda_diff(res.raw);
  }
  res.knockoff = knockoff_select(res.w, opt.q, false);
  res.knockoff_plus = knockoff_select(res.w, opt.q, true);
  return res;
}

}  // namespace ipad
