#pragma once

#include <optional>

#include "ipad/data_model.hpp"
#include "ipad/knockoff_factory.hpp"
#include "ipad/knockoff_inference.hpp"

namespace ipad {

/// Settings for one run of the IPAD selection procedure.
struct ProcedureOptions {
  double q = 0.2;
  StatisticKind statistic = StatisticKind::lcd;
  int r_max = 8;                    // PC_p1 search bound, further capped at min(n,p)/2
  std::optional<int> fixed_rank;    // skip PC_p1 and use this many factors
  int cv_folds = 10;
  int cv_grid = 50;
  std::optional<double> lambda;     // fixed Lasso penalty instead of cross-validation
  int forest_trees = 500;
  int forest_min_leaf = 5;
  std::optional<int> forest_mtry;   // default max(floor(2p/3), 1)
  int threads = 1;
};

struct ProcedureResult {
  int r_hat = 0;
  double sigma2_hat = 0.0;
  double lambda = 0.0;     // penalty used for LCD; 0 for the forest statistic
  Vector raw;              // augmented Lasso coefficients or MDA importances (length 2p)
  WStats w;
  SelectionResult knockoff;       // threshold T1
  SelectionResult knockoff_plus;  // threshold T2
};

/// Estimate the factor model of x, draw empirical knockoffs and run knockoff
/// inference. Random streams: child(seed, 1) knockoffs, child(seed, 2) CV folds,
/// child(seed, 3) forest, child(seed, 4) MDA permutations.
ProcedureResult run_ipad(const Matrix& x, const Vector& y, const ProcedureOptions& opt, const SeedSpec& seed);

/// Knockoff inference given an already constructed knockoff matrix.
ProcedureResult run_knockoff_inference(const Matrix& x, const KnockoffMatrix& knockoffs, const Vector& y,
                                       const ProcedureOptions& opt, const SeedSpec& seed);

}  // namespace ipad
