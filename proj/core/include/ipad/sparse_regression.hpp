#pragma once

#include <string>
#include <vector>

#include "ipad/data_model.hpp"

namespace ipad {

// Lasso with the un-normalised objective
//
//     L(b) = ||y - A b||_2^2 + lambda * ||b||_1
//
// Stationarity reads 2 a_j'(y - A b) = lambda * sign(b_j) on the support and
// |2 a_j'(y - A b)| <= lambda off it; every residual below is measured on the
// 2 a_j' r scale. The smallest lambda giving b = 0 is 2 ||A'y||_inf.

struct LassoFit {
  Vector beta;
  double lambda = 0.0;
  int n_iterations = 0;        // coordinate sweeps (full or active-set)
  double kkt_violation = 0.0;  // kkt_check at beta
  double objective = 0.0;
  bool converged = false;      // kkt_violation <= tol * max(||A'y||_inf, 1e-300)
};

inline constexpr double kDefaultLassoTol = 1e-7;
inline constexpr int kDefaultMaxSweeps = 10000;

/// Cyclic coordinate descent with active-set cycling. Non-convergence is not an
/// error: the fit comes back with converged == false. Zero-norm columns stay at 0.
LassoFit lasso_cd(const Matrix& a, const Vector& y, double lambda,
                  double tol = kDefaultLassoTol, int max_sweeps = kDefaultMaxSweeps);

/// Same, warm-started from `beta0`.
LassoFit lasso_cd(const Matrix& a, const Vector& y, double lambda, const Vector& beta0,
                  double tol = kDefaultLassoTol, int max_sweeps = kDefaultMaxSweeps);

/// Solutions along a descending lambda sequence, each warm-started from the previous one.
std::vector<LassoFit> lasso_path(const Matrix& a, const Vector& y, const std::vector<double>& lambdas,
                                 double tol = kDefaultLassoTol, int max_sweeps = kDefaultMaxSweeps);

/// Maximum KKT residual of `beta` for the objective above.
double kkt_check(const Matrix& a, const Vector& y, const Vector& beta, double lambda);

double lasso_objective(const Matrix& a, const Vector& y, const Vector& beta, double lambda);

/// 2 ||A'y||_inf.
double lambda_max(const Matrix& a, const Vector& y);

/// `size` log-spaced values from `top` down to top * min_ratio.
std::vector<double> lambda_grid(double top, int size, double min_ratio = 1e-3);

struct CvResult {
  std::vector<double> lambda_grid;  // strictly descending
  std::vector<double> cv_mse;       // mean held-out MSE per grid point
  double lambda_star = 0.0;
  SeedSpec fold_assignment_seed;
  std::vector<int> fold_of_row;
};

/// K-fold cross-validation over lambda_grid(lambda_max(a, y), grid_size).
///
/// Folds are a seeded random partition (row i goes to fold position(i) mod K).
/// Training-fold fits use lambda * n_train / n so the per-row penalty matches
/// the full-data objective. A fold's path stops once its training fit explains
/// more than 99.9% of ||y_train||^2; the grid is truncated to the prefix every
/// fold reached.
CvResult lasso_cv(const Matrix& a, const Vector& y, int n_folds, int grid_size,
                  const SeedSpec& seed);

/// Least squares via column-pivoted QR. Throws NumericalError naming the first
/// dependent column when `a` is numerically rank deficient.
Vector ols(const Matrix& a, const Vector& y);

/// {"lambda":..,"objective":..,"beta":[[index,value],...]} with nonzero entries only.
std::string lasso_fit_to_json(const LassoFit& fit);

}  // namespace ipad
