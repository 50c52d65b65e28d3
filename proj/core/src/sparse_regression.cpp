#include "ipad/sparse_regression.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <json.hpp>

namespace ipad {

namespace {

double soft(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

void check_shapes(const Matrix& a, const Vector& y, double lambda) {
  if (a.rows() != y.size()) throw ValidationError("lasso: design rows do not match response length");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lasso: lambda must be finite and >= 0");
  if (!a.allFinite() || !y.allFinite()) throw NumericalError("lasso: non-finite input");
}

double kkt_from_gradient(const Vector& grad, const Vector& beta, double lambda) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double g = grad(j);
    double v;
    if (beta(j) > 0.0) v = std::abs(g - lambda);
    else if (beta(j) < 0.0) v = std::abs(g + lambda);
    else v = std::max(0.0, std::abs(g) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

// Coordinate-descent state shared along a lambda path.
constexpr int kActiveSweeps = 50;
constexpr int kNewtonRounds = 32;

class CdSolver {
 public:
  CdSolver(const Matrix& a, const Vector& y)
      : a_(a), y_(y), col_sq_(a.colwise().squaredNorm().transpose()),
        col_norm_(col_sq_.cwiseSqrt()), beta_(Vector::Zero(a.cols())), r_(y) {
    scale_ = std::max((a.transpose() * y).cwiseAbs().maxCoeff(), 1e-300);
    if (a.cols() == 0) scale_ = 1e-300;
    max_norm_ = a.cols() ? col_norm_.maxCoeff() : 0.0;
    gram_cache_.resize(static_cast<std::size_t>(a.cols()));
  }

  void warm_start(const Vector& beta0) {
    if (beta0.size() != a_.cols()) throw ValidationError("lasso: warm start has wrong length");
    beta_ = beta0;
    for (Eigen::Index j = 0; j < beta_.size(); ++j)
      if (col_sq_(j) == 0.0) beta_(j) = 0.0;
    refresh_residual();
  }

  LassoFit solve(double lambda, double tol, int max_sweeps) {
    const double half = 0.5 * lambda;
    const double target = tol * scale_;
    const double inner_target = 0.25 * target;
    int sweeps = 0;
    double kkt = std::numeric_limits<double>::infinity();
    Vector grad;

    while (sweeps < max_sweeps) {
      sweep_all(half, lambda);
      ++sweeps;
      for (int inner = 0; inner < kActiveSweeps && sweeps < max_sweeps; ++inner) {
        const double change = sweep_active(half, lambda);
        ++sweeps;
        if (change <= inner_target) break;
      }
      refresh_residual();
      grad = 2.0 * (a_.transpose() * r_);
      kkt = kkt_from_gradient(grad, beta_, lambda);
      if (kkt <= target) break;
      if (newton_step(half, lambda)) {
        grad = 2.0 * (a_.transpose() * r_);
        kkt = kkt_from_gradient(grad, beta_, lambda);
        if (kkt <= target) break;
      }
    }
    if (kkt <= target) kkt = polish(half, lambda, kkt);

    LassoFit fit;
    fit.beta = beta_;
    fit.lambda = lambda;
    fit.n_iterations = sweeps;
    fit.kkt_violation = kkt;
    fit.objective = r_.squaredNorm() + lambda * beta_.lpNorm<1>();
    fit.converged = kkt <= target;
    return fit;
  }

  const Vector& residual() const { return r_; }
  const Vector& beta() const { return beta_; }

 private:
  // Returns an upper bound on how much any gradient entry moved.
  double update(Eigen::Index j, double half) {
    if (col_sq_(j) == 0.0) return 0.0;
    const double old = beta_(j);
    const double rho = a_.col(j).dot(r_) + col_sq_(j) * old;
    const double fresh = soft(rho, half) / col_sq_(j);
    if (fresh == old) return 0.0;
    r_.noalias() -= (fresh - old) * a_.col(j);
    beta_(j) = fresh;
    return 2.0 * std::abs(fresh - old) * col_norm_(j) * max_norm_;
  }

  void sweep_all(double half, double lambda) {
    [[maybe_unused]] const double before = objective(lambda);
    for (Eigen::Index j = 0; j < beta_.size(); ++j) update(j, half);
    assert(objective(lambda) <= before * (1.0 + 1e-10) + 1e-12);
  }

  double sweep_active(double half, double lambda) {
    [[maybe_unused]] const double before = objective(lambda);
    double change = 0.0;
    for (Eigen::Index j = 0; j < beta_.size(); ++j)
      if (beta_(j) != 0.0) change = std::max(change, update(j, half));
    assert(objective(lambda) <= before * (1.0 + 1e-10) + 1e-12);
    return change;
  }

  // Feature-sign step on the current support S with signs s: the minimizer of
  // ||y - A_S b||^2 + lambda s'b solves (A_S'A_S) b = A_S'y - (lambda/2) s. If
  // it keeps every sign it is taken; otherwise the segment towards it is cut at
  // the zero crossing with the lowest objective. Either way the objective drops.
  bool newton_step(double half, double lambda) {
    bool moved = false;
    for (int round = 0; round < kNewtonRounds; ++round) {
      std::vector<Eigen::Index> support;
      for (Eigen::Index j = 0; j < beta_.size(); ++j)
        if (beta_(j) != 0.0) support.push_back(j);
      const auto k = static_cast<Eigen::Index>(support.size());
      if (k == 0 || k > a_.rows()) return moved;
      const Matrix as = a_(Eigen::all, support);
      Matrix gram(k, k);
      for (Eigen::Index l = 0; l < k; ++l) gram.col(l) = gram_col(support[static_cast<std::size_t>(l)])(support);
      const Vector old = beta_(support);
      Vector rhs = as.transpose() * y_;
      for (Eigen::Index i = 0; i < k; ++i) rhs(i) -= old(i) > 0 ? half : -half;
      const Eigen::LDLT<Matrix> ldlt(gram);
      if (ldlt.info() != Eigen::Success) return moved;
      Vector b = ldlt.solve(rhs);
      b += ldlt.solve(rhs - gram * b);
      if (!b.allFinite()) return moved;

      const Vector d = b - old;
      const Vector u = as * d;
      const double r0u = r_.dot(u);
      const double uu = u.squaredNorm();
      const double r0r0 = r_.squaredNorm();
      // Breakpoints where a coordinate crosses zero; between them the l1 term is linear.
      std::vector<std::pair<double, Eigen::Index>> cross;
      for (Eigen::Index i = 0; i < k; ++i) {
        if ((old(i) > 0) == (d(i) > 0) || d(i) == 0.0) continue;
        const double t = -old(i) / d(i);
        if (t > 0.0 && t < 1.0) cross.emplace_back(t, i);
      }
      std::sort(cross.begin(), cross.end());
      double l1 = old.lpNorm<1>();
      double slope = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) slope += (old(i) > 0 ? d(i) : -d(i));
      double t_prev = 0.0;
      double best_t = 1.0;
      Eigen::Index best_zero = -1;
      double best_f = std::numeric_limits<double>::infinity();
      for (const auto& [t, i] : cross) {
        l1 += slope * (t - t_prev);
        t_prev = t;
        slope += 2.0 * std::abs(d(i));
        const double ft = r0r0 - 2.0 * t * r0u + t * t * uu + lambda * l1;
        if (ft < best_f) {
          best_f = ft;
          best_t = t;
          best_zero = i;
        }
      }
      l1 += slope * (1.0 - t_prev);
      if (const double f1 = r0r0 - 2.0 * r0u + uu + lambda * l1; f1 < best_f) {
        best_f = f1;
        best_t = 1.0;
        best_zero = -1;
      }
      if (!(best_f < objective(lambda))) return moved;
      Vector fresh = old + best_t * d;
      if (best_zero >= 0) fresh(best_zero) = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) {
        // entries that crossed zero are clamped; the objective only improves on the face
        if (fresh(i) != 0.0 && (fresh(i) > 0) != (old(i) > 0)) fresh(i) = 0.0;
      }
      beta_(support) = fresh;
      refresh_residual();
      moved = true;
      if (best_zero < 0) return true;
    }
    return moved;
  }

  // With the support and signs settled, the exact solution on that face is one
  // linear solve. It replaces the iterate only if it keeps every sign and does
  // not worsen the optimality gap, which removes the dependence on sweep history.
  double polish(double half, double lambda, double kkt) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < beta_.size(); ++j)
      if (beta_(j) != 0.0) support.push_back(j);
    const auto k = static_cast<Eigen::Index>(support.size());
    if (k == 0 || k > a_.rows()) return kkt;
    Matrix gram(k, k);
    for (Eigen::Index l = 0; l < k; ++l) gram.col(l) = gram_col(support[static_cast<std::size_t>(l)])(support);
    const Vector old = beta_(support);
    Vector rhs = a_(Eigen::all, support).transpose() * y_;
    for (Eigen::Index i = 0; i < k; ++i) rhs(i) -= old(i) > 0 ? half : -half;
    const Eigen::LDLT<Matrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success) return kkt;
    Vector b = ldlt.solve(rhs);
    b += ldlt.solve(rhs - gram * b);
    if (!b.allFinite()) return kkt;
    for (Eigen::Index i = 0; i < k; ++i)
      if (b(i) == 0.0 || (b(i) > 0) != (old(i) > 0)) return kkt;

    const Vector saved_r = r_;
    beta_(support) = b;
    refresh_residual();
    const double fresh = kkt_from_gradient(2.0 * (a_.transpose() * r_), beta_, lambda);
    if (fresh <= kkt) return fresh;
    beta_(support) = old;
    r_ = saved_r;
    return kkt;
  }

  // Column j of A'A, computed on first use and kept for the rest of the path.
  const Vector& gram_col(Eigen::Index j) {
    Vector& c = gram_cache_[static_cast<std::size_t>(j)];
    if (c.size() == 0) c = a_.transpose() * a_.col(j);
    return c;
  }

  double objective(double lambda) const { return r_.squaredNorm() + lambda * beta_.lpNorm<1>(); }

  void refresh_residual() {
    r_ = y_;
    for (Eigen::Index j = 0; j < beta_.size(); ++j)
      if (beta_(j) != 0.0) r_.noalias() -= beta_(j) * a_.col(j);
  }

  const Matrix& a_;
  const Vector& y_;
  Vector col_sq_;
  Vector col_norm_;
  Vector beta_;
  Vector r_;
  double scale_ = 1.0;
  double max_norm_ = 0.0;
  std::vector<Vector> gram_cache_;
};

void check_solver_args(double tol, int max_sweeps) {
  if (!(tol > 0.0)) throw ValidationError("lasso: tol must be positive");
  if (max_sweeps < 1) throw ValidationError("lasso: max_sweeps must be >= 1");
}

}  // namespace

LassoFit lasso_cd(const Matrix& a, const Vector& y, double lambda, double tol, int max_sweeps) {
  return lasso_cd(a, y, lambda, Vector::Zero(a.cols()), tol, max_sweeps);
}

LassoFit lasso_cd(const Matrix& a, const Vector& y, double lambda, const Vector& beta0, double tol,
                  int max_sweeps) {
  check_shapes(a, y, lambda);
  check_solver_args(tol, max_sweeps);
  CdSolver solver(a, y);
  solver.warm_start(beta0);
  return solver.solve(lambda, tol, max_sweeps);
}

std::vector<LassoFit> lasso_path(const Matrix& a, const Vector& y, const std::vector<double>& lambdas,
                                 double tol, int max_sweeps) {
  check_solver_args(tol, max_sweeps);
  for (double l : lambdas) check_shapes(a, y, l);
  CdSolver solver(a, y);
  std::vector<LassoFit> out;
  out.reserve(lambdas.size());
  for (double l : lambdas) out.push_back(solver.solve(l, tol, max_sweeps));
  return out;
}

double kkt_check(const Matrix& a, const Vector& y, const Vector& beta, double lambda) {
  check_shapes(a, y, lambda);
  if (beta.size() != a.cols()) throw ValidationError("kkt_check: beta has wrong length");
  const Vector grad = 2.0 * (a.transpose() * (y - a * beta));
  return kkt_from_gradient(grad, beta, lambda);
}

double lasso_objective(const Matrix& a, const Vector& y, const Vector& beta, double lambda) {
  return (y - a * beta).squaredNorm() + lambda * beta.lpNorm<1>();
}

double lambda_max(const Matrix& a, const Vector& y) {
  if (a.cols() == 0) return 0.0;
  return 2.0 * (a.transpose() * y).cwiseAbs().maxCoeff();
}

std::vector<double> lambda_grid(double top, int size, double min_ratio) {
  if (size < 2) throw ValidationError("lambda grid needs at least 2 points");
  if (!(top > 0.0)) throw ValidationError("lambda grid needs a positive upper end");
  std::vector<double> g(static_cast<std::size_t>(size));
  const double step = std::log(min_ratio) / (size - 1);
  for (int i = 0; i < size; ++i) g[static_cast<std::size_t>(i)] = top * std::exp(step * i);
  g.front() = top;
  return g;
}

CvResult lasso_cv(const Matrix& a, const Vector& y, int n_folds, int grid_size, const SeedSpec& seed) {
  check_shapes(a, y, 0.0);
  const Eigen::Index n = a.rows();
  if (n_folds < 2 || n_folds > n)
    throw ValidationError("lasso_cv: n_folds = " + std::to_string(n_folds) + " outside [2, n]");
  if (grid_size < 2) throw ValidationError("lasso_cv: grid_size must be >= 2");

  const double top = lambda_max(a, y);
  if (!(top > 0.0)) throw ValidationError("lasso_cv: response is orthogonal to every column");

  CvResult cv;
  cv.lambda_grid = lambda_grid(top, grid_size);
  cv.fold_assignment_seed = seed;
  cv.fold_of_row.assign(static_cast<std::size_t>(n), 0);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Engine eng = make_engine(seed);
  std::shuffle(perm.begin(), perm.end(), eng);
  for (std::size_t i = 0; i < perm.size(); ++i)
    cv.fold_of_row[static_cast<std::size_t>(perm[i])] = static_cast<int>(i % static_cast<std::size_t>(n_folds));

  const std::size_t g_count = cv.lambda_grid.size();
  std::vector<std::vector<double>> fold_mse(static_cast<std::size_t>(n_folds));
  std::size_t common = g_count;

  for (int k = 0; k < n_folds; ++k) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < n; ++i) (cv.fold_of_row[static_cast<std::size_t>(i)] == k ? te : tr).push_back(i);
    const Matrix a_tr = a(tr, Eigen::all);
    const Vector y_tr = y(tr);
    const Matrix a_te = a(te, Eigen::all);
    const Vector y_te = y(te);
    const double shrink = static_cast<double>(tr.size()) / static_cast<double>(n);
    const double tss = std::max(y_tr.squaredNorm(), 1e-300);

    CdSolver solver(a_tr, y_tr);
    auto& mse = fold_mse[static_cast<std::size_t>(k)];
    for (std::size_t g = 0; g < g_count; ++g) {
      solver.solve(cv.lambda_grid[g] * shrink, kDefaultLassoTol, kDefaultMaxSweeps);
      Vector pred = Vector::Zero(a_te.rows());
      const Vector& b = solver.beta();
      for (Eigen::Index j = 0; j < b.size(); ++j)
        if (b(j) != 0.0) pred.noalias() += b(j) * a_te.col(j);
      mse.push_back((y_te - pred).squaredNorm() / static_cast<double>(te.size()));
      if (1.0 - solver.residual().squaredNorm() / tss > 0.999) break;
    }
    common = std::min(common, mse.size());
  }

  cv.lambda_grid.resize(common);
  cv.cv_mse.assign(common, 0.0);
  for (const auto& mse : fold_mse)
    for (std::size_t g = 0; g < common; ++g) cv.cv_mse[g] += mse[g] / n_folds;
  const auto best = std::min_element(cv.cv_mse.begin(), cv.cv_mse.end()) - cv.cv_mse.begin();
  cv.lambda_star = cv.lambda_grid[static_cast<std::size_t>(best)];
  return cv;
}

Vector ols(const Matrix& a, const Vector& y) {
  if (a.rows() != y.size()) throw ValidationError("ols: design rows do not match response length");
  if (a.cols() > a.rows())
    throw ValidationError("ols: more columns (" + std::to_string(a.cols()) + ") than rows (" +
                          std::to_string(a.rows()) + ")");
  if (!a.allFinite() || !y.allFinite()) throw NumericalError("ols: non-finite input");
  if (a.cols() == 0) return Vector(0);

  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < a.cols()) {
    const auto pivot = qr.colsPermutation().indices()(qr.rank());
    throw NumericalError("ols: design is rank deficient; column " + std::to_string(pivot) +
                         " is linearly dependent on the others");
  }
  return qr.solve(y);
}

std::string lasso_fit_to_json(const LassoFit& fit) {
  nlohmann::ordered_json j;
  j["lambda"] = fit.lambda;
  j["objective"] = fit.objective;
  j["n_iterations"] = fit.n_iterations;
  j["kkt_violation"] = fit.kkt_violation;
  j["converged"] = fit.converged;
  j["length"] = fit.beta.size();
  auto beta = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < fit.beta.size(); ++i)
    if (fit.beta(i) != 0.0) beta.push_back({i, fit.beta(i)});
  j["beta"] = std::move(beta);
  return j.dump();
}

}  // namespace ipad
