#include "ipad/factor_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/SVD>
#include <json.hpp>

namespace ipad {

namespace {

void require_finite(const Matrix& x) {
  if (!x.allFinite()) throw NumericalError("factor fit: matrix contains non-finite entries");
}

}  // namespace

FactorEstimate fit_pc(const Matrix& x, int r) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (r < 0 || r > std::min(n, p))
    throw ValidationError("fit_pc: r = " + std::to_string(r) + " outside [0, min(n,p)]");
  require_finite(x);

  FactorEstimate fe;
  fe.r_hat = r;
  if (r == 0) {
    fe.f_hat = Matrix(n, 0);
    fe.lambda_hat = Matrix(p, 0);
    fe.c_hat = Matrix::Zero(n, p);
    fe.e_hat = x;
    fe.sigma2_hat = noise_variance(fe.e_hat);
    return fe;
  }

  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("fit_pc: SVD failed");
  Matrix u = svd.matrixU().leftCols(r);
  Matrix v = svd.matrixV().leftCols(r);
  const Vector d = svd.singularValues().head(r);

  for (int k = 0; k < r; ++k) {
    Eigen::Index imax = 0;
    v.col(k).cwiseAbs().maxCoeff(&imax);
    if (v(imax, k) < 0.0) {
      v.col(k) *= -1.0;
      u.col(k) *= -1.0;
    }
  }

  const double sn = std::sqrt(static_cast<double>(n));
  fe.f_hat = sn * u;
  fe.lambda_hat = v * d.asDiagonal() / sn;
  fe.c_hat = u * d.asDiagonal() * v.transpose();
  fe.e_hat = x - fe.c_hat;
  fe.sigma2_hat = noise_variance(fe.e_hat);
  return fe;
}

std::vector<double> pc_p1_criterion(const Matrix& x, int r_max) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (r_max < 1 || 2 * static_cast<Eigen::Index>(r_max) > std::min(n, p))
    throw ValidationError("estimate_num_factors: r_max = " + std::to_string(r_max) +
                          " outside [1, min(n,p)/2]");
  require_finite(x);

  Eigen::BDCSVD<Matrix> svd(x);
  const Vector sv = svd.singularValues();
  const double np = static_cast<double>(n) * static_cast<double>(p);
  const double total = x.squaredNorm();

  std::vector<double> v(static_cast<std::size_t>(r_max) + 1);
  double explained = 0.0;
  for (int k = 0; k <= r_max; ++k) {
    if (k > 0) explained += sv(k - 1) * sv(k - 1);
    v[static_cast<std::size_t>(k)] = std::max(total - explained, 0.0) / np;
  }

  const double sigma_bar = v.back();
  const double np_sum = static_cast<double>(n + p);
  const double penalty = sigma_bar * (np_sum / np) * std::log(np / np_sum);
  std::vector<double> crit(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) crit[k] = v[k] + static_cast<double>(k) * penalty;
  return crit;
}

int estimate_num_factors(const Matrix& x, int r_max) {
  const auto crit = pc_p1_criterion(x, r_max);
  const double tie = 1e-12 * x.squaredNorm() / (static_cast<double>(x.rows()) * x.cols());
  int best = 0;
  for (int k = 1; k < static_cast<int>(crit.size()); ++k)
    if (crit[static_cast<std::size_t>(k)] < crit[static_cast<std::size_t>(best)] - tie) best = k;
  return best;
}

int default_r_max(Eigen::Index n, Eigen::Index p, int cap) {
  return static_cast<int>(std::min<Eigen::Index>(cap, std::min(n, p) / 2));
}

double noise_variance(const Matrix& e_hat) {
  if (e_hat.size() == 0) throw ValidationError("noise_variance: empty matrix");
  return e_hat.squaredNorm() / static_cast<double>(e_hat.size());
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

void save_factor_estimate(const FactorEstimate& fe, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(fe.f_hat, dir / "f_hat.csv");
  write_matrix_csv(fe.lambda_hat, dir / "lambda_hat.csv");
  write_matrix_csv(fe.c_hat, dir / "c_hat.csv");
  write_matrix_csv(fe.e_hat, dir / "e_hat.csv");
  nlohmann::ordered_json header;
  header["r_hat"] = fe.r_hat;
  header["sigma2_hat"] = fe.sigma2_hat;
  header["n"] = fe.c_hat.rows();
  header["p"] = fe.c_hat.cols();
  std::ofstream(dir / "header.json") << header.dump(2) << '\n';
}

}  // namespace ipad
