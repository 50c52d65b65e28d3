#pragma once

#include <filesystem>
#include <vector>

#include "ipad/data_model.hpp"

namespace ipad {

/// Principal-component fit of an approximate factor model x = C + E.
///
/// f_hat is normalised so that f_hat' f_hat / n = I, lambda_hat = x' f_hat / n,
/// and c_hat = f_hat lambda_hat' is the rank-r_hat truncated SVD of x.
/// Singular vectors are oriented so the largest-magnitude entry of every
/// right singular vector is positive.
struct FactorEstimate {
  int r_hat = 0;
  Matrix f_hat;       // n x r_hat
  Matrix lambda_hat;  // p x r_hat
  Matrix c_hat;       // n x p
  Matrix e_hat;       // n x p, x - c_hat
  double sigma2_hat = 0.0;
};

FactorEstimate fit_pc(const Matrix& x, int r);

/// PC_p1(k) = V(k) + k * V(r_max) * (n+p)/(np) * ln(np/(n+p)) for k = 0..r_max,
/// with V(k) the mean squared residual of the rank-k truncation.
std::vector<double> pc_p1_criterion(const Matrix& x, int r_max);

/// argmin of pc_p1_criterion; ties (within 1e-12 of the data scale) go to the smaller k.
int estimate_num_factors(const Matrix& x, int r_max);

/// Largest r_max accepted by estimate_num_factors for an n x p matrix, capped at `cap`.
int default_r_max(Eigen::Index n, Eigen::Index p, int cap = 8);

double noise_variance(const Matrix& e_hat);

/// Writes f_hat.csv, lambda_hat.csv, c_hat.csv, e_hat.csv and header.json into `dir`.
void save_factor_estimate(const FactorEstimate& fe, const std::filesystem::path& dir);

/// Plain numeric CSV without header; values round-trip exactly.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);

}  // namespace ipad
