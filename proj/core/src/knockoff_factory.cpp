#include "ipad/knockoff_factory.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "ipad/factor_engine.hpp"

namespace ipad {

std::string_view to_string(KnockoffSource s) noexcept {
  return s == KnockoffSource::oracle ? "oracle" : "empirical";
}

namespace {

KnockoffMatrix draw(const Matrix& c, double sigma2, const SeedSpec& seed, KnockoffSource source) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
    throw ValidationError("knockoff noise variance must be finite and >= 0");
  if (!c.allFinite()) throw NumericalError("knockoff common component contains non-finite entries");

  KnockoffMatrix k{c, source, seed, sigma2};
  if (sigma2 > 0.0) {
    Engine eng = make_engine(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(sigma2));
    // Column-major fill order is part of the reproducibility contract.
    double* data = k.x_tilde.data();
    for (Eigen::Index i = 0; i < k.x_tilde.size(); ++i) data[i] += normal(eng);
  }
  return k;
}

}  // namespace

KnockoffMatrix generate(const Matrix& c, double sigma2, const SeedSpec& seed) {
  return draw(c, sigma2, seed, KnockoffSource::empirical);
}

KnockoffMatrix generate_oracle(const Matrix& c0, double sigma2_0, const SeedSpec& seed) {
  if (!(sigma2_0 > 0.0)) throw ValidationError("oracle knockoffs need a positive error variance");
  return draw(c0, sigma2_0, seed, KnockoffSource::oracle);
}

Matrix augment(const Matrix& x, const KnockoffMatrix& k) {
  if (x.cols() == 0) throw ValidationError("augment: design has no columns");
  if (x.rows() != k.x_tilde.rows() || x.cols() != k.x_tilde.cols())
    throw ValidationError("augment: knockoff shape does not match design");
  Matrix a(x.rows(), 2 * x.cols());
  a.leftCols(x.cols()) = x;
  a.rightCols(x.cols()) = k.x_tilde;
  return a;
}

void save_knockoff(const KnockoffMatrix& k, const std::filesystem::path& csv_path,
                   const std::filesystem::path& json_path) {
  write_matrix_csv(k.x_tilde, csv_path);
  nlohmann::ordered_json j;
  j["source"] = std::string(to_string(k.source));
  j["seed"] = {{"master_seed", k.seed.master_seed}, {"stream_id", k.seed.stream_id}};
  j["sigma2_used"] = k.sigma2_used;
  j["n"] = k.x_tilde.rows();
  j["p"] = k.x_tilde.cols();
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("cannot write '" + json_path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace ipad
