#include "ipad/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ipad/knockoff_factory.hpp"
#include "ipad/knockoff_inference.hpp"
#include "ipad/parallel.hpp"
#include "ipad/procedure.hpp"

namespace ipad {

std::string_view to_string(Design d) noexcept {
  switch (d) {
    case Design::d1: return "d1";
    case Design::d2: return "d2";
    case Design::d3: return "d3";
    case Design::d4: return "d4";
    case Design::real_x: return "real_x";
  }
  return "?";
}

Design design_from_string(std::string_view s) {
  if (s == "1" || s == "d1") return Design::d1;
  if (s == "2" || s == "d2") return Design::d2;
  if (s == "3" || s == "d3") return Design::d3;
  if (s == "4" || s == "d4") return Design::d4;
  if (s == "real" || s == "real_x" || s == "5") return Design::real_x;
  throw ValidationError("unknown design '" + std::string(s) + "' (expected 1, 2, 3, 4 or real)");
}

void validate(const DesignSpec& spec) {
  auto fail = [](const std::string& m) { throw ValidationError("design spec: " + m); };
  if (spec.design == Design::real_x) {
    if (!spec.real_x) fail("real_x design needs a design matrix");
    if (spec.real_x->rows() != spec.n || spec.real_x->cols() != spec.p)
      fail("n and p must match the supplied design matrix");
  }
  if (spec.n < 4) fail("n must be >= 4");
  if (spec.p < 1) fail("p must be >= 1");
  if (spec.s < 1 || spec.s > spec.p) fail("s must lie in [1, p]");
  if (!(spec.amplitude > 0.0)) fail("A must be positive");
  if (!(spec.c > 0.0)) fail("c must be positive");
  if (!(spec.theta > 0.0)) fail("theta must be positive");
  if (!(spec.q > 0.0 && spec.q < 1.0)) fail("q must lie in (0, 1)");
  if (spec.reps < 1) fail("reps must be >= 1");
  if (spec.r_max < 1) fail("r_max must be >= 1");
  if (spec.cv_folds < 2 || spec.cv_folds > spec.n) fail("cv_folds must lie in [2, n]");
  if (spec.cv_grid < 2) fail("cv_grid must be >= 2");
  if (spec.forest_trees < 1) fail("forest_trees must be >= 1");
  switch (spec.design) {
    case Design::d3:
      if (spec.r != 0) fail("design 3 has no factors; r must be 0");
      if (!(spec.rho >= 0.0 && spec.rho < 1.0)) fail("rho must lie in [0, 1)");
      break;
    case Design::d2:
      if (spec.nu_df <= 2) fail("nu must exceed 2");
      [[fallthrough]];
    case Design::d1:
    case Design::d4:
      if (spec.r < 1 || spec.r > std::min(spec.n, spec.p)) fail("r must lie in [1, min(n, p)]");
      break;
    case Design::real_x:
      break;
  }
  if (spec.oracle_knockoffs && spec.design != Design::d1 && spec.design != Design::d4)
    fail("oracle knockoffs need i.i.d. Gaussian errors (designs 1 and 4)");
}

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Engine& eng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  double* d = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) d[i] = z(eng);
  return m;
}

double squared_correlation(const Vector& a, const Vector& b) {
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  const double den = ac.squaredNorm() * bc.squaredNorm();
  if (!(den > 0.0)) return 0.0;
  const double num = ac.dot(bc);
  return num * num / den;
}

}  // namespace

GeneratedData gen_design(const DesignSpec& spec, int rep_index) {
  validate(spec);
  const SeedSpec rep_seed = child(spec.seed, static_cast<std::uint64_t>(rep_index));
  Engine eng = make_engine(child(rep_seed, 0));
  const Eigen::Index n = spec.n;
  const Eigen::Index p = spec.p;

  GeneratedData g;
  Matrix raw;
  switch (spec.design) {
    case Design::d1:
    case Design::d2:
    case Design::d4: {
      const Matrix f = gaussian(n, spec.r, eng);
      const Matrix lambda = gaussian(p, spec.r, eng);
      g.c0 = f * lambda.transpose();
      Matrix e = gaussian(n, p, eng);
      if (spec.design == Design::d2) {
        std::chi_squared_distribution<double> chi2(spec.nu_df);
        for (Eigen::Index j = 0; j < p; ++j) e.col(j) *= (spec.nu_df - 2.0) / chi2(eng);
      }
      g.sigma2_0 = spec.r * spec.theta;
      raw = g.c0 + std::sqrt(g.sigma2_0) * e;
      break;
    }
    case Design::d3: {
      // Rows follow a stationary AR(1) across columns, so cov(x_ij, x_ik) = rho^|j-k|.
      const Matrix z = gaussian(n, p, eng);
      raw.resize(n, p);
      raw.col(0) = z.col(0);
      const double innov = std::sqrt(1.0 - spec.rho * spec.rho);
      for (Eigen::Index j = 1; j < p; ++j) raw.col(j) = spec.rho * raw.col(j - 1) + innov * z.col(j);
      g.c0 = Matrix::Zero(n, p);
      g.sigma2_0 = 1.0;
      break;
    }
    case Design::real_x: {
      raw = spec.real_x->rowwise() - spec.real_x->colwise().mean();
      g.c0 = Matrix::Zero(n, p);
      g.sigma2_0 = 0.0;
      break;
    }
  }
  g.x = std::move(raw);
  g.column_norms = rescale_in_place(g.x);

  std::vector<int> cols(static_cast<std::size_t>(p));
  std::iota(cols.begin(), cols.end(), 0);
  for (int k = 0; k < spec.s; ++k) {
    std::uniform_int_distribution<int> pick(k, static_cast<int>(p) - 1);
    std::swap(cols[static_cast<std::size_t>(k)], cols[static_cast<std::size_t>(pick(eng))]);
  }
  g.support.assign(cols.begin(), cols.begin() + spec.s);
  std::sort(g.support.begin(), g.support.end());
  g.beta = Vector::Zero(p);
  std::bernoulli_distribution coin(0.5);
  for (int j : g.support) g.beta(j) = coin(eng) ? spec.amplitude : -spec.amplitude;

  const Vector lin = g.x * g.beta;
  if (spec.design == Design::d4)
    g.signal = lin.array().sin() * lin.array().exp();
  else
    g.signal = lin;
  const Vector eps = gaussian(n, 1, eng);
  g.y = g.signal + std::sqrt(spec.c) * eps;
  return g;
}

RepRecord run_rep(const DesignSpec& spec, int rep_index) {
  RepRecord rec;
  try {
    const GeneratedData g = gen_design(spec, rep_index);
    const SeedSpec rep_seed = child(spec.seed, static_cast<std::uint64_t>(rep_index));

    ProcedureOptions opt;
    opt.q = spec.q;
    opt.statistic = spec.design == Design::d4 ? StatisticKind::mda_diff : StatisticKind::lcd;
    opt.r_max = spec.r_max;
    opt.cv_folds = spec.cv_folds;
    opt.cv_grid = spec.cv_grid;
    opt.forest_trees = spec.forest_trees;

    ProcedureResult res;
    if (spec.oracle_knockoffs) {
      KnockoffMatrix k = generate_oracle(g.c0, g.sigma2_0, child(rep_seed, 1));
      k.x_tilde = k.x_tilde * g.column_norms.cwiseInverse().asDiagonal();
      res = run_knockoff_inference(g.x, k, g.y, opt, rep_seed);
      res.r_hat = spec.r;
    } else {
      res = run_ipad(g.x, g.y, opt, rep_seed);
    }
    rec.fdp = fdp(res.knockoff.selected, g.support);
    rec.tdp = tdp(res.knockoff.selected, g.support);
    rec.fdp_plus = fdp(res.knockoff_plus.selected, g.support);
    rec.tdp_plus = tdp(res.knockoff_plus.selected, g.support);
    rec.selected = static_cast<int>(res.knockoff.selected.size());
    rec.selected_plus = static_cast<int>(res.knockoff_plus.selected.size());
    rec.r_hat = res.r_hat;
    rec.r2 = squared_correlation(g.signal, g.y);
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    rec = RepRecord{};
    rec.failed = true;
    rec.error = e.what();
  }
  return rec;
}

SimulationReport run_monte_carlo(const DesignSpec& spec, int threads) {
  validate(spec);
  SimulationReport rep;
  rep.spec = spec;
  rep.per_rep.resize(static_cast<std::size_t>(spec.reps));
  parallel_for(rep.per_rep.size(), threads,
               [&](std::size_t i) { rep.per_rep[i] = run_rep(spec, static_cast<int>(i)); });

  for (const auto& r : rep.per_rep) {
    if (r.failed) continue;
    ++rep.reps_completed;
    rep.fdr += r.fdp;
    rep.power += r.tdp;
    rep.fdr_plus += r.fdp_plus;
    rep.power_plus += r.tdp_plus;
    rep.r2_mean += r.r2;
  }
  if (rep.reps_completed > 0) {
    const double k = rep.reps_completed;
    rep.fdr /= k;
    rep.power /= k;
    rep.fdr_plus /= k;
    rep.power_plus /= k;
    rep.r2_mean /= k;
  }
  return rep;
}

std::string report_csv(const SimulationReport& rep) {
  const DesignSpec& s = rep.spec;
  std::ostringstream out;
  out << "design,n,p,s,A,c,r,theta,q,reps,fdr,power,fdr_plus,power_plus,r2\n";
  out << to_string(s.design) << ',' << s.n << ',' << s.p << ',' << s.s << ',' << format_real(s.amplitude) << ','
      << format_real(s.c) << ',' << s.r << ',' << format_real(s.theta) << ',' << format_real(s.q) << ','
      << rep.reps_completed << ',' << format_real(rep.fdr) << ',' << format_real(rep.power) << ','
      << format_real(rep.fdr_plus) << ',' << format_real(rep.power_plus) << ',' << format_real(rep.r2_mean) << '\n';
  return out.str();
}

std::string report_json(const SimulationReport& rep) {
  const DesignSpec& s = rep.spec;
  nlohmann::ordered_json j;
  j["design"] = std::string(to_string(s.design));
  j["n"] = s.n;
  j["p"] = s.p;
  j["s"] = s.s;
  j["A"] = s.amplitude;
  j["c"] = s.c;
  j["r"] = s.r;
  j["theta"] = s.theta;
  if (s.design == Design::d3) j["rho"] = s.rho;
  if (s.design == Design::d2) j["nu"] = s.nu_df;
  j["q"] = s.q;
  j["reps"] = s.reps;
  j["seed"] = {{"master_seed", s.seed.master_seed}, {"stream_id", s.seed.stream_id}};
  j["oracle_knockoffs"] = s.oracle_knockoffs;
  j["reps_completed"] = rep.reps_completed;
  j["fdr"] = rep.fdr;
  j["power"] = rep.power;
  j["fdr_plus"] = rep.fdr_plus;
  j["power_plus"] = rep.power_plus;
  j["r2"] = rep.r2_mean;
  auto per = nlohmann::ordered_json::array();
  for (const auto& r : rep.per_rep) {
    nlohmann::ordered_json e;
    e["fdp"] = r.fdp;
    e["tdp"] = r.tdp;
    e["fdp_plus"] = r.fdp_plus;
    e["tdp_plus"] = r.tdp_plus;
    e["r2"] = r.r2;
    e["r_hat"] = r.r_hat;
    e["selected"] = r.selected;
    e["selected_plus"] = r.selected_plus;
    if (r.failed) e["error"] = r.error;
    per.push_back(std::move(e));
  }
  j["per_rep"] = std::move(per);
  return j.dump(2) + "\n";
}

void write_report(const SimulationReport& rep, const std::filesystem::path& csv_path,
                  const std::filesystem::path& json_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write '" + csv_path.string() + "'");
  csv << report_csv(rep);
  std::ofstream js(json_path);
  if (!js) throw std::runtime_error("cannot write '" + json_path.string() + "'");
  js << report_json(rep);
}

}  // namespace ipad
