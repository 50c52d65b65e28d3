#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ipad/data_model.hpp"

namespace ipad {

/// d1: Gaussian factor model, linear response. d2: fat-tailed column-dependent
/// errors. d3: no factors, AR(1)-correlated rows. d4: Gaussian factor model,
/// response sin(Xb) exp(Xb). real_x: user design with the d1 response.
enum class Design { d1, d2, d3, d4, real_x };

std::string_view to_string(Design d) noexcept;
Design design_from_string(std::string_view s);

struct DesignSpec {
  Design design = Design::d1;
  int n = 500;
  int p = 500;
  int s = 25;
  double amplitude = 4.0;  // A
  double c = 0.2;          // response noise variance
  int r = 3;
  double theta = 1.0;
  double rho = 0.0;  // d3 only
  int nu_df = 8;     // d2 only
  double q = 0.2;
  int reps = 100;
  SeedSpec seed;
  bool oracle_knockoffs = false;
  int r_max = 8;
  int cv_folds = 10;
  int cv_grid = 50;
  int forest_trees = 500;
  /// Raw design for real_x; centered and rescaled before use. n and p follow it.
  std::shared_ptr<const Matrix> real_x;
};

/// Throws ValidationError on inconsistent settings (s > p, d3 with r != 0,
/// oracle knockoffs outside d1/d4, real_x without data, ...).
void validate(const DesignSpec& spec);

struct GeneratedData {
  Matrix x;                  // n x p, unit-norm columns
  Vector y;
  Vector beta;
  std::vector<int> support;  // ascending, 0-based
  Matrix c0;                 // common component before column rescaling
  double sigma2_0 = 0.0;     // variance of the raw error entries, r * theta
  Vector column_norms;       // norms divided out of the raw design
  Vector signal;             // f(x_i), the noiseless response
};

/// One simulated data set. Reproducible from (spec.seed, rep_index).
GeneratedData gen_design(const DesignSpec& spec, int rep_index);

struct RepRecord {
  double fdp = 0.0;
  double tdp = 0.0;
  double fdp_plus = 0.0;
  double tdp_plus = 0.0;
  double r2 = 0.0;
  int r_hat = 0;
  int selected = 0;
  int selected_plus = 0;
  bool failed = false;
  std::string error;
};

/// Full pipeline on one replication: generate, estimate, knockoffs, statistic,
/// both thresholds. Failures are caught and flagged in the record.
RepRecord run_rep(const DesignSpec& spec, int rep_index);

struct SimulationReport {
  DesignSpec spec;
  double fdr = 0.0;
  double power = 0.0;
  double fdr_plus = 0.0;
  double power_plus = 0.0;
  double r2_mean = 0.0;
  int reps_completed = 0;
  std::vector<RepRecord> per_rep;
};

/// Runs spec.reps replications on `threads` workers. Output does not depend on
/// the worker count or scheduling.
SimulationReport run_monte_carlo(const DesignSpec& spec, int threads = 1);

/// Header plus one row: design,n,p,s,A,c,r,theta,q,reps,fdr,power,fdr_plus,power_plus,r2
std::string report_csv(const SimulationReport& rep);
std::string report_json(const SimulationReport& rep);

void write_report(const SimulationReport& rep, const std::filesystem::path& csv_path,
                  const std::filesystem::path& json_path);

}  // namespace ipad
