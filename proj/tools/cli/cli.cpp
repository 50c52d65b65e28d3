#include "cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipad/data_model.hpp"
#include "ipad/forecaster.hpp"
#include "ipad/parallel.hpp"
#include "ipad/procedure.hpp"
#include "ipad/simlab.hpp"

namespace ipad::cli {

namespace fs = std::filesystem;

namespace {

std::string default_output_dir() {
  if (const char* env = std::getenv("IPAD_OUTPUT_DIR"); env && *env) return env;
  return "ipad_out";
}

struct Common {
  std::string out = default_output_dir();
  std::uint64_t seed = 1;
  int parallelism = hardware_threads();
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out,-o", c.out, "Output directory (default: $IPAD_OUTPUT_DIR or ./ipad_out)")
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  cmd->add_option("--parallelism,-j", c.parallelism, "Worker threads; 1 runs serially")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

struct SimulateArgs {
  Common common;
  std::string design = "1";
  DesignSpec spec;
  std::string x_path;
  bool x_header = true;
};

struct SelectArgs {
  Common common;
  std::string x_path;
  std::string y_path;
  bool header = true;
  double q = 0.2;
  bool plus = true;
  std::string statistic = "lcd";
  int draws = 1;
  int r_max = 8;
  int rank = -1;
  int folds = 10;
  int grid = 50;
  int trees = 500;
};

struct ForecastArgs {
  Common common;
  std::string panel;
  std::string target;
  int window = 120;
  std::vector<std::string> methods{"ar", "far", "lasso", "ipad"};
  int draws = 100;
  double q = 0.2;
  bool plus = true;
  int factors = -1;
  int max_factors = 8;
  int folds = 10;
  int grid = 50;
};

void require_q(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("q must lie in (0, 1)");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << text;
}

fs::path prepare_output(const std::string& dir) {
  const fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw std::runtime_error("cannot create output directory '" + dir + "'");
  return out;
}

// Resolved settings of the active command, loadable again through --config.
void echo_config(const CLI::App& cmd, const fs::path& out) {
  write_text(out / "config.ini", "[" + cmd.get_name() + "]\n" + cmd.config_to_str(true, false));
}

int cmd_simulate(SimulateArgs& a, const CLI::App& app) {
  DesignSpec spec = a.spec;
  spec.design = design_from_string(a.design);
  spec.seed = SeedSpec{a.common.seed, 0};
  if (!a.x_path.empty()) {
    if (spec.design != Design::real_x) throw ValidationError("--x is only used with --design real");
    auto x = std::make_shared<Matrix>(read_csv_table(a.x_path, a.x_header).values);
    spec.n = static_cast<int>(x->rows());
    spec.p = static_cast<int>(x->cols());
    spec.real_x = std::move(x);
  }
  validate(spec);
  const fs::path out = prepare_output(a.common.out);
  echo_config(app, out);
  const SimulationReport rep = run_monte_carlo(spec, a.common.parallelism);
  write_report(rep, out / "simulation.csv", out / "simulation.json");
  std::cout << report_csv(rep);
  return ok;
}

Vector read_response(const std::string& path, bool header) {
  const CsvTable t = read_csv_table(path, header);
  if (t.values.cols() != 1) {
    throw ValidationError("response file '" + path + "' must have exactly one numeric column, found " +
                          std::to_string(t.values.cols()));
  }
  return t.values.col(0);
}

int cmd_select(SelectArgs& a, const CLI::App& app) {
  require_q(a.q);
  if (a.draws < 1) throw ValidationError("--draws must be positive");
  if (!fs::exists(a.x_path)) throw ValidationError("design file '" + a.x_path + "' does not exist");
  if (!fs::exists(a.y_path)) throw ValidationError("response file '" + a.y_path + "' does not exist");
  const CsvTable xt = read_csv_table(a.x_path, a.header);
  const Vector y_raw = read_response(a.y_path, a.header);
  if (xt.values.rows() != y_raw.size()) {
    throw ValidationError("design has " + std::to_string(xt.values.rows()) + " rows but response has " +
                          std::to_string(y_raw.size()));
  }
  if (xt.values.rows() < 4) throw ValidationError("selection needs at least 4 observations");

  std::vector<std::string> names = xt.names;
  if (names.empty()) {
    for (Eigen::Index j = 0; j < xt.values.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
  }
  const Dataset data(xt.values, y_raw, names, "y");
  const auto [std_data, record] = standardize(data);
  const Vector y = std_data.y().array() - std_data.y().mean();

  ProcedureOptions opt;
  opt.q = a.q;
  opt.statistic = statistic_from_string(a.statistic);
  opt.r_max = a.r_max;
  if (a.rank >= 0) opt.fixed_rank = a.rank;
  opt.cv_folds = static_cast<int>(std::min<Eigen::Index>(a.folds, xt.values.rows()));
  opt.cv_grid = a.grid;
  opt.forest_trees = a.trees;

  const fs::path out = prepare_output(a.common.out);
  echo_config(app, out);

  const SeedSpec master{a.common.seed, 0};
  std::vector<ProcedureResult> results(static_cast<std::size_t>(a.draws));
  parallel_for(results.size(), a.common.parallelism, [&](std::size_t d) {
    results[d] = run_ipad(std_data.x(), y, opt, child(master, d));
  });

  const Eigen::Index p = std_data.x().cols();
  Vector freq = Vector::Zero(p);
  double mean_size = 0.0;
  for (const ProcedureResult& r : results) {
    const SelectionResult& s = a.plus ? r.knockoff_plus : r.knockoff;
    for (const int j : s.selected) freq(j) += 1.0;
    mean_size += static_cast<double>(s.selected.size());
  }
  freq /= static_cast<double>(a.draws);
  mean_size /= static_cast<double>(a.draws);

  const ProcedureResult& first = results.front();
  nlohmann::ordered_json j;
  j["n"] = std_data.x().rows();
  j["p"] = p;
  j["statistic"] = to_string(opt.statistic);
  j["q"] = a.q;
  j["plus"] = a.plus;
  j["seed"] = a.common.seed;
  j["draws"] = a.draws;
  j["r_hat"] = first.r_hat;
  j["sigma2_hat"] = first.sigma2_hat;
  if (opt.statistic == StatisticKind::lcd) j["lambda"] = first.lambda;
  j["selection"] = nlohmann::ordered_json::parse(
      selection_to_json(a.plus ? first.knockoff_plus : first.knockoff, names));
  j["mean_selected"] = mean_size;
  write_text(out / "selection.json", j.dump(2) + "\n");

  if (a.draws > 1) {
    std::string csv = "variable,frequency\n";
    for (Eigen::Index k = 0; k < p; ++k) {
      csv += names[static_cast<std::size_t>(k)] + "," + format_real(freq(k)) + "\n";
    }
    write_text(out / "selection_frequency.csv", csv);
  }
  std::cout << "selected " << (a.plus ? first.knockoff_plus : first.knockoff).selected.size() << " of " << p
            << " variables (draw 0); mean over " << a.draws << " draws: " << mean_size << "\n";
  return ok;
}

int cmd_forecast(ForecastArgs& a, const CLI::App& app) {
  require_q(a.q);
  if (a.draws < 1) throw ValidationError("--draws must be positive");
  RollOptions opt;
  opt.methods.clear();
  for (const std::string& m : a.methods) opt.methods.push_back(method_from_string(m));
  const SeriesPanel panel = load_panel(a.panel, a.target);
  opt.window_size = a.window;
  if (a.factors >= 0) opt.far.factors = a.factors;
  opt.far.max_factors = a.max_factors;
  opt.lasso.factors = opt.far;
  opt.lasso.cv_folds = a.folds;
  opt.lasso.cv_grid = a.grid;
  opt.ipad.draws = a.draws;
  opt.ipad.q = a.q;
  opt.ipad.plus = a.plus;
  opt.ipad.cv_folds = a.folds;
  opt.ipad.cv_grid = a.grid;
  opt.seed = SeedSpec{a.common.seed, 0};
  opt.threads = a.common.parallelism;
  if (panel.periods() <= opt.window_size) {
    throw ValidationError("panel has " + std::to_string(panel.periods()) + " periods; window " +
                          std::to_string(opt.window_size) + " leaves nothing to forecast");
  }

  const fs::path out = prepare_output(a.common.out);
  echo_config(app, out);
  const ForecastReport rep = roll(panel, opt);
  write_forecast_report(rep, out);
  for (std::size_t k = 0; k < rep.methods.size(); ++k) {
    std::cout << to_string(rep.methods[k]) << " rmse " << rep.rmse[k] << "\n";
  }
  return ok;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"ipad: knockoff variable selection with latent factor models"};
  app.set_config("--config", "", "INI config file with one [section] per command; flags override it");
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo FDR/power study");
  add_common(simulate, sim.common);
  simulate->add_option("--design", sim.design, "1, 2, 3, 4 or real")->capture_default_str();
  simulate->add_option("--n", sim.spec.n, "Observations")->capture_default_str();
  simulate->add_option("--p", sim.spec.p, "Covariates")->capture_default_str();
  simulate->add_option("--s", sim.spec.s, "Nonzero coefficients")->capture_default_str();
  simulate->add_option("--A", sim.spec.amplitude, "Signal amplitude")->capture_default_str();
  simulate->add_option("--c", sim.spec.c, "Response noise variance")->capture_default_str();
  simulate->add_option("--r", sim.spec.r, "Number of latent factors")->capture_default_str();
  simulate->add_option("--theta", sim.spec.theta, "Loading variance")->capture_default_str();
  simulate->add_option("--rho", sim.spec.rho, "Row correlation (design 3)")->capture_default_str();
  simulate->add_option("--nu", sim.spec.nu_df, "Chi-square degrees of freedom (design 2)")->capture_default_str();
  simulate->add_option("--q", sim.spec.q, "Target FDR level")->capture_default_str();
  simulate->add_option("--reps", sim.spec.reps, "Replications")->capture_default_str();
  simulate->add_option("--oracle", sim.spec.oracle_knockoffs, "Use knockoffs built from the true factor model (true/false)")
      ->capture_default_str();
  simulate->add_option("--r-max", sim.spec.r_max, "Largest factor count searched")->capture_default_str();
  simulate->add_option("--folds", sim.spec.cv_folds, "Cross-validation folds")->capture_default_str();
  simulate->add_option("--grid", sim.spec.cv_grid, "Lasso penalty grid size")->capture_default_str();
  simulate->add_option("--trees", sim.spec.forest_trees, "Forest size (design 4)")->capture_default_str();
  simulate->add_option("--x", sim.x_path, "Design matrix CSV for --design real");
  simulate->add_option("--x-header", sim.x_header, "Design CSV has a header row (true/false)")->capture_default_str();

  SelectArgs sel;
  CLI::App* select = app.add_subcommand("select", "Run the selection procedure on user data");
  add_common(select, sel.common);
  select->add_option("--x", sel.x_path, "Design matrix CSV")->required();
  select->add_option("--y", sel.y_path, "Response CSV (one column)")->required();
  select->add_option("--header", sel.header, "CSV files have a header row (true/false)")->capture_default_str();
  select->add_option("--q", sel.q, "Target FDR level")->capture_default_str();
  select->add_option("--plus", sel.plus, "Use the knockoff+ threshold (true/false)")->capture_default_str();
  select->add_option("--statistic", sel.statistic, "lcd or mda")
      ->capture_default_str()
      ->check(CLI::IsMember({"lcd", "mda", "mda_diff"}));
  select->add_option("--draws", sel.draws, "Independent knockoff draws")->capture_default_str();
  select->add_option("--r-max", sel.r_max, "Largest factor count searched")->capture_default_str();
  select->add_option("--rank", sel.rank, "Fixed factor count; -1 estimates it")->capture_default_str();
  select->add_option("--folds", sel.folds, "Cross-validation folds")->capture_default_str();
  select->add_option("--grid", sel.grid, "Lasso penalty grid size")->capture_default_str();
  select->add_option("--trees", sel.trees, "Forest size for --statistic mda")->capture_default_str();

  ForecastArgs fc;
  CLI::App* forecast = app.add_subcommand("forecast", "Rolling one-step-ahead forecast comparison");
  add_common(forecast, fc.common);
  forecast->add_option("--panel", fc.panel, "Panel CSV: date column plus named series")->required();
  forecast->add_option("--target", fc.target, "Target series name")->required();
  forecast->add_option("--window", fc.window, "Rolling window length")->capture_default_str();
  forecast->add_option("--methods", fc.methods, "Comma-separated subset of ar,far,lasso,ipad")
      ->delimiter(',')
      ->capture_default_str();
  forecast->add_option("--draws", fc.draws, "Knockoff draws averaged per IPAD forecast")->capture_default_str();
  forecast->add_option("--q", fc.q, "Target FDR level")->capture_default_str();
  forecast->add_option("--plus", fc.plus, "Use the knockoff+ threshold (true/false)")->capture_default_str();
  forecast->add_option("--factors", fc.factors, "Fixed factor count for FAR/Lasso; -1 estimates it")
      ->capture_default_str();
  forecast->add_option("--max-factors", fc.max_factors, "Largest factor count searched")->capture_default_str();
  forecast->add_option("--folds", fc.folds, "Cross-validation folds")->capture_default_str();
  forecast->add_option("--grid", fc.grid, "Lasso penalty grid size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : validation_failure;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, *simulate);
    if (select->parsed()) return cmd_select(sel, *select);
    return cmd_forecast(fc, *forecast);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return validation_failure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return runtime_failure;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"ipad"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ipad::cli
