#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ipad/data_model.hpp"

namespace ipad {

// Windows are W x (1 + p) matrices ordered in time: column 0 is the target
// y_t, columns 1..p are the predictors z_t. Every step regresses row s on
// row s-1 inside the window and forecasts the period after the last row.

/// Time-indexed panel: a target plus p predictors, oldest row first.
struct SeriesPanel {
  std::vector<std::string> dates;
  Matrix values;                     // T x (p + 1)
  std::vector<std::string> names;    // p + 1 column names
  std::string target_name;
  Eigen::Index target_column = 0;

  Eigen::Index periods() const noexcept { return values.rows(); }
  Eigen::Index predictors() const noexcept { return values.cols() - 1; }

  /// Rows [first, first + len) rearranged with the target in column 0.
  Matrix window(Eigen::Index first, Eigen::Index len) const;
  std::vector<std::string> predictor_names() const;
};

/// Reads a panel CSV (date column + named series). Dates must be unique and
/// in ascending lexicographic order (ISO-style labels such as 1960Q3).
SeriesPanel load_panel(const std::filesystem::path& path, const std::string& target_name);

struct StepFit {
  double forecast = 0.0;
  double in_sample_mse = 0.0;
  Vector coef;  // regression coefficients, intercept first
};

/// AR(1) by OLS on (1, y_{t-1}). A constant lag regressor gives rho = 0 and
/// the window mean of y_t as forecast.
StepFit ar1_fit(const Vector& target);
double ar1_step(const Vector& target);

struct FarOptions {
  std::optional<int> factors;  // fixed m; otherwise PC_p1
  int max_factors = 8;
};

/// Number of PC factors of the standardized predictor block used by FAR/Lasso.
int window_factor_count(const Matrix& window, const FarOptions& opt);

/// Factor-augmented AR(1): y_t on (1, y_{t-1}, f_{t-1}) with f the PC factors of
/// the standardized window predictors. Collinear factor columns are dropped,
/// highest index first.
StepFit far_fit(const Matrix& window, const FarOptions& opt = {});
double far_step(const Matrix& window, const FarOptions& opt = {});

struct LassoStepOptions {
  FarOptions factors;
  int cv_folds = 10;
  int cv_grid = 50;
};

struct LassoStepResult {
  double forecast = 0.0;
  double lambda_star = 0.0;
  Vector coef;  // standardized-scale coefficients on (y_{t-1}, f_{t-1}, z_{t-1})
  std::vector<int> support_z;  // selected predictors (0-based among z)
};

/// Lasso on (1, y_{t-1}, f_{t-1}, z_{t-1}) with 10-fold CV. The intercept is
/// unpenalized (handled by centering); predictors are scaled to unit variance.
LassoStepResult lasso_fit_step(const Matrix& window, const SeedSpec& seed, const LassoStepOptions& opt = {});
double lasso_step(const Matrix& window, const SeedSpec& seed, const LassoStepOptions& opt = {});

struct IpadStepOptions {
  int draws = 100;
  double q = 0.2;
  bool plus = true;
  int r_max = 8;
  int cv_folds = 10;
  int cv_grid = 50;
};

struct IpadStepResult {
  double forecast = 0.0;              // mean over draws
  std::vector<double> draw_forecasts;
  Vector selection_frequency;         // per predictor, fraction of draws selecting it
  double mean_selected = 0.0;
};

/// Residualize y_t and z_{t-1} on (1, y_{t-1}), run the IPAD procedure on the
/// residuals, refit y_t on (1, y_{t-1}, z_{t-1,S}) by OLS and forecast; repeat
/// for `draws` knockoff draws (draw d uses child(seed, d)) and average.
IpadStepResult ipad_fit_step(const Matrix& window, const SeedSpec& seed, const IpadStepOptions& opt = {});
double ipad_step(const Matrix& window, int draws, const SeedSpec& seed);

enum class ForecastMethod { ar, far, lasso, ipad };

std::string_view to_string(ForecastMethod m) noexcept;
ForecastMethod method_from_string(std::string_view s);

struct DmResult {
  double statistic = 0.0;
  int stars = 0;  // |stat| > 1.96, 2.576, 3.291
};

/// Diebold-Mariano statistic of a loss-differential series with lag-0 variance
/// (denominator T-1). No length requirement; dm_test adds it.
DmResult dm_from_differential(const Vector& d);

/// Squared-error DM test of forecast errors e1 against e2 (positive: e1 worse).
DmResult dm_test(const Vector& e1, const Vector& e2);

/// "2.631**" style annotation.
std::string dm_annotation(const DmResult& r);

struct RollOptions {
  Eigen::Index window_size = 120;
  std::vector<ForecastMethod> methods{ForecastMethod::ar, ForecastMethod::far, ForecastMethod::lasso,
                                      ForecastMethod::ipad};
  FarOptions far;
  LassoStepOptions lasso;
  IpadStepOptions ipad;
  SeedSpec seed;
  int threads = 1;
};

struct DmEntry {
  ForecastMethod first;
  ForecastMethod second;
  DmResult result;
};

struct ForecastReport {
  std::vector<std::string> dates;  // forecast target dates
  Vector actual;
  std::vector<ForecastMethod> methods;
  std::vector<Vector> predictions;  // aligned with methods
  std::vector<double> rmse;
  std::vector<DmEntry> dm;          // later method vs earlier method, when >= 10 forecasts
  std::vector<std::string> predictor_names;
  Matrix selection_frequency;       // origins x p, IPAD only (empty otherwise)
};

/// Rolling one-step-ahead evaluation. Origin t uses rows t-W+1..t and predicts
/// row t+1; origin t draws randomness from child(seed, t).
ForecastReport roll(const SeriesPanel& panel, const RollOptions& opt);

void write_forecast_report(const ForecastReport& rep, const std::filesystem::path& dir);
std::string forecast_report_json(const ForecastReport& rep);

}  // namespace ipad
