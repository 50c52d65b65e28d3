#include "ipad/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "ipad/factor_engine.hpp"
#include "ipad/knockoff_factory.hpp"
#include "ipad/parallel.hpp"
#include "ipad/procedure.hpp"
#include "ipad/sparse_regression.hpp"

namespace ipad {

namespace {

bool is_constant(const Vector& v) {
  if (v.size() == 0) return true;
  const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
  return v.maxCoeff() - v.minCoeff() <= 1e-12 * scale;
}

// Population mean and standard deviation of each column.
struct ColumnScale {
  Vector mean;
  Vector sd;
  std::vector<Eigen::Index> kept;  // columns with non-degenerate spread
};

ColumnScale column_scale(const Matrix& m) {
  ColumnScale s;
  s.mean = m.colwise().mean().transpose();
  s.sd.resize(m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double var = (m.col(j).array() - s.mean(j)).square().mean();
    s.sd(j) = std::sqrt(var);
    const double scale = std::max(1.0, std::abs(s.mean(j)));
    if (s.sd(j) > 1e-12 * scale) s.kept.push_back(j);
  }
  return s;
}

// Standardized predictor block of the window (rows 0..W-1), degenerate columns removed.
Matrix standardized_predictors(const Matrix& window) {
  const Matrix z = window.rightCols(window.cols() - 1);
  const ColumnScale s = column_scale(z);
  Matrix out(z.rows(), static_cast<Eigen::Index>(s.kept.size()));
  for (std::size_t k = 0; k < s.kept.size(); ++k) {
    const Eigen::Index j = s.kept[k];
    out.col(static_cast<Eigen::Index>(k)) = (z.col(j).array() - s.mean(j)) / s.sd(j);
  }
  return out;
}

// W x m factor block of the window predictors.
Matrix window_factors(const Matrix& window, const FarOptions& opt) {
  const Matrix zs = standardized_predictors(window);
  if (zs.cols() == 0) return Matrix(window.rows(), 0);
  int m = 0;
  if (opt.factors) {
    const int bound = static_cast<int>(std::min(zs.rows(), zs.cols()));
    m = std::clamp(*opt.factors, 0, bound);
  } else {
    const int r_max = default_r_max(zs.rows(), zs.cols(), opt.max_factors);
    m = r_max >= 1 ? estimate_num_factors(zs, r_max) : 0;
  }
  if (m == 0) return Matrix(window.rows(), 0);
  return fit_pc(zs, m).f_hat;
}

void check_window(const Matrix& window) {
  if (window.rows() < 3) throw ValidationError("forecast window needs at least 3 rows");
  if (window.cols() < 1) throw ValidationError("forecast window has no target column");
  if (!window.allFinite()) throw ValidationError("forecast window contains non-finite values");
}

Vector residualize(const Eigen::ColPivHouseholderQR<Matrix>& qr, const Matrix& h, const Vector& v) {
  return v - h * qr.solve(v);
}

}  // namespace

Matrix SeriesPanel::window(Eigen::Index first, Eigen::Index len) const {
  if (first < 0 || len < 0 || first + len > values.rows()) throw ValidationError("window outside the panel");
  Matrix w(len, values.cols());
  w.col(0) = values.block(first, target_column, len, 1);
  Eigen::Index k = 1;
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    if (j == target_column) continue;
    w.col(k++) = values.block(first, j, len, 1);
  }
  return w;
}

std::vector<std::string> SeriesPanel::predictor_names() const {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (static_cast<Eigen::Index>(j) != target_column) out.push_back(names[j]);
  }
  return out;
}

SeriesPanel load_panel(const std::filesystem::path& path, const std::string& target_name) {
  CsvTable t = read_csv_table(path, true);
  SeriesPanel panel;
  panel.values = std::move(t.values);
  panel.names = std::move(t.names);
  panel.target_name = target_name;
  const auto it = std::find(panel.names.begin(), panel.names.end(), target_name);
  if (it == panel.names.end()) throw ValidationError("target column '" + target_name + "' not found in panel");
  panel.target_column = it - panel.names.begin();
  if (t.row_labels.empty()) {
    for (Eigen::Index i = 0; i < panel.values.rows(); ++i) panel.dates.push_back(std::to_string(i + 1));
  } else {
    panel.dates = std::move(t.row_labels);
    for (std::size_t i = 1; i < panel.dates.size(); ++i) {
      if (!(panel.dates[i - 1] < panel.dates[i])) {
        throw ValidationError("panel dates must be strictly increasing: '" + panel.dates[i - 1] + "' then '" +
                              panel.dates[i] + "'");
      }
    }
  }
  return panel;
}

StepFit ar1_fit(const Vector& target) {
  const Eigen::Index w = target.size();
  if (w < 3) throw ValidationError("ar1_step needs a window of at least 3 observations");
  if (!target.allFinite()) throw ValidationError("ar1_step window contains non-finite values");
  const Eigen::Index n = w - 1;
  const Vector lag = target.head(n);
  const Vector y = target.tail(n);
  StepFit fit;
  fit.coef = Vector::Zero(2);
  if (is_constant(lag)) {
    fit.coef(0) = y.mean();
  } else {
    Matrix d(n, 2);
    d.col(0).setOnes();
    d.col(1) = lag;
    fit.coef = ols(d, y);
  }
  const Vector resid = y.array() - fit.coef(0) - fit.coef(1) * lag.array();
  fit.in_sample_mse = resid.squaredNorm() / static_cast<double>(n);
  fit.forecast = fit.coef(0) + fit.coef(1) * target(w - 1);
  return fit;
}

double ar1_step(const Vector& target) { return ar1_fit(target).forecast; }

int window_factor_count(const Matrix& window, const FarOptions& opt) {
  return static_cast<int>(window_factors(window, opt).cols());
}

StepFit far_fit(const Matrix& window, const FarOptions& opt) {
  check_window(window);
  const Vector target = window.col(0);
  if (is_constant(target.head(window.rows() - 1))) return ar1_fit(target);

  const Matrix f = window_factors(window, opt);
  const Eigen::Index w = window.rows();
  const Eigen::Index n = w - 1;
  const Vector y = target.tail(n);
  for (Eigen::Index m = f.cols(); m >= 0; --m) {
    if (m + 2 > n) continue;
    Matrix d(n, m + 2);
    d.col(0).setOnes();
    d.col(1) = target.head(n);
    d.rightCols(m) = f.topLeftCorner(n, m);
    try {
      StepFit fit;
      fit.coef = ols(d, y);
      fit.in_sample_mse = (y - d * fit.coef).squaredNorm() / static_cast<double>(n);
      Vector x_t(m + 2);
      x_t(0) = 1.0;
      x_t(1) = target(w - 1);
      x_t.tail(m) = f.block(w - 1, 0, 1, m).transpose();
      fit.forecast = x_t.dot(fit.coef);
      return fit;
    } catch (const NumericalError&) {
      // drop the highest-index factor and refit
    }
  }
  return ar1_fit(target);
}

double far_step(const Matrix& window, const FarOptions& opt) { return far_fit(window, opt).forecast; }

LassoStepResult lasso_fit_step(const Matrix& window, const SeedSpec& seed, const LassoStepOptions& opt) {
  check_window(window);
  const Eigen::Index w = window.rows();
  const Eigen::Index n = w - 1;
  const Eigen::Index p = window.cols() - 1;
  const Matrix f = window_factors(window, opt.factors);
  const Eigen::Index m = f.cols();

  // Predictor rows 0..W-1: (y, f, z); rows 0..W-2 are lagged regressors, row W-1 the forecast input.
  Matrix preds(w, 1 + m + p);
  preds.col(0) = window.col(0);
  preds.middleCols(1, m) = f;
  preds.rightCols(p) = window.rightCols(p);

  const Vector y = window.col(0).tail(n);
  LassoStepResult res;
  res.coef = Vector::Zero(preds.cols());
  const double y_mean = y.mean();
  if (is_constant(y)) {
    res.forecast = y_mean;
    return res;
  }

  const Matrix lagged = preds.topRows(n);
  const ColumnScale s = column_scale(lagged);
  if (s.kept.empty()) {
    res.forecast = y_mean;
    return res;
  }
  Matrix a(n, static_cast<Eigen::Index>(s.kept.size()));
  for (std::size_t k = 0; k < s.kept.size(); ++k) {
    const Eigen::Index j = s.kept[k];
    a.col(static_cast<Eigen::Index>(k)) = (lagged.col(j).array() - s.mean(j)) / s.sd(j);
  }
  const Vector yc = y.array() - y_mean;
  const int folds = static_cast<int>(std::min<Eigen::Index>(opt.cv_folds, n));
  const CvResult cv = lasso_cv(a, yc, folds, opt.cv_grid, seed);
  const LassoFit fit = lasso_cd(a, yc, cv.lambda_star);
  res.lambda_star = cv.lambda_star;

  double forecast = y_mean;
  for (std::size_t k = 0; k < s.kept.size(); ++k) {
    const Eigen::Index j = s.kept[k];
    const double b = fit.beta(static_cast<Eigen::Index>(k));
    res.coef(j) = b;
    forecast += b * (preds(w - 1, j) - s.mean(j)) / s.sd(j);
    if (b != 0.0 && j >= 1 + m) res.support_z.push_back(static_cast<int>(j - 1 - m));
  }
  res.forecast = forecast;
  return res;
}

double lasso_step(const Matrix& window, const SeedSpec& seed, const LassoStepOptions& opt) {
  return lasso_fit_step(window, seed, opt).forecast;
}

IpadStepResult ipad_fit_step(const Matrix& window, const SeedSpec& seed, const IpadStepOptions& opt) {
  check_window(window);
  if (opt.draws < 1) throw ValidationError("ipad_step needs at least one draw");
  if (window.cols() < 2) throw ValidationError("ipad_step needs at least one predictor");
  const Eigen::Index w = window.rows();
  const Eigen::Index n = w - 1;
  const Eigen::Index p = window.cols() - 1;
  const Vector lag = window.col(0).head(n);
  const Vector y = window.col(0).tail(n);
  const Matrix z_lag = window.block(0, 1, n, p);
  const Vector z_now = window.block(w - 1, 1, 1, p).transpose();
  const double y_now = window(w - 1, 0);
  const bool use_lag = !is_constant(lag);

  const Eigen::Index h_cols = use_lag ? 2 : 1;
  Matrix h(n, h_cols);
  h.col(0).setOnes();
  if (use_lag) h.col(1) = lag;
  const Eigen::ColPivHouseholderQR<Matrix> qr(h);
  const Vector e_y = residualize(qr, h, y);

  std::vector<Eigen::Index> kept;
  Matrix e_z(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    e_z.col(j) = residualize(qr, h, z_lag.col(j));
    const double norm = e_z.col(j).norm();
    if (norm > 1e-10 * std::max(z_lag.col(j).norm(), 1e-300)) kept.push_back(j);
  }
  Matrix ez(n, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const Eigen::Index j = kept[k];
    ez.col(static_cast<Eigen::Index>(k)) = e_z.col(j) / e_z.col(j).norm();
  }
  const bool has_signal = e_y.norm() > 1e-12 * std::max(y.norm(), 1e-300) && ez.cols() > 0;

  // Refit of y_t on (1, y_{t-1}, z_{t-1,S}); highest-index selections are
  // dropped until the design has full column rank.
  std::map<std::vector<int>, double> refit_cache;
  auto refit = [&](std::vector<int> sel) {
    if (const auto it = refit_cache.find(sel); it != refit_cache.end()) return it->second;
    const std::vector<int> key = sel;
    double forecast = 0.0;
    for (;;) {
      const Eigen::Index k = static_cast<Eigen::Index>(sel.size());
      if (h_cols + k < n) {
        Matrix d(n, h_cols + k);
        d.leftCols(h_cols) = h;
        Vector x_t(h_cols + k);
        x_t(0) = 1.0;
        if (use_lag) x_t(1) = y_now;
        for (Eigen::Index c = 0; c < k; ++c) {
          d.col(h_cols + c) = z_lag.col(sel[static_cast<std::size_t>(c)]);
          x_t(h_cols + c) = z_now(sel[static_cast<std::size_t>(c)]);
        }
        try {
          forecast = x_t.dot(ols(d, y));
          break;
        } catch (const NumericalError&) {
          if (sel.empty()) throw;
        }
      }
      sel.pop_back();
    }
    refit_cache.emplace(key, forecast);
    return forecast;
  };

  ProcedureOptions popt;
  popt.q = opt.q;
  popt.r_max = opt.r_max;
  popt.cv_folds = static_cast<int>(std::min<Eigen::Index>(opt.cv_folds, n));
  popt.cv_grid = opt.cv_grid;

  FactorEstimate fe;
  if (has_signal) {
    const int r_max = std::min(opt.r_max, default_r_max(ez.rows(), ez.cols(), opt.r_max));
    fe = fit_pc(ez, r_max >= 1 ? estimate_num_factors(ez, r_max) : 0);
  }

  IpadStepResult res;
  res.selection_frequency = Vector::Zero(p);
  res.draw_forecasts.reserve(static_cast<std::size_t>(opt.draws));
  double selected_total = 0.0;
  for (int d = 0; d < opt.draws; ++d) {
    std::vector<int> sel;
    if (has_signal) {
      // Same streams as run_ipad(ez, e_y, popt, draw_seed); the factor fit is shared.
      const SeedSpec draw_seed = child(seed, static_cast<std::uint64_t>(d));
      const KnockoffMatrix k = generate(fe.c_hat, fe.sigma2_hat, child(draw_seed, 1));
      const ProcedureResult pr = run_knockoff_inference(ez, k, e_y, popt, draw_seed);
      const SelectionResult& s = opt.plus ? pr.knockoff_plus : pr.knockoff;
      for (const int j : s.selected) sel.push_back(static_cast<int>(kept[static_cast<std::size_t>(j)]));
      std::sort(sel.begin(), sel.end());
    }
    for (const int j : sel) res.selection_frequency(j) += 1.0;
    selected_total += static_cast<double>(sel.size());
    res.draw_forecasts.push_back(refit(sel));
  }
  const double draws = static_cast<double>(opt.draws);
  res.selection_frequency /= draws;
  res.mean_selected = selected_total / draws;
  double sum = 0.0;
  for (const double v : res.draw_forecasts) sum += v;
  res.forecast = sum / draws;
  return res;
}

double ipad_step(const Matrix& window, int draws, const SeedSpec& seed) {
  IpadStepOptions opt;
  opt.draws = draws;
  return ipad_fit_step(window, seed, opt).forecast;
}

std::string_view to_string(ForecastMethod m) noexcept {
  switch (m) {
    case ForecastMethod::ar: return "ar";
    case ForecastMethod::far: return "far";
    case ForecastMethod::lasso: return "lasso";
    case ForecastMethod::ipad: return "ipad";
  }
  return "?";
}

ForecastMethod method_from_string(std::string_view s) {
  if (s == "ar" || s == "ar1") return ForecastMethod::ar;
  if (s == "far") return ForecastMethod::far;
  if (s == "lasso") return ForecastMethod::lasso;
  if (s == "ipad") return ForecastMethod::ipad;
  throw ValidationError("unknown forecasting method '" + std::string(s) + "' (expected ar, far, lasso or ipad)");
}

DmResult dm_from_differential(const Vector& d) {
  const Eigen::Index t = d.size();
  if (t < 2) throw ValidationError("dm statistic needs at least two loss differentials");
  const double mean = d.mean();
  const double var = (d.array() - mean).square().sum() / static_cast<double>(t - 1);
  DmResult r;
  if (var == 0.0) {
    if (mean == 0.0) return r;
    r.statistic = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.stars = 3;
    return r;
  }
  r.statistic = mean / std::sqrt(var / static_cast<double>(t));
  const double a = std::abs(r.statistic);
  r.stars = a > 3.291 ? 3 : a > 2.576 ? 2 : a > 1.96 ? 1 : 0;
  return r;
}

DmResult dm_test(const Vector& e1, const Vector& e2) {
  if (e1.size() != e2.size()) throw ValidationError("dm_test: error vectors differ in length");
  if (e1.size() < 10) throw ValidationError("dm_test needs at least 10 forecast errors");
  return dm_from_differential(e1.array().square() - e2.array().square());
}

std::string dm_annotation(const DmResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", r.statistic);
  return std::string(buf) + std::string(static_cast<std::size_t>(r.stars), '*');
}

ForecastReport roll(const SeriesPanel& panel, const RollOptions& opt) {
  const Eigen::Index t_len = panel.periods();
  const Eigen::Index w = opt.window_size;
  if (w < 3) throw ValidationError("window size must be at least 3");
  if (t_len <= w) {
    throw ValidationError("panel has " + std::to_string(t_len) + " periods; rolling window " + std::to_string(w) +
                          " needs at least " + std::to_string(w + 1));
  }
  if (opt.methods.empty()) throw ValidationError("no forecasting methods requested");
  if (static_cast<Eigen::Index>(panel.dates.size()) != t_len) throw ValidationError("panel dates do not match rows");
  const bool want_ipad =
      std::find(opt.methods.begin(), opt.methods.end(), ForecastMethod::ipad) != opt.methods.end();
  if (want_ipad && panel.predictors() < 1) throw ValidationError("ipad forecasting needs at least one predictor");

  const Eigen::Index origins = t_len - w;
  const std::size_t n_methods = opt.methods.size();
  ForecastReport rep;
  rep.methods = opt.methods;
  rep.predictor_names = panel.predictor_names();
  rep.actual.resize(origins);
  rep.predictions.assign(n_methods, Vector::Zero(origins));
  if (want_ipad) rep.selection_frequency = Matrix::Zero(origins, panel.predictors());

  parallel_for(static_cast<std::size_t>(origins), opt.threads, [&](std::size_t o) {
    const Eigen::Index t = w - 1 + static_cast<Eigen::Index>(o);
    const Matrix win = panel.window(t - w + 1, w);
    const SeedSpec origin_seed = child(opt.seed, static_cast<std::uint64_t>(t));
    for (std::size_t k = 0; k < n_methods; ++k) {
      double f = 0.0;
      switch (opt.methods[k]) {
        case ForecastMethod::ar: f = ar1_step(win.col(0)); break;
        case ForecastMethod::far: f = far_step(win, opt.far); break;
        case ForecastMethod::lasso: f = lasso_step(win, child(origin_seed, 0), opt.lasso); break;
        case ForecastMethod::ipad: {
          const IpadStepResult r = ipad_fit_step(win, child(origin_seed, 1), opt.ipad);
          rep.selection_frequency.row(static_cast<Eigen::Index>(o)) = r.selection_frequency.transpose();
          f = r.forecast;
          break;
        }
      }
      rep.predictions[k](static_cast<Eigen::Index>(o)) = f;
    }
  });

  for (Eigen::Index o = 0; o < origins; ++o) {
    const Eigen::Index t = w + o;
    rep.actual(o) = panel.values(t, panel.target_column);
    rep.dates.push_back(panel.dates[static_cast<std::size_t>(t)]);
  }
  for (std::size_t k = 0; k < n_methods; ++k) {
    rep.rmse.push_back(std::sqrt((rep.actual - rep.predictions[k]).squaredNorm() / static_cast<double>(origins)));
  }
  if (origins >= 10) {
    for (std::size_t j = 1; j < n_methods; ++j) {
      for (std::size_t i = 0; i < j; ++i) {
        const Vector ej = rep.actual - rep.predictions[j];
        const Vector ei = rep.actual - rep.predictions[i];
        rep.dm.push_back({opt.methods[j], opt.methods[i], dm_test(ej, ei)});
      }
    }
  }
  return rep;
}

std::string forecast_report_json(const ForecastReport& rep) {
  nlohmann::ordered_json j;
  j["forecasts"] = rep.actual.size();
  j["dates"] = rep.dates;
  auto methods = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < rep.methods.size(); ++k) {
    auto pred = nlohmann::ordered_json::array();
    for (Eigen::Index o = 0; o < rep.predictions[k].size(); ++o) pred.push_back(rep.predictions[k](o));
    methods.push_back({{"method", to_string(rep.methods[k])}, {"rmse", rep.rmse[k]}, {"predictions", pred}});
  }
  j["methods"] = methods;
  auto dm = nlohmann::ordered_json::array();
  for (const DmEntry& e : rep.dm) {
    nlohmann::ordered_json d;
    d["pair"] = std::string(to_string(e.first)) + " vs " + std::string(to_string(e.second));
    if (std::isfinite(e.result.statistic)) {
      d["statistic"] = e.result.statistic;
    } else {
      d["statistic"] = e.result.statistic > 0 ? "inf" : "-inf";
    }
    d["stars"] = e.result.stars;
    dm.push_back(d);
  }
  j["dm"] = dm;
  return j.dump(2) + "\n";
}

void write_forecast_report(const ForecastReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name);
    if (!os) throw std::runtime_error("cannot write '" + (dir / name).string() + "'");
    return os;
  };
  {
    std::ofstream os = open("predictions.csv");
    os << "date,actual";
    for (const ForecastMethod m : rep.methods) os << ',' << to_string(m);
    os << '\n';
    for (Eigen::Index o = 0; o < rep.actual.size(); ++o) {
      os << rep.dates[static_cast<std::size_t>(o)] << ',' << format_real(rep.actual(o));
      for (const Vector& p : rep.predictions) os << ',' << format_real(p(o));
      os << '\n';
    }
  }
  {
    std::ofstream os = open("rmse.csv");
    os << "method,rmse\n";
    for (std::size_t k = 0; k < rep.methods.size(); ++k) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", rep.rmse[k]);
      os << to_string(rep.methods[k]) << ',' << buf << '\n';
    }
  }
  {
    std::ofstream os = open("dm.csv");
    os << "pair,statistic,stars,annotated\n";
    for (const DmEntry& e : rep.dm) {
      os << to_string(e.first) << " vs " << to_string(e.second) << ',' << format_real(e.result.statistic) << ','
         << e.result.stars << ',' << dm_annotation(e.result) << '\n';
    }
  }
  if (rep.selection_frequency.size() > 0) {
    std::ofstream os = open("selection_frequency.csv");
    os << "date";
    for (const std::string& n : rep.predictor_names) os << ',' << n;
    os << '\n';
    for (Eigen::Index o = 0; o < rep.selection_frequency.rows(); ++o) {
      os << rep.dates[static_cast<std::size_t>(o)];
      for (Eigen::Index j = 0; j < rep.selection_frequency.cols(); ++j) {
        os << ',' << format_real(rep.selection_frequency(o, j));
      }
      os << '\n';
    }
  }
  std::ofstream js = open("report.json");
  js << forecast_report_json(rep);
}

}  // namespace ipad
