#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "varlasso/error.hpp"
#include "varlasso/lasso.hpp"
#include "varlasso/panel.hpp"
#include "varlasso/preprocess.hpp"

namespace varlasso {

/// How the penalty is chosen: fixed value or rolling-origin cross-validation over a log grid.
struct LambdaPolicy {
  enum class Kind { cv, fixed } kind = Kind::cv;
  double value = 0.0;  // used when kind == fixed

  int n_lambda = 20;
  double ratio = 0.01;
  int n_folds = 10;
  Eigen::Index min_train = 0;  // 0: half of the design rows
  CvRule rule = CvRule::one_standard_error;

  static LambdaPolicy cross_validated() { return {}; }
  static LambdaPolicy fixed(double lambda) {
    LambdaPolicy p;
    p.kind = Kind::fixed;
    p.value = lambda;
    return p;
  }
  std::string describe() const { return kind == Kind::cv ? std::string("cv") : "fixed:" + std::to_string(value); }
};

struct VarSpec {
  int p = 25;
  LambdaPolicy lambda;
  LassoOptions solver;
  bool per_equation_lambda = false;
  std::optional<Eigen::Index> min_rows;  // default p + K + 5 usable design rows

  Eigen::Index required_rows(Eigen::Index K) const { return min_rows.value_or(p + K + 5); }
};

struct FitDiagnostics {
  Eigen::Index rows = 0;
  double lambda_max = 0.0;
  std::vector<double> grid;
  std::vector<double> cv_curve;
  int iterations = 0;
  bool converged = true;
  std::vector<Eigen::Index> dropped_columns;
};

/// z_t = c + sum_l Phi_l z_{t-l} + e_t on the differenced scale.
/// lag_matrices[l-1](i, j) is the effect of series j at lag l on series i.
struct VarLassoFit {
  Eigen::VectorXd intercept;
  std::vector<Eigen::MatrixXd> lag_matrices;
  double lambda = 0.0;                       // shared penalty (mean of equation_lambdas when selected per equation)
  std::vector<double> equation_lambdas;      // one per response series
  Eigen::MatrixXd residual_cov;
  std::optional<std::pair<Date, Date>> train_window;
  FitDiagnostics diagnostics;

  Eigen::Index num_series() const { return intercept.size(); }
  int order() const { return static_cast<int>(lag_matrices.size()); }
};

/// Lagged design for a VAR(p). Column 0 is the intercept, then lag-major blocks:
/// column 1 + (l-1)*K + j holds series j at lag l. Row r targets time p + r.
struct VarDesign {
  Eigen::MatrixXd X;  // (n-p) x (1 + K p)
  Eigen::MatrixXd Y;  // (n-p) x K
};

inline Eigen::Index design_column(Eigen::Index K, int lag, Eigen::Index series) { return 1 + (lag - 1) * K + series; }

inline VarDesign build_design(const Eigen::Ref<const Eigen::MatrixXd>& differenced, int p) {
  const Eigen::Index K = differenced.rows();
  const Eigen::Index n = differenced.cols();
  if (p < 1) throw DataError("lag order p must be >= 1");
  if (K < 1) throw DataError("design needs at least one series");
  if (n <= p) throw DataError("design needs more than p = " + std::to_string(p) + " observations, got " + std::to_string(n));
  const Eigen::Index rows = n - p;
  VarDesign d{Eigen::MatrixXd(rows, 1 + K * p), Eigen::MatrixXd(rows, K)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index t = p + r;
    d.X(r, 0) = 1.0;
    for (int lag = 1; lag <= p; ++lag)
      for (Eigen::Index j = 0; j < K; ++j) d.X(r, design_column(K, lag, j)) = differenced(j, t - lag);
    d.Y.row(r) = differenced.col(t).transpose();
  }
  return d;
}

inline std::vector<bool> var_penalty_mask(Eigen::Index K, int p) {
  std::vector<bool> mask(static_cast<std::size_t>(1 + K * p), true);
  mask[0] = false;
  return mask;
}

/// (1 + K p) x K coefficient matrix B with Y = X B, i.e. vec(c, Phi_1, ..., Phi_p) column-wise.
inline Eigen::MatrixXd coefficient_matrix(const VarLassoFit& fit) {
  const Eigen::Index K = fit.num_series();
  const int p = fit.order();
  Eigen::MatrixXd B(1 + K * p, K);
  B.row(0) = fit.intercept.transpose();
  for (int lag = 1; lag <= p; ++lag)
    for (Eigen::Index j = 0; j < K; ++j) B.row(design_column(K, lag, j)) = fit.lag_matrices[static_cast<std::size_t>(lag - 1)].col(j).transpose();
  return B;
}

inline void set_coefficients(VarLassoFit& fit, const Eigen::MatrixXd& B, Eigen::Index K, int p) {
  if (B.rows() != 1 + K * p || B.cols() != K) throw DataError("coefficient matrix has the wrong shape");
  fit.intercept = B.row(0).transpose();
  fit.lag_matrices.assign(static_cast<std::size_t>(p), Eigen::MatrixXd::Zero(K, K));
  for (int lag = 1; lag <= p; ++lag)
    for (Eigen::Index j = 0; j < K; ++j)
      fit.lag_matrices[static_cast<std::size_t>(lag - 1)].col(j) = B.row(design_column(K, lag, j)).transpose();
}

/// lambda_max of the VAR design built from `differenced`.
inline double var_lambda_max(const Eigen::Ref<const Eigen::MatrixXd>& differenced, int p) {
  auto d = build_design(differenced, p);
  return lambda_max(LassoProblem{std::move(d.X), std::move(d.Y), var_penalty_mask(differenced.rows(), p), 0.0});
}

namespace detail {

inline Eigen::Index cv_min_train(const LambdaPolicy& policy, Eigen::Index rows) {
  return policy.min_train > 0 ? policy.min_train : std::max<Eigen::Index>(rows / 2, 1);
}

// Penalty for one response block: fixed, or CV on the policy grid. A response
// that is identically zero after centering leaves nothing to penalize.
inline double select_lambda(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const std::vector<bool>& mask,
                            const LambdaPolicy& policy, const LassoOptions& solver, FitDiagnostics& diag) {
  const LassoProblem problem{X, Y, mask, 0.0};
  diag.lambda_max = std::max(diag.lambda_max, lambda_max(problem));
  if (policy.kind == LambdaPolicy::Kind::fixed) {
    if (!(policy.value >= 0.0)) throw DataError("fixed lambda must be >= 0");
    return policy.value;
  }
  if (!(lambda_max(problem) > 0.0)) return 0.0;
  const auto grid = lambda_grid(problem, policy.n_lambda, policy.ratio);
  const Eigen::Index min_train = cv_min_train(policy, X.rows());
  const int folds = static_cast<int>(std::min<Eigen::Index>(policy.n_folds, X.rows() - min_train));
  const auto cv = cv_select_lambda(X, Y, grid, folds, min_train, mask, solver, policy.rule);
  diag.grid = grid;
  diag.cv_curve = cv.cv_curve;
  return cv.best_lambda;
}

}  // namespace detail

/// Lasso-penalized VAR(p) on a K x n matrix of differenced observations.
inline VarLassoFit fit_var_lasso(const Eigen::Ref<const Eigen::MatrixXd>& differenced, const VarSpec& spec) {
  const Eigen::Index K = differenced.rows();
  const Eigen::Index n = differenced.cols();
  if (K < 1) throw DataError("VAR fit needs at least one series");
  if (n - spec.p < spec.required_rows(K))
    throw DataError("insufficient data for VAR(" + std::to_string(spec.p) + "): " + std::to_string(std::max<Eigen::Index>(n - spec.p, 0)) +
                    " usable rows, need " + std::to_string(spec.required_rows(K)));
  if (!differenced.allFinite()) throw NumericalError("VAR input contains non-finite values");

  const auto design = build_design(differenced, spec.p);
  const auto mask = var_penalty_mask(K, spec.p);

  VarLassoFit fit;
  fit.diagnostics.rows = design.X.rows();
  Eigen::MatrixXd B(design.X.cols(), K);
  if (!spec.per_equation_lambda) {
    const double lambda = detail::select_lambda(design.X, design.Y, mask, spec.lambda, spec.solver, fit.diagnostics);
    const auto sol = fit_lasso({design.X, design.Y, mask, lambda}, spec.solver);
    B = sol.coefficients;
    fit.lambda = lambda;
    fit.equation_lambdas.assign(static_cast<std::size_t>(K), lambda);
    fit.diagnostics.iterations = sol.iterations;
    fit.diagnostics.converged = sol.converged;
    fit.diagnostics.dropped_columns = sol.dropped_columns;
  } else {
    double total = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      FitDiagnostics eq;
      const Eigen::MatrixXd yk = design.Y.col(k);
      const double lambda = detail::select_lambda(design.X, yk, mask, spec.lambda, spec.solver, eq);
      const auto sol = fit_lasso({design.X, yk, mask, lambda}, spec.solver);
      B.col(k) = sol.coefficients.col(0);
      fit.equation_lambdas.push_back(lambda);
      total += lambda;
      fit.diagnostics.lambda_max = std::max(fit.diagnostics.lambda_max, eq.lambda_max);
      fit.diagnostics.iterations = std::max(fit.diagnostics.iterations, sol.iterations);
      fit.diagnostics.converged = fit.diagnostics.converged && sol.converged;
      fit.diagnostics.dropped_columns = sol.dropped_columns;
    }
    fit.lambda = total / static_cast<double>(K);
  }
  set_coefficients(fit, B, K, spec.p);
  const Eigen::MatrixXd resid = design.Y - design.X * B;
  fit.residual_cov = (resid.transpose() * resid) / static_cast<double>(design.X.rows());
  return fit;
}

inline VarLassoFit fit_var_lasso(const PreprocessedPanel& panel, const VarSpec& spec) {
  return fit_var_lasso(panel.differenced, spec);
}

/// One-step prediction of the differenced series given the last p observations
/// (columns oldest to newest).
inline Eigen::VectorXd predict_one_step(const VarLassoFit& fit, const Eigen::Ref<const Eigen::MatrixXd>& recent) {
  const Eigen::Index K = fit.num_series();
  const int p = fit.order();
  if (recent.rows() != K || recent.cols() < p)
    throw DataError("forecast history must be " + std::to_string(K) + " x " + std::to_string(p) + ", got " +
                    std::to_string(recent.rows()) + " x " + std::to_string(recent.cols()));
  Eigen::VectorXd z = fit.intercept;
  const Eigen::Index last = recent.cols() - 1;
  for (int lag = 1; lag <= p; ++lag) z.noalias() += fit.lag_matrices[static_cast<std::size_t>(lag - 1)] * recent.col(last - (lag - 1));
  return z;
}

struct TwoStepForecast {
  Eigen::VectorXd step1;   // predicted change at t+1
  Eigen::VectorXd step2;   // predicted change at t+2
  Eigen::VectorXd level1;  // anchor + step1
  Eigen::VectorXd level2;  // anchor + step1 + step2
};

enum class RefitPolicy { reuse, refit };

inline const char* to_string(RefitPolicy p) { return p == RefitPolicy::reuse ? "reuse" : "refit"; }

/// Iterated two-step forecast reusing one set of coefficients.
inline TwoStepForecast forecast_two_step(const VarLassoFit& fit, const Eigen::Ref<const Eigen::MatrixXd>& recent_diffs,
                                         const Eigen::Ref<const Eigen::VectorXd>& anchors) {
  const Eigen::Index K = fit.num_series();
  const int p = fit.order();
  if (anchors.size() != K) throw DataError("anchors must have one entry per series");
  if (recent_diffs.rows() != K || recent_diffs.cols() < p) throw DataError("forecast history has the wrong shape");
  TwoStepForecast out;
  out.step1 = predict_one_step(fit, recent_diffs);
  Eigen::MatrixXd extended(K, p);
  extended.leftCols(p - 1) = recent_diffs.rightCols(p - 1);
  extended.col(p - 1) = out.step1;
  out.step2 = predict_one_step(fit, extended);
  out.level1 = anchors + out.step1;
  out.level2 = out.level1 + out.step2;
  return out;
}

struct RefitForecast {
  TwoStepForecast forecast;
  VarLassoFit first;
  VarLassoFit second;  // fit on the history extended by the step-1 point forecast
};

/// Recursive variant: fit, predict t+1, append the prediction, refit, predict t+2.
inline RefitForecast forecast_two_step_refit(const Eigen::Ref<const Eigen::MatrixXd>& differenced, const VarSpec& spec,
                                             const Eigen::Ref<const Eigen::VectorXd>& anchors) {
  const Eigen::Index K = differenced.rows();
  const Eigen::Index n = differenced.cols();
  if (anchors.size() != K) throw DataError("anchors must have one entry per series");
  RefitForecast out{{}, fit_var_lasso(differenced, spec), {}};
  out.forecast.step1 = predict_one_step(out.first, differenced.rightCols(spec.p));
  Eigen::MatrixXd extended(K, n + 1);
  extended.leftCols(n) = differenced;
  extended.col(n) = out.forecast.step1;
  out.second = fit_var_lasso(extended, spec);
  out.forecast.step2 = predict_one_step(out.second, extended.rightCols(spec.p));
  out.forecast.level1 = anchors + out.forecast.step1;
  out.forecast.level2 = out.forecast.level1 + out.forecast.step2;
  return out;
}

// ---------------------------------------------------------------------------
// Forecast sets and intervals

enum class ModelTag { var_lasso, ar_lasso, naive };

inline const char* to_string(ModelTag m) {
  switch (m) {
    case ModelTag::var_lasso: return "var_lasso";
    case ModelTag::ar_lasso: return "ar_lasso";
    case ModelTag::naive: return "naive";
  }
  return "unknown";
}

inline ModelTag parse_model_tag(const std::string& s) {
  if (s == "var_lasso" || s == "var") return ModelTag::var_lasso;
  if (s == "ar_lasso" || s == "ar") return ModelTag::ar_lasso;
  if (s == "naive") return ModelTag::naive;
  throw UsageError("unknown model '" + s + "' (expected var_lasso, ar_lasso or naive)");
}

struct ForecastEntry {
  std::string jurisdiction;
  Date target_week;
  double point = 0.0;
  std::optional<double> lower95;
  std::optional<double> upper95;
};

struct ForecastSet {
  ModelTag model = ModelTag::var_lasso;
  std::vector<ForecastEntry> entries;  // one per jurisdiction, panel order
};

inline ForecastSet make_forecast_set(ModelTag model, const std::vector<std::string>& jurisdictions, Date target_week,
                                     const Eigen::Ref<const Eigen::VectorXd>& points) {
  if (static_cast<Eigen::Index>(jurisdictions.size()) != points.size())
    throw DataError("forecast set needs one point per jurisdiction");
  ForecastSet set{model, {}};
  for (std::size_t k = 0; k < jurisdictions.size(); ++k)
    set.entries.push_back({jurisdictions[k], target_week, points(static_cast<Eigen::Index>(k)), std::nullopt, std::nullopt});
  return set;
}

inline constexpr double kZ95 = 1.96;

/// Adds point +/- 1.96 sqrt(v1 + v2) bounds. The step-2 variance is conditional on the
/// step-1 forecast and the two errors are treated as independent.
inline ForecastSet prediction_interval_two_step(ForecastSet forecasts, const Eigen::Ref<const Eigen::VectorXd>& one_step_var,
                                                const Eigen::Ref<const Eigen::VectorXd>& conditional_second_var) {
  const auto K = static_cast<Eigen::Index>(forecasts.entries.size());
  if (one_step_var.size() != K || conditional_second_var.size() != K)
    throw DataError("interval variances need one entry per forecast");
  for (Eigen::Index k = 0; k < K; ++k) {
    const double v1 = one_step_var(k);
    const double v2 = conditional_second_var(k);
    if (!(v1 >= 0.0) || !(v2 >= 0.0)) throw DataError("interval variances must be non-negative");
    auto& e = forecasts.entries[static_cast<std::size_t>(k)];
    const double half = kZ95 * std::sqrt(v1 + v2);
    e.lower95 = e.point - half;
    e.upper95 = e.point + half;
  }
  return forecasts;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json matrix_rows_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Lag matrices as dense row-major arrays plus a sparse (lag, from, to, value) listing.
inline nlohmann::json fit_to_json(const VarLassoFit& fit, const std::vector<std::string>& names, ModelTag tag = ModelTag::var_lasso) {
  nlohmann::json j;
  j["model_tag"] = to_string(tag);
  j["series"] = names;
  j["lambda"] = fit.lambda;
  j["equation_lambdas"] = fit.equation_lambdas;
  j["intercept"] = std::vector<double>(fit.intercept.data(), fit.intercept.data() + fit.intercept.size());
  nlohmann::json lags = nlohmann::json::array();
  nlohmann::json nonzero = nlohmann::json::array();
  for (int l = 1; l <= fit.order(); ++l) {
    const auto& phi = fit.lag_matrices[static_cast<std::size_t>(l - 1)];
    lags.push_back({{"lag", l}, {"matrix", matrix_rows_json(phi)}});
    for (Eigen::Index to = 0; to < phi.rows(); ++to)
      for (Eigen::Index from = 0; from < phi.cols(); ++from)
        if (phi(to, from) != 0.0)
          nonzero.push_back({{"lag", l},
                             {"from", names[static_cast<std::size_t>(from)]},
                             {"to", names[static_cast<std::size_t>(to)]},
                             {"value", phi(to, from)}});
  }
  j["lag_matrices"] = lags;
  j["nonzero"] = nonzero;
  j["residual_cov"] = matrix_rows_json(fit.residual_cov);
  if (fit.train_window)
    j["train_window"] = {fit.train_window->first.str(), fit.train_window->second.str()};
  else
    j["train_window"] = nullptr;
  j["diagnostics"] = {{"rows", fit.diagnostics.rows},
                      {"lambda_max", fit.diagnostics.lambda_max},
                      {"iterations", fit.diagnostics.iterations},
                      {"converged", fit.diagnostics.converged}};
  return j;
}

}  // namespace varlasso
