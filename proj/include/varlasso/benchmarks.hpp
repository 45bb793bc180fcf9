#pragma once

#include <string>
#include <utility>

#include <Eigen/Dense>

#include "varlasso/error.hpp"
#include "varlasso/varmodel.hpp"

namespace varlasso {

struct ArLassoFit {
  std::string jurisdiction;
  double intercept = 0.0;
  Eigen::VectorXd lag_coefficients;  // phi_1..phi_p
  double lambda = 0.0;
  double residual_variance = 0.0;
  FitDiagnostics diagnostics;
};

/// Univariate AR(p)-Lasso: the K = 1 case of fit_var_lasso with the same solver and CV.
/// Needs more than p + 5 observations.
inline ArLassoFit fit_ar_lasso(const Eigen::Ref<const Eigen::VectorXd>& series_diffs, int p, const LambdaPolicy& policy,
                               const LassoOptions& solver = {}, std::string jurisdiction = {}) {
  if (series_diffs.size() <= p + 5)
    throw DataError("insufficient data for AR(" + std::to_string(p) + "): " + std::to_string(series_diffs.size()) +
                    " observations, need more than " + std::to_string(p + 5));
  VarSpec spec;
  spec.p = p;
  spec.lambda = policy;
  spec.solver = solver;
  spec.min_rows = 6;
  const Eigen::MatrixXd row = series_diffs.transpose();
  const VarLassoFit var = fit_var_lasso(row, spec);

  ArLassoFit fit;
  fit.jurisdiction = std::move(jurisdiction);
  fit.intercept = var.intercept(0);
  fit.lag_coefficients.resize(p);
  for (int l = 0; l < p; ++l) fit.lag_coefficients(l) = var.lag_matrices[static_cast<std::size_t>(l)](0, 0);
  fit.lambda = var.lambda;
  fit.residual_variance = var.residual_cov(0, 0);
  fit.diagnostics = var.diagnostics;
  return fit;
}

/// The AR fit viewed as a one-series VAR, so both share the forecasting path.
inline VarLassoFit as_var_fit(const ArLassoFit& ar) {
  VarLassoFit fit;
  fit.intercept = Eigen::VectorXd::Constant(1, ar.intercept);
  for (Eigen::Index l = 0; l < ar.lag_coefficients.size(); ++l)
    fit.lag_matrices.push_back(Eigen::MatrixXd::Constant(1, 1, ar.lag_coefficients(l)));
  fit.lambda = ar.lambda;
  fit.equation_lambdas = {ar.lambda};
  fit.residual_cov = Eigen::MatrixXd::Constant(1, 1, ar.residual_variance);
  fit.diagnostics = ar.diagnostics;
  return fit;
}

/// Two-step forecast of one series; returns (level at t+1, level at t+2).
inline std::pair<double, double> ar_forecast_two_step(const ArLassoFit& fit, const Eigen::Ref<const Eigen::VectorXd>& recent_diffs,
                                                      double anchor) {
  const Eigen::MatrixXd history = recent_diffs.transpose();
  const auto f = forecast_two_step(as_var_fit(fit), history, Eigen::VectorXd::Constant(1, anchor));
  return {f.level1(0), f.level2(0)};
}

struct ArStepVariances {
  double step1 = 0.0;
  double step2 = 0.0;
};

/// Forecast-error variances from the psi-weight expansion: sigma^2 at one step and
/// sigma^2 (1 + psi_1^2) with psi_1 = phi_1 at two steps.
inline ArStepVariances ar_two_step_interval(const ArLassoFit& fit) {
  const double s2 = fit.residual_variance;
  const double psi1 = fit.lag_coefficients.size() > 0 ? fit.lag_coefficients(0) : 0.0;
  return {s2, s2 * (1.0 + psi1 * psi1)};
}

/// Mean of the last four observed levels, carried forward to both horizon weeks.
inline double naive_forecast(const Eigen::Ref<const Eigen::VectorXd>& series_levels) {
  if (series_levels.size() < 4) throw DataError("naive forecast needs at least 4 observations");
  return series_levels.tail(4).mean();
}

}  // namespace varlasso
