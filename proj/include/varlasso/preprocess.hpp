#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "varlasso/error.hpp"

namespace varlasso {

struct SmoothingConfig {
  int window_weeks = 4;

  /// Windows outside {1..5} are allowed but fall outside the usual sensitivity grid.
  bool in_standard_grid() const { return window_weeks >= 1 && window_weeks <= 5; }
};

/// Centered moving-average kernel weights, offsets -half..half.
/// Even w: length w+1 with half-weight ends (the 2xw average). Odd w: uniform length w.
inline Eigen::VectorXd centered_ma_kernel(int window_weeks) {
  if (window_weeks < 1) throw DataError("smoothing window must be >= 1");
  if (window_weeks % 2 == 1) return Eigen::VectorXd::Constant(window_weeks, 1.0 / window_weeks);
  Eigen::VectorXd k = Eigen::VectorXd::Constant(window_weeks + 1, 1.0 / window_weeks);
  k(0) = k(window_weeks) = 0.5 / window_weeks;
  return k;
}

/// Same-length centered moving average. Near the ends the kernel is truncated
/// to the available points and renormalized to unit mass.
inline Eigen::VectorXd smooth_centered_ma(const Eigen::Ref<const Eigen::VectorXd>& series, int window_weeks) {
  if (series.size() == 0) throw DataError("cannot smooth an empty series");
  const Eigen::VectorXd kernel = centered_ma_kernel(window_weeks);
  const Eigen::Index half = (kernel.size() - 1) / 2;
  const Eigen::Index n = series.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = 0.0;
    double mass = 0.0;
    for (Eigen::Index o = -half; o <= half; ++o) {
      const Eigen::Index s = t + o;
      if (s < 0 || s >= n) continue;
      const double w = kernel(o + half);
      acc += w * series(s);
      mass += w;
    }
    out(t) = acc / mass;
  }
  return out;
}

struct Differenced {
  Eigen::VectorXd diffs;
  double anchor = 0.0;
};

inline Differenced difference_once(const Eigen::Ref<const Eigen::VectorXd>& series) {
  if (series.size() < 2) throw DataError("differencing needs at least 2 observations");
  const Eigen::Index n = series.size();
  return {series.tail(n - 1) - series.head(n - 1), series(n - 1)};
}

/// Cumulative sum of diffs starting from start_level (start_level itself is not emitted).
inline Eigen::VectorXd undifference(const Eigen::Ref<const Eigen::VectorXd>& diffs, double start_level) {
  Eigen::VectorXd out(diffs.size());
  double level = start_level;
  for (Eigen::Index i = 0; i < diffs.size(); ++i) {
    level += diffs(i);
    out(i) = level;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmented Dickey-Fuller test, constant and no trend.

struct AdfResult {
  double statistic = 0.0;
  bool reject_unit_root_at_5pct = false;
  int lag_used = 0;
  Eigen::Index nobs = 0;
};

/// Asymptotic 5% critical value for the constant-only ADF regression.
inline constexpr double kAdfCritical5pct = -2.86;

inline int default_adf_max_lag(Eigen::Index length) {
  return static_cast<int>(std::floor(std::cbrt(static_cast<double>(length - 1)) + 1e-12));
}

namespace detail {

struct AdfRegression {
  double gamma = 0.0;
  double se_gamma = 0.0;
  double ssr = 0.0;
  Eigen::Index nobs = 0;
  Eigen::Index ncoef = 0;
  bool full_rank = true;
};

// dy_t = a + g*y_{t-1} + sum_i d_i dy_{t-i}, rows t = first..n-2 of the difference vector.
inline AdfRegression adf_regression(const Eigen::VectorXd& y, const Eigen::VectorXd& dy, int lag, int first) {
  const Eigen::Index rows = dy.size() - first;
  const Eigen::Index cols = 2 + lag;
  Eigen::MatrixXd X(rows, cols);
  Eigen::VectorXd target(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index t = first + r;
    target(r) = dy(t);
    X(r, 0) = 1.0;
    X(r, 1) = y(t);
    for (int i = 1; i <= lag; ++i) X(r, 1 + i) = dy(t - i);
  }
  AdfRegression out;
  out.nobs = rows;
  out.ncoef = cols;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < cols) {
    out.full_rank = false;
    return out;
  }
  const Eigen::VectorXd beta = qr.solve(target);
  const Eigen::VectorXd resid = target - X * beta;
  out.ssr = resid.squaredNorm();
  out.gamma = beta(1);
  const double sigma2 = out.ssr / static_cast<double>(rows - cols);
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
  out.se_gamma = std::sqrt(std::max(sigma2 * xtx_inv(1, 1), 0.0));
  return out;
}

inline double adf_aic(const AdfRegression& r) {
  const double n = static_cast<double>(r.nobs);
  if (r.ssr <= 0.0) return -std::numeric_limits<double>::infinity();
  return n * std::log(r.ssr / n) + 2.0 * static_cast<double>(r.ncoef);
}

}  // namespace detail

/// ADF t-test on the lagged level coefficient. The lag is chosen by AIC over
/// 0..max_lag on a common estimation sample, then the chosen regression is
/// re-estimated on every row it can use.
inline AdfResult adf_test(const Eigen::Ref<const Eigen::VectorXd>& series_in, int max_lag) {
  const Eigen::VectorXd series = series_in;
  if (max_lag < 0) throw DataError("ADF max_lag must be >= 0");
  if (series.size() < max_lag + 10)
    throw DataError("ADF needs at least max_lag + 10 = " + std::to_string(max_lag + 10) + " observations, got " +
                    std::to_string(series.size()));
  if (!series.allFinite()) throw NumericalError("ADF input contains non-finite values");
  if ((series.array() == series(0)).all()) throw DataError("ADF undefined on a constant series");

  const Eigen::VectorXd dy = series.tail(series.size() - 1) - series.head(series.size() - 1);

  int best_lag = -1;
  double best_aic = std::numeric_limits<double>::infinity();
  for (int lag = 0; lag <= max_lag; ++lag) {
    const auto reg = detail::adf_regression(series, dy, lag, max_lag);
    if (!reg.full_rank) continue;
    const double aic = detail::adf_aic(reg);
    if (best_lag < 0 || aic < best_aic) {
      best_lag = lag;
      best_aic = aic;
    }
  }
  if (best_lag < 0) throw NumericalError("ADF regression is rank deficient at every lag");

  const auto reg = detail::adf_regression(series, dy, best_lag, best_lag);
  if (!reg.full_rank) throw NumericalError("ADF regression is rank deficient");

  AdfResult out;
  out.lag_used = best_lag;
  out.nobs = reg.nobs;
  // An exact fit (e.g. a straight line) leaves no residual variance; the
  // statistic is then 0 when the level coefficient vanishes.
  const double scale = std::max(dy.cwiseAbs().maxCoeff(), 1e-300);
  if (reg.se_gamma <= 1e-12 * scale) {
    out.statistic = std::abs(reg.gamma) <= 1e-10 ? 0.0
                                                 : std::copysign(std::numeric_limits<double>::infinity(), reg.gamma);
  } else {
    out.statistic = reg.gamma / reg.se_gamma;
  }
  out.reject_unit_root_at_5pct = out.statistic < kAdfCritical5pct;
  return out;
}

inline AdfResult adf_test(const Eigen::Ref<const Eigen::VectorXd>& series) {
  return adf_test(series, default_adf_max_lag(series.size()));
}

inline void to_json(nlohmann::json& j, const AdfResult& r) {
  j = nlohmann::json{{"statistic", r.statistic},
                     {"reject_unit_root_at_5pct", r.reject_unit_root_at_5pct},
                     {"lag_used", r.lag_used},
                     {"nobs", r.nobs}};
}

// ---------------------------------------------------------------------------

struct SeriesAdf {
  std::optional<AdfResult> smoothed;
  std::optional<AdfResult> differenced;
};

/// Smoothed and once-differenced panel. Rows are jurisdictions.
struct PreprocessedPanel {
  Eigen::MatrixXd smoothed;     // K x T
  Eigen::MatrixXd differenced;  // K x (T-1)
  Eigen::VectorXd anchors;      // last smoothed level per series
  std::vector<SeriesAdf> adf_reports;
  SmoothingConfig config;

  Eigen::Index num_series() const { return smoothed.rows(); }
};

namespace detail {
inline std::optional<AdfResult> try_adf(const Eigen::VectorXd& s) {
  if (s.size() < default_adf_max_lag(s.size()) + 10) return std::nullopt;
  if ((s.array() == s(0)).all()) return std::nullopt;
  try {
    return adf_test(s);
  } catch (const Error&) {
    return std::nullopt;
  }
}
}  // namespace detail

/// Smooths each row, differences it once and records ADF diagnostics.
/// The ADF outcome never changes the transform: every series is differenced exactly once.
inline PreprocessedPanel preprocess(const Eigen::Ref<const Eigen::MatrixXd>& levels, SmoothingConfig config,
                                    bool run_adf = true) {
  if (levels.cols() < 2) throw DataError("preprocessing needs at least 2 weeks");
  PreprocessedPanel out;
  out.config = config;
  const Eigen::Index K = levels.rows();
  const Eigen::Index T = levels.cols();
  out.smoothed.resize(K, T);
  out.differenced.resize(K, T - 1);
  out.anchors.resize(K);
  out.adf_reports.resize(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    const Eigen::VectorXd row = levels.row(k).transpose();
    const Eigen::VectorXd sm = smooth_centered_ma(row, config.window_weeks);
    const auto d = difference_once(sm);
    out.smoothed.row(k) = sm.transpose();
    out.differenced.row(k) = d.diffs.transpose();
    out.anchors(k) = d.anchor;
    if (run_adf) out.adf_reports[static_cast<std::size_t>(k)] = {detail::try_adf(sm), detail::try_adf(d.diffs)};
  }
  return out;
}

inline void to_json(nlohmann::json& j, const PreprocessedPanel& p) {
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> v(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
      a.push_back(v);
    }
    return a;
  };
  nlohmann::json adf = nlohmann::json::array();
  for (const auto& r : p.adf_reports) {
    nlohmann::json e;
    e["smoothed"] = r.smoothed ? nlohmann::json(*r.smoothed) : nlohmann::json(nullptr);
    e["differenced"] = r.differenced ? nlohmann::json(*r.differenced) : nlohmann::json(nullptr);
    adf.push_back(e);
  }
  j = nlohmann::json{{"window_weeks", p.config.window_weeks},
                     {"window_in_standard_grid", p.config.in_standard_grid()},
                     {"smoothed", rows(p.smoothed)},
                     {"differenced", rows(p.differenced)},
                     {"anchors", std::vector<double>(p.anchors.data(), p.anchors.data() + p.anchors.size())},
                     {"adf", adf}};
}

}  // namespace varlasso
