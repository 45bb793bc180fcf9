#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "varlasso/error.hpp"
#include "varlasso/panel.hpp"
#include "varlasso/varmodel.hpp"

namespace varlasso {

/// Positive part of the week-over-week change. Entry t-1 holds the weight for time t, t >= 1.
inline Eigen::VectorXd slope_weights(const Eigen::Ref<const Eigen::VectorXd>& observed_smoothed) {
  const Eigen::Index n = observed_smoothed.size();
  if (n < 2) throw DataError("slope weights need at least 2 observations");
  return (observed_smoothed.tail(n - 1) - observed_smoothed.head(n - 1)).cwiseMax(0.0);
}

struct ScoredForecast {
  std::string jurisdiction;
  Date target_week;
  double observed = 0.0;
  double predicted = 0.0;
  double slope_weight = 0.0;
};

struct SlopeMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double bias = 0.0;  // mean of (predicted - observed); negative means under-prediction
  std::size_t count = 0;
  double weight_sum = 0.0;
};

/// Slope-weighted RMSE, MAE and bias. Throws when every weight is zero.
inline SlopeMetrics slope_weighted_metrics(std::span<const ScoredForecast> scored) {
  double sw = 0.0, s2 = 0.0, s1 = 0.0, sb = 0.0;
  for (const auto& s : scored) {
    if (!(s.slope_weight >= 0.0)) throw DataError("slope weights must be non-negative");
    if (!std::isfinite(s.observed) || !std::isfinite(s.predicted)) throw NumericalError("non-finite forecast or observation");
    const double e = s.predicted - s.observed;
    sw += s.slope_weight;
    s2 += e * e * s.slope_weight;
    s1 += std::abs(e) * s.slope_weight;
    sb += e * s.slope_weight;
  }
  if (!(sw > 0.0)) throw NumericalError("slope-weighted metrics undefined: all slope weights are zero");
  return {std::sqrt(s2 / sw), s1 / sw, sb / sw, scored.size(), sw};
}

enum class MetricKind { rmse, mae, bias };

inline const char* to_string(MetricKind m) {
  switch (m) {
    case MetricKind::rmse: return "rmse";
    case MetricKind::mae: return "mae";
    case MetricKind::bias: return "bias";
  }
  return "unknown";
}

inline double metric_value(const SlopeMetrics& m, MetricKind kind) {
  switch (kind) {
    case MetricKind::rmse: return m.rmse;
    case MetricKind::mae: return m.mae;
    case MetricKind::bias: return m.bias;
  }
  return 0.0;
}

/// 100 (benchmark - candidate) / benchmark; bias compares magnitudes.
inline double improvement_pct(double candidate, double benchmark, MetricKind kind = MetricKind::rmse) {
  if (kind == MetricKind::bias) {
    candidate = std::abs(candidate);
    benchmark = std::abs(benchmark);
  }
  if (benchmark == 0.0) throw NumericalError("improvement undefined against a zero benchmark");
  return 100.0 * (benchmark - candidate) / benchmark;
}

inline constexpr const char* kAllScope = "ALL";

/// Metrics per model and scope (jurisdiction id or ALL). nullopt marks an undefined metric.
struct MetricReport {
  std::vector<ModelTag> models;
  std::vector<std::string> scopes;  // "ALL" first, then jurisdictions in panel order
  std::map<ModelTag, std::map<std::string, std::optional<SlopeMetrics>>> metrics;

  std::optional<SlopeMetrics> get(ModelTag model, const std::string& scope) const {
    const auto m = metrics.find(model);
    if (m == metrics.end()) return std::nullopt;
    const auto s = m->second.find(scope);
    return s == m->second.end() ? std::nullopt : s->second;
  }

  bool has_model(ModelTag model) const { return metrics.count(model) != 0; }

  /// VAR-Lasso improvement over `benchmark`, or nullopt when either side is missing or undefined.
  std::optional<double> improvement(ModelTag benchmark, const std::string& scope, MetricKind kind) const {
    const auto cand = get(ModelTag::var_lasso, scope);
    const auto bench = get(benchmark, scope);
    if (!cand || !bench) return std::nullopt;
    const double b = metric_value(*bench, kind);
    if (b == 0.0) return std::nullopt;
    return improvement_pct(metric_value(*cand, kind), b, kind);
  }
};

inline std::optional<SlopeMetrics> try_metrics(std::span<const ScoredForecast> scored) {
  double sw = 0.0;
  for (const auto& s : scored) sw += s.slope_weight;
  if (!(sw > 0.0)) return std::nullopt;
  return slope_weighted_metrics(scored);
}

/// Per-jurisdiction metrics plus a pooled ALL row computed over every scored forecast.
inline MetricReport build_metric_report(const std::map<ModelTag, std::vector<ScoredForecast>>& scored,
                                        const std::vector<std::string>& jurisdictions) {
  MetricReport report;
  report.scopes.push_back(kAllScope);
  for (const auto& j : jurisdictions) report.scopes.push_back(j);
  for (const auto& [model, list] : scored) {
    report.models.push_back(model);
    auto& row = report.metrics[model];
    row[kAllScope] = try_metrics(list);
    for (const auto& j : jurisdictions) {
      std::vector<ScoredForecast> subset;
      for (const auto& s : list)
        if (s.jurisdiction == j) subset.push_back(s);
      row[j] = try_metrics(subset);
    }
  }
  return report;
}

namespace detail {
inline std::string fmt_cell(std::optional<double> v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}
}  // namespace detail

/// Table layout: scope, metric, VAR, AR, Naive, %Imp_VA, %Imp_VN. Empty cells are missing or undefined.
inline void write_metrics_csv(std::ostream& out, const MetricReport& report) {
  out << "scope,metric,VAR,AR,Naive,%Imp_VA,%Imp_VN\n";
  for (const auto& scope : report.scopes) {
    for (MetricKind kind : {MetricKind::rmse, MetricKind::mae, MetricKind::bias}) {
      auto value = [&](ModelTag m) -> std::optional<double> {
        const auto v = report.get(m, scope);
        return v ? std::optional<double>(metric_value(*v, kind)) : std::nullopt;
      };
      out << csv_quote(scope) << ',' << to_string(kind) << ',' << detail::fmt_cell(value(ModelTag::var_lasso)) << ','
          << detail::fmt_cell(value(ModelTag::ar_lasso)) << ',' << detail::fmt_cell(value(ModelTag::naive)) << ','
          << detail::fmt_cell(report.improvement(ModelTag::ar_lasso, scope, kind)) << ','
          << detail::fmt_cell(report.improvement(ModelTag::naive, scope, kind)) << '\n';
    }
  }
}

inline nlohmann::json metrics_to_json(const MetricReport& report) {
  nlohmann::json j;
  nlohmann::json models = nlohmann::json::object();
  for (const auto& [model, rows] : report.metrics) {
    nlohmann::json block = nlohmann::json::object();
    for (const auto& scope : report.scopes) {
      const auto it = rows.find(scope);
      if (it == rows.end()) continue;
      if (it->second) {
        const auto& m = *it->second;
        block[scope] = {{"rmse", m.rmse}, {"mae", m.mae}, {"bias", m.bias}, {"n", m.count}, {"weight_sum", m.weight_sum}};
      } else {
        block[scope] = {{"undefined", true}, {"reason", "all slope weights are zero"}};
      }
    }
    models[to_string(model)] = block;
  }
  j["models"] = models;
  nlohmann::json imp = nlohmann::json::object();
  if (report.has_model(ModelTag::var_lasso)) {
    for (const auto& scope : report.scopes) {
      nlohmann::json s = nlohmann::json::object();
      for (MetricKind kind : {MetricKind::rmse, MetricKind::mae, MetricKind::bias}) {
        nlohmann::json cell = nlohmann::json::object();
        if (auto v = report.improvement(ModelTag::ar_lasso, scope, kind)) cell["VA"] = *v;
        if (auto v = report.improvement(ModelTag::naive, scope, kind)) cell["VN"] = *v;
        if (!cell.empty()) s[to_string(kind)] = cell;
      }
      if (!s.empty()) imp[scope] = s;
    }
  }
  j["improvements"] = imp;
  return j;
}

}  // namespace varlasso
