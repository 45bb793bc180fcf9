#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "varlasso/benchmarks.hpp"
#include "varlasso/error.hpp"
#include "varlasso/evaluate.hpp"
#include "varlasso/panel.hpp"
#include "varlasso/preprocess.hpp"
#include "varlasso/varmodel.hpp"

namespace varlasso {

enum class ScoreTarget { smoothed, raw };

inline const char* to_string(ScoreTarget s) { return s == ScoreTarget::smoothed ? "smoothed" : "raw"; }

struct BacktestPlan {
  static constexpr int horizon = 2;

  Date first_target;
  Date last_target;
  std::vector<ModelTag> models{ModelTag::var_lasso, ModelTag::ar_lasso, ModelTag::naive};
  std::vector<int> windows{4};

  VarSpec var;
  int ar_p = 25;
  LambdaPolicy ar_lambda;

  ScoreTarget score_target = ScoreTarget::smoothed;
  bool clamp_nonneg = false;
  std::optional<RefitPolicy> refit_policy;  // unset: refit when intervals are requested, reuse otherwise
  bool intervals = false;
  bool freeze_lambda = false;  // keep the first week's penalty for every later week
  bool run_adf = true;
  std::uint64_t seed = 0;
  int threads = 1;

  RefitPolicy effective_refit() const { return refit_policy.value_or(intervals ? RefitPolicy::refit : RefitPolicy::reuse); }
  bool has_model(ModelTag m) const { return std::find(models.begin(), models.end(), m) != models.end(); }
};

/// One scored forecast row of the output CSV.
struct ForecastRecord {
  ModelTag model;
  std::string jurisdiction;
  Date target_week;
  double point = 0.0;
  std::optional<double> lower95;
  std::optional<double> upper95;
  double observed = 0.0;
  double slope_weight = 0.0;
};

struct SkipEntry {
  Date target_week;
  std::string model;
  std::string reason;
};

struct WeekLog {
  Date target_week;
  Date cutoff_week;
  std::optional<double> var_lambda;
  std::optional<int> var_iterations;
  std::optional<bool> var_converged;
  std::vector<double> ar_lambdas;
  std::vector<std::optional<AdfResult>> adf_differenced;
};

struct BacktestResult {
  int window = 4;
  RefitPolicy refit = RefitPolicy::reuse;
  std::vector<ForecastSet> forecast_sets;  // week order, then plan model order
  std::vector<ForecastRecord> records;
  std::vector<WeekLog> weeks;
  std::vector<SkipEntry> skips;
  std::vector<VarLassoFit> var_fits;  // one per produced VAR forecast, week order
  MetricReport metrics;
};

/// Grid indices of the target weeks in the plan.
inline std::vector<Eigen::Index> target_indices(const TimeSeriesPanel& panel, const BacktestPlan& plan) {
  if (plan.last_target < plan.first_target) throw UsageError("last target week precedes the first");
  const Eigen::Index a = panel.index_of(plan.first_target);
  const Eigen::Index b = panel.index_of(plan.last_target);
  std::vector<Eigen::Index> out;
  for (Eigen::Index t = a; t <= b; ++t) out.push_back(t);
  return out;
}

namespace detail {

struct FrozenLambdas {
  std::optional<double> var;
  std::vector<std::optional<double>> ar;
};

struct WeekOutput {
  WeekLog log;
  std::vector<ForecastSet> sets;
  std::vector<SkipEntry> skips;
  std::optional<VarLassoFit> var_fit;
};

inline double clamp_if(double v, bool clamp) { return clamp ? std::max(v, 0.0) : v; }

inline void clamp_set(ForecastSet& set, bool clamp) {
  if (!clamp) return;
  for (auto& e : set.entries) {
    e.point = std::max(e.point, 0.0);
    if (e.lower95) e.lower95 = std::max(*e.lower95, 0.0);
    if (e.upper95) e.upper95 = std::max(*e.upper95, 0.0);
  }
}

// Everything for one target week. Reads only weeks <= target - 2.
inline WeekOutput run_week(const TimeSeriesPanel& panel, Eigen::Index target, int window, const BacktestPlan& plan,
                           const FrozenLambdas& frozen) {
  WeekOutput out;
  const Date target_week = panel.week(target);
  out.log.target_week = target_week;
  const Eigen::Index cutoff = target - BacktestPlan::horizon;
  const auto skip_all = [&](const std::string& reason) {
    for (ModelTag m : plan.models) out.skips.push_back({target_week, to_string(m), reason});
  };
  if (cutoff < 1) {
    out.log.cutoff_week = panel.first_week();
    skip_all("no training data before " + target_week.str());
    return out;
  }
  out.log.cutoff_week = panel.week(cutoff);

  const Eigen::MatrixXd train = panel.as_real().leftCols(cutoff + 1);
  const PreprocessedPanel pre = preprocess(train, SmoothingConfig{window}, plan.run_adf);
  for (const auto& r : pre.adf_reports) out.log.adf_differenced.push_back(r.differenced);
  const auto& names = panel.jurisdictions();
  const Eigen::Index K = panel.num_series();
  const Eigen::Index n = pre.differenced.cols();

  for (ModelTag model : plan.models) {
    try {
      switch (model) {
        case ModelTag::naive: {
          if (pre.smoothed.cols() < 4) throw DataError("naive forecast needs 4 weeks of history");
          Eigen::VectorXd pts(K);
          for (Eigen::Index k = 0; k < K; ++k) pts(k) = naive_forecast(pre.smoothed.row(k).transpose());
          auto set = make_forecast_set(ModelTag::naive, names, target_week, pts);
          clamp_set(set, plan.clamp_nonneg);
          out.sets.push_back(std::move(set));
          break;
        }
        case ModelTag::var_lasso: {
          VarSpec spec = plan.var;
          if (frozen.var) spec.lambda = LambdaPolicy::fixed(*frozen.var);
          if (n - spec.p < spec.required_rows(K))
            throw DataError("insufficient history for VAR(" + std::to_string(spec.p) + "): " +
                            std::to_string(std::max<Eigen::Index>(n - spec.p, 0)) + " usable rows, need " +
                            std::to_string(spec.required_rows(K)));
          VarLassoFit fit;
          TwoStepForecast fc;
          Eigen::VectorXd v1, v2;
          if (plan.effective_refit() == RefitPolicy::refit) {
            auto r = forecast_two_step_refit(pre.differenced, spec, pre.anchors);
            fc = r.forecast;
            v1 = r.first.residual_cov.diagonal();
            v2 = r.second.residual_cov.diagonal();
            fit = std::move(r.first);
          } else {
            fit = fit_var_lasso(pre.differenced, spec);
            fc = forecast_two_step(fit, pre.differenced.rightCols(spec.p), pre.anchors);
            v1 = v2 = fit.residual_cov.diagonal();
          }
          fit.train_window = std::pair{panel.first_week(), panel.week(cutoff)};
          auto set = make_forecast_set(ModelTag::var_lasso, names, target_week, fc.level2);
          if (plan.intervals) set = prediction_interval_two_step(std::move(set), v1, v2);
          clamp_set(set, plan.clamp_nonneg);
          out.log.var_lambda = fit.lambda;
          out.log.var_iterations = fit.diagnostics.iterations;
          out.log.var_converged = fit.diagnostics.converged;
          out.var_fit = std::move(fit);
          out.sets.push_back(std::move(set));
          break;
        }
        case ModelTag::ar_lasso: {
          Eigen::VectorXd pts(K), v1(K), v2(K);
          for (Eigen::Index k = 0; k < K; ++k) {
            LambdaPolicy policy = plan.ar_lambda;
            if (static_cast<std::size_t>(k) < frozen.ar.size() && frozen.ar[static_cast<std::size_t>(k)])
              policy = LambdaPolicy::fixed(*frozen.ar[static_cast<std::size_t>(k)]);
            const Eigen::VectorXd diffs = pre.differenced.row(k).transpose();
            const auto fit = fit_ar_lasso(diffs, plan.ar_p, policy, plan.var.solver, names[static_cast<std::size_t>(k)]);
            pts(k) = ar_forecast_two_step(fit, diffs.tail(plan.ar_p), pre.anchors(k)).second;
            const auto var = ar_two_step_interval(fit);
            v1(k) = var.step1;
            v2(k) = var.step2;
            out.log.ar_lambdas.push_back(fit.lambda);
          }
          auto set = make_forecast_set(ModelTag::ar_lasso, names, target_week, pts);
          if (plan.intervals) set = prediction_interval_two_step(std::move(set), v1, v2);
          clamp_set(set, plan.clamp_nonneg);
          out.sets.push_back(std::move(set));
          break;
        }
      }
    } catch (const DataError& e) {
      out.skips.push_back({target_week, to_string(model), e.what()});
    }
  }
  return out;
}

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Rolling-origin backtest for one smoothing window. Every target week is refit from
/// scratch on data up to two weeks before it; forecasts are scored against the panel.
inline BacktestResult run_backtest(const TimeSeriesPanel& panel, const BacktestPlan& plan, int window) {
  if (plan.models.empty()) throw UsageError("backtest plan lists no models");
  if (window < 1) throw UsageError("smoothing window must be >= 1");
  const auto targets = target_indices(panel, plan);

  BacktestResult result;
  result.window = window;
  result.refit = plan.effective_refit();

  detail::FrozenLambdas frozen;
  std::size_t start = 0;
  std::vector<detail::WeekOutput> outputs(targets.size());
  if (plan.freeze_lambda) {
    // The first week that yields a fit fixes the penalties for the rest.
    for (; start < targets.size(); ++start) {
      outputs[start] = detail::run_week(panel, targets[start], window, plan, frozen);
      const auto& o = outputs[start];
      if (o.log.var_lambda) frozen.var = o.log.var_lambda;
      if (!o.log.ar_lambdas.empty()) frozen.ar.assign(o.log.ar_lambdas.begin(), o.log.ar_lambdas.end());
      const bool var_done = !plan.has_model(ModelTag::var_lasso) || frozen.var;
      const bool ar_done = !plan.has_model(ModelTag::ar_lasso) || !frozen.ar.empty();
      if (var_done && ar_done) {
        ++start;
        break;
      }
    }
  }
  const std::size_t remaining = targets.size() - std::min(start, targets.size());
  detail::parallel_for(remaining, plan.threads, [&](std::size_t i) {
    outputs[start + i] = detail::run_week(panel, targets[start + i], window, plan, frozen);
  });

  const Eigen::MatrixXd levels = panel.as_real();
  Eigen::MatrixXd smoothed(levels.rows(), levels.cols());
  for (Eigen::Index k = 0; k < levels.rows(); ++k)
    smoothed.row(k) = smooth_centered_ma(levels.row(k).transpose(), window).transpose();

  std::map<ModelTag, std::vector<ScoredForecast>> scored;
  for (ModelTag m : plan.models) scored[m];
  for (std::size_t w = 0; w < targets.size(); ++w) {
    auto& o = outputs[w];
    const Eigen::Index t = targets[w];
    result.weeks.push_back(o.log);
    result.skips.insert(result.skips.end(), o.skips.begin(), o.skips.end());
    if (o.var_fit) result.var_fits.push_back(std::move(*o.var_fit));
    for (auto& set : o.sets) {
      for (std::size_t k = 0; k < set.entries.size(); ++k) {
        const auto& e = set.entries[k];
        const auto ki = static_cast<Eigen::Index>(k);
        const double observed = plan.score_target == ScoreTarget::smoothed ? smoothed(ki, t) : levels(ki, t);
        const double weight = t >= 1 ? std::max(smoothed(ki, t) - smoothed(ki, t - 1), 0.0) : 0.0;
        result.records.push_back({set.model, e.jurisdiction, e.target_week, e.point, e.lower95, e.upper95, observed, weight});
        scored[set.model].push_back({e.jurisdiction, e.target_week, observed, e.point, weight});
      }
      result.forecast_sets.push_back(std::move(set));
    }
  }
  result.metrics = build_metric_report(scored, panel.jurisdictions());
  return result;
}

inline BacktestResult run_backtest(const TimeSeriesPanel& panel, const BacktestPlan& plan) {
  if (plan.windows.empty()) throw UsageError("backtest plan lists no smoothing window");
  return run_backtest(panel, plan, plan.windows.front());
}

struct SweepRow {
  int window = 0;
  ModelTag model = ModelTag::var_lasso;
  std::optional<SlopeMetrics> overall;
};

struct SweepResult {
  std::vector<BacktestResult> runs;  // one per window, plan order
  std::vector<SweepRow> rows;        // window-major, then plan model order
};

/// One backtest per smoothing window with everything else held fixed.
inline SweepResult sensitivity_sweep(const TimeSeriesPanel& panel, const BacktestPlan& plan) {
  if (plan.windows.empty()) throw UsageError("sweep needs at least one smoothing window");
  SweepResult out;
  for (int w : plan.windows) {
    out.runs.push_back(run_backtest(panel, plan, w));
    for (ModelTag m : plan.models) out.rows.push_back({w, m, out.runs.back().metrics.get(m, kAllScope)});
  }
  return out;
}

struct CoefficientRank {
  std::string source;
  Eigen::Index source_index = 0;
  int lag = 0;
  double mean_abs = 0.0;
  double mean_signed = 0.0;
};

/// Mean |Phi_lag(target, source)| over fits, ranked descending. Entries at or below
/// `threshold` are dropped; at most top_n rows are kept (0 keeps all).
inline std::vector<CoefficientRank> coefficient_summary(const std::vector<VarLassoFit>& fits, Eigen::Index target,
                                                        const std::vector<std::string>& names, std::size_t top_n = 5,
                                                        double threshold = 0.0) {
  if (fits.empty()) throw DataError("coefficient summary needs at least one fit");
  const Eigen::Index K = fits.front().num_series();
  const int p = fits.front().order();
  if (target < 0 || target >= K) throw DataError("unknown target jurisdiction index " + std::to_string(target));
  if (static_cast<Eigen::Index>(names.size()) != K) throw DataError("need one name per series");
  for (const auto& f : fits)
    if (f.num_series() != K || f.order() != p) throw DataError("fits disagree on K or p");

  std::vector<CoefficientRank> ranks;
  const double count = static_cast<double>(fits.size());
  for (int lag = 1; lag <= p; ++lag) {
    for (Eigen::Index src = 0; src < K; ++src) {
      double sum_abs = 0.0, sum = 0.0;
      for (const auto& f : fits) {
        const double v = f.lag_matrices[static_cast<std::size_t>(lag - 1)](target, src);
        sum_abs += std::abs(v);
        sum += v;
      }
      if (sum_abs / count > threshold)
        ranks.push_back({names[static_cast<std::size_t>(src)], src, lag, sum_abs / count, sum / count});
    }
  }
  std::stable_sort(ranks.begin(), ranks.end(), [](const CoefficientRank& a, const CoefficientRank& b) { return a.mean_abs > b.mean_abs; });
  if (top_n > 0 && ranks.size() > top_n) ranks.resize(top_n);
  return ranks;
}

inline std::vector<CoefficientRank> coefficient_summary(const std::vector<VarLassoFit>& fits, const std::string& target,
                                                        const std::vector<std::string>& names, std::size_t top_n = 5,
                                                        double threshold = 0.0) {
  const auto it = std::find(names.begin(), names.end(), target);
  if (it == names.end()) throw DataError("unknown jurisdiction '" + target + "'");
  return coefficient_summary(fits, it - names.begin(), names, top_n, threshold);
}

// ---------------------------------------------------------------------------
// Emission

inline void write_forecasts_csv(std::ostream& out, const std::vector<ForecastRecord>& records) {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  out << "model,jurisdiction,target_week,point,lower95,upper95,observed\n";
  for (const auto& r : records) {
    out << to_string(r.model) << ',' << csv_quote(r.jurisdiction) << ',' << r.target_week.str() << ',' << num(r.point) << ','
        << (r.lower95 ? num(*r.lower95) : "") << ',' << (r.upper95 ? num(*r.upper95) : "") << ',' << num(r.observed) << '\n';
  }
}

inline nlohmann::json plan_to_json(const BacktestPlan& plan) {
  nlohmann::json models = nlohmann::json::array();
  for (ModelTag m : plan.models) models.push_back(to_string(m));
  return {{"first_target", plan.first_target.str()},
          {"last_target", plan.last_target.str()},
          {"horizon", BacktestPlan::horizon},
          {"models", models},
          {"windows", plan.windows},
          {"var", {{"p", plan.var.p}, {"lambda", plan.var.lambda.describe()}, {"per_equation_lambda", plan.var.per_equation_lambda},
                   {"n_lambda", plan.var.lambda.n_lambda}, {"ratio", plan.var.lambda.ratio}, {"n_folds", plan.var.lambda.n_folds},
                   {"tol", plan.var.solver.tol}, {"max_iter", plan.var.solver.max_iter}}},
          {"ar", {{"p", plan.ar_p}, {"lambda", plan.ar_lambda.describe()}}},
          {"score_target", to_string(plan.score_target)},
          {"clamp_nonneg", plan.clamp_nonneg},
          {"refit_policy", to_string(plan.effective_refit())},
          {"intervals", plan.intervals},
          {"freeze_lambda", plan.freeze_lambda},
          {"seed", plan.seed}};
}

inline nlohmann::json run_to_json(const BacktestResult& r) {
  nlohmann::json weeks = nlohmann::json::array();
  for (const auto& w : r.weeks) {
    nlohmann::json e{{"target_week", w.target_week.str()}, {"cutoff_week", w.cutoff_week.str()}};
    if (w.var_lambda) e["var"] = {{"lambda", *w.var_lambda}, {"sweeps", *w.var_iterations}, {"converged", *w.var_converged}};
    if (!w.ar_lambdas.empty()) e["ar_lambdas"] = w.ar_lambdas;
    nlohmann::json adf = nlohmann::json::array();
    for (const auto& a : w.adf_differenced) adf.push_back(a ? nlohmann::json(*a) : nlohmann::json(nullptr));
    e["adf_differenced"] = adf;
    weeks.push_back(e);
  }
  nlohmann::json skips = nlohmann::json::array();
  for (const auto& s : r.skips) skips.push_back({{"target_week", s.target_week.str()}, {"model", s.model}, {"reason", s.reason}});
  return {{"window", r.window}, {"refit_policy", to_string(r.refit)}, {"weeks", weeks}, {"skipped", skips}};
}

}  // namespace varlasso
