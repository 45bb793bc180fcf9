// varlasso: command-line driver for ingestion, rolling backtests, window sweeps,
// coefficient rankings and synthetic panels.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "varlasso/varlasso.hpp"
#include "varlasso/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace varlasso;

namespace {

struct Settings {
  std::string input;
  std::string out = "out";
  std::string config;
  std::vector<int> windows{4};
  int lag = 25;
  std::optional<int> ar_lag;
  std::string lambda = "cv";
  std::vector<std::string> models{"var_lasso", "ar_lasso", "naive"};
  std::string from;
  std::string to;
  std::uint64_t seed = 0;
  std::string refit_policy = "auto";
  std::string score_target = "smoothed";
  bool clamp_nonneg = false;
  bool intervals = false;
  bool freeze_lambda = false;
  bool no_adf = false;
  int threads = 1;
  std::optional<long> min_rows;
  std::string target;
  std::size_t top_n = 5;
  bool emit_svg = true;
  std::string date_col = "week_start";
  std::string id_col = "jurisdiction";
  std::string value_col = "cases";
  // simulate
  std::string preset = "sparse";
  long series = 8;
  long weeks = 160;
  std::string start = "2021-01-03";
  int shift = 6;
};

using OptionMap = std::map<std::string, CLI::Option*>;

bool given(const OptionMap& opts, const std::string& key) {
  const auto it = opts.find(key);
  return it != opts.end() && it->second->count() > 0;
}

template <class T>
void from_config(const json& cfg, const OptionMap& opts, const std::string& key, T& field) {
  if (!cfg.contains(key) || given(opts, key)) return;
  try {
    field = cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

template <class T>
void from_config(const json& cfg, const OptionMap& opts, const std::string& key, std::optional<T>& field) {
  if (!cfg.contains(key) || given(opts, key)) return;
  try {
    field = cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

// Values from the JSON config fill every setting that was not given as a flag.
void merge_config(Settings& s, const OptionMap& opts) {
  if (s.config.empty()) return;
  std::ifstream in(s.config);
  if (!in) throw UsageError("cannot open config file '" + s.config + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  if (cfg.contains("window") && !given(opts, "window")) {
    if (cfg["window"].is_array())
      s.windows = cfg["window"].get<std::vector<int>>();
    else
      s.windows = {cfg["window"].get<int>()};
  }
  from_config(cfg, opts, "windows", s.windows);
  from_config(cfg, opts, "input", s.input);
  from_config(cfg, opts, "out", s.out);
  from_config(cfg, opts, "lag", s.lag);
  from_config(cfg, opts, "ar_lag", s.ar_lag);
  from_config(cfg, opts, "lambda", s.lambda);
  from_config(cfg, opts, "models", s.models);
  from_config(cfg, opts, "from", s.from);
  from_config(cfg, opts, "to", s.to);
  from_config(cfg, opts, "seed", s.seed);
  from_config(cfg, opts, "refit_policy", s.refit_policy);
  from_config(cfg, opts, "score_target", s.score_target);
  from_config(cfg, opts, "clamp_nonneg", s.clamp_nonneg);
  from_config(cfg, opts, "intervals", s.intervals);
  from_config(cfg, opts, "freeze_lambda", s.freeze_lambda);
  from_config(cfg, opts, "threads", s.threads);
  from_config(cfg, opts, "min_rows", s.min_rows);
  from_config(cfg, opts, "target", s.target);
  from_config(cfg, opts, "top_n", s.top_n);
  from_config(cfg, opts, "svg", s.emit_svg);
  from_config(cfg, opts, "preset", s.preset);
  from_config(cfg, opts, "series", s.series);
  from_config(cfg, opts, "weeks", s.weeks);
  from_config(cfg, opts, "start", s.start);
  from_config(cfg, opts, "shift", s.shift);
}

LambdaPolicy parse_lambda(const std::string& text) {
  if (text == "cv") return LambdaPolicy::cross_validated();
  if (text.rfind("fixed:", 0) == 0) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text.substr(6), &used);
      if (used == text.size() - 6 && v >= 0.0) return LambdaPolicy::fixed(v);
    } catch (const std::exception&) {
    }
  }
  throw UsageError("--lambda must be 'cv' or 'fixed:<non-negative value>', got '" + text + "'");
}

Date parse_flag_date(const std::string& flag, const std::string& text) {
  try {
    return Date::parse(text);
  } catch (const DataError& e) {
    throw UsageError(flag + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Output helpers; every write goes through here so failures surface as data errors.

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + dir.string() + "'");
}

std::string file_safe(const std::string& id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out.empty() ? "_" : out;
}

Ingestion load_input(const Settings& s) {
  if (s.input.empty()) throw UsageError("--input is required");
  return load_panel(s.input, s.date_col, s.id_col, s.value_col);
}

BacktestPlan make_plan(const Settings& s, const TimeSeriesPanel& panel) {
  BacktestPlan plan;
  plan.models.clear();
  for (const auto& m : s.models) {
    const ModelTag tag = parse_model_tag(m);
    if (!plan.has_model(tag)) plan.models.push_back(tag);
  }
  if (plan.models.empty()) throw UsageError("--models must name at least one model");
  if (s.windows.empty()) throw UsageError("--window needs at least one value");
  for (int w : s.windows)
    if (w < 1) throw UsageError("--window values must be positive");
  plan.windows = s.windows;
  if (s.lag < 1) throw UsageError("--lag must be at least 1");
  plan.var.p = s.lag;
  plan.var.lambda = parse_lambda(s.lambda);
  if (s.min_rows) {
    if (*s.min_rows < 1) throw UsageError("--min-rows must be positive");
    plan.var.min_rows = *s.min_rows;
  }
  plan.ar_p = s.ar_lag.value_or(s.lag);
  if (plan.ar_p < 1) throw UsageError("--ar-lag must be at least 1");
  plan.ar_lambda = plan.var.lambda;

  plan.last_target = s.to.empty() ? panel.last_week() : parse_flag_date("--to", s.to);
  plan.first_target = s.from.empty() ? panel.week(panel.num_weeks() / 2) : parse_flag_date("--from", s.from);
  if (plan.last_target < plan.first_target) throw UsageError("--from must not be after --to");

  if (s.score_target == "smoothed")
    plan.score_target = ScoreTarget::smoothed;
  else if (s.score_target == "raw")
    plan.score_target = ScoreTarget::raw;
  else
    throw UsageError("--score-target must be 'smoothed' or 'raw'");

  if (s.refit_policy == "reuse")
    plan.refit_policy = RefitPolicy::reuse;
  else if (s.refit_policy == "refit")
    plan.refit_policy = RefitPolicy::refit;
  else if (s.refit_policy != "auto")
    throw UsageError("--refit-policy must be 'auto', 'reuse' or 'refit'");

  plan.clamp_nonneg = s.clamp_nonneg;
  plan.intervals = s.intervals;
  plan.freeze_lambda = s.freeze_lambda;
  plan.run_adf = !s.no_adf;
  plan.seed = s.seed;
  if (s.threads < 1) throw UsageError("--threads must be at least 1");
  plan.threads = s.threads;
  return plan;
}

json panel_summary(const Settings& s, const IngestionReport& report) {
  return {{"input", s.input}, {"ingestion", report}};
}

std::string metrics_csv(const MetricReport& report) {
  std::ostringstream os;
  write_metrics_csv(os, report);
  return os.str();
}

// One chart per jurisdiction: observed target series and each model's forecasts.
void write_jurisdiction_svgs(const fs::path& dir, const TimeSeriesPanel& panel, const BacktestPlan& plan,
                             const BacktestResult& result) {
  const auto targets = target_indices(panel, plan);
  std::vector<std::string> labels;
  for (auto t : targets) labels.push_back(panel.week(t).str());
  std::map<Date, std::size_t> slot;
  for (std::size_t i = 0; i < targets.size(); ++i) slot[panel.week(targets[i])] = i;

  const std::map<ModelTag, std::pair<std::string, std::string>> style{
      {ModelTag::var_lasso, {"VAR-Lasso", "#d62728"}},
      {ModelTag::ar_lasso, {"AR-Lasso", "#1f77b4"}},
      {ModelTag::naive, {"Naive", "#7f7f7f"}}};

  const auto& names = panel.jurisdictions();
  for (std::size_t k = 0; k < names.size(); ++k) {
    svg::LineSeries observed{"Observed (" + std::string(to_string(plan.score_target)) + ")", "#000000",
                             std::vector<std::optional<double>>(targets.size()), false};
    std::map<ModelTag, svg::LineSeries> lines;
    std::map<ModelTag, svg::Band> bands;
    for (ModelTag m : plan.models) {
      lines[m] = {style.at(m).first, style.at(m).second, std::vector<std::optional<double>>(targets.size()), true};
      bands[m] = {style.at(m).second, std::vector<std::optional<double>>(targets.size()),
                  std::vector<std::optional<double>>(targets.size())};
    }
    for (const auto& r : result.records) {
      if (r.jurisdiction != names[k]) continue;
      const std::size_t i = slot.at(r.target_week);
      observed.values[i] = r.observed;
      lines[r.model].values[i] = r.point;
      if (r.lower95 && r.upper95) {
        bands[r.model].lower[i] = r.lower95;
        bands[r.model].upper[i] = r.upper95;
      }
    }
    std::vector<svg::LineSeries> series{observed};
    std::vector<svg::Band> shaded;
    for (ModelTag m : plan.models) {
      series.push_back(lines[m]);
      if (plan.intervals) shaded.push_back(bands[m]);
    }
    const std::string title = names[k] + ": 2-week-ahead forecasts (window " + std::to_string(result.window) + ")";
    write_text(dir / ("forecast_" + file_safe(names[k]) + ".svg"), svg::line_chart(title, labels, series, shaded));
  }
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_ingest(const Settings& s) {
  const auto ing = load_input(s);
  const fs::path dir(s.out);
  ensure_dir(dir);
  json totals = json::object();
  for (int y = ing.panel.first_week().year(); y <= ing.panel.last_week().year(); ++y) {
    const auto t = annual_totals(ing.panel, y);
    json row = json::object();
    for (std::size_t k = 0; k < t.size(); ++k) row[ing.panel.jurisdictions()[k]] = t[k];
    totals[std::to_string(y)] = row;
  }
  json report = ing.report;
  report["jurisdiction_ids"] = ing.panel.jurisdictions();
  report["annual_totals"] = totals;
  write_json(dir / "ingest_report.json", report);
  std::ostringstream panel_csv;
  write_panel(panel_csv, ing.panel);
  write_text(dir / "panel.csv", panel_csv.str());
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_backtest(const Settings& s) {
  const auto ing = load_input(s);
  if (s.windows.size() != 1) throw UsageError("backtest takes exactly one --window value; use sweep for several");
  const BacktestPlan plan = make_plan(s, ing.panel);
  const fs::path dir(s.out);
  ensure_dir(dir);

  const BacktestResult result = run_backtest(ing.panel, plan);

  std::ostringstream forecasts;
  write_forecasts_csv(forecasts, result.records);
  write_text(dir / "forecasts.csv", forecasts.str());
  write_text(dir / "metrics.csv", metrics_csv(result.metrics));
  write_json(dir / "metrics.json", metrics_to_json(result.metrics));

  json fits = json::array();
  for (std::size_t i = 0; i < result.var_fits.size(); ++i) fits.push_back(fit_to_json(result.var_fits[i], ing.panel.jurisdictions()));
  write_json(dir / "var_fits.json", fits);

  std::vector<std::string> files{"forecasts.csv", "metrics.csv", "metrics.json", "var_fits.json", "manifest.json"};
  if (s.emit_svg) {
    write_jurisdiction_svgs(dir, ing.panel, plan, result);
    for (const auto& j : ing.panel.jurisdictions()) files.push_back("forecast_" + file_safe(j) + ".svg");
  }
  json manifest{{"command", "backtest"},
                {"panel", panel_summary(s, ing.report)},
                {"plan", plan_to_json(plan)},
                {"run", run_to_json(result)},
                {"outputs", files}};
  write_json(dir / "manifest.json", manifest);
  std::cout << "backtest: " << result.records.size() << " forecasts, " << result.skips.size() << " skipped, written to "
            << dir.string() << '\n';
  return 0;
}

int cmd_sweep(const Settings& s) {
  const auto ing = load_input(s);
  const BacktestPlan plan = make_plan(s, ing.panel);
  const fs::path dir(s.out);
  ensure_dir(dir);

  const SweepResult sweep = sensitivity_sweep(ing.panel, plan);

  std::ostringstream csv;
  csv << "window,model,rmse,mae,bias,n\n";
  json rows = json::array();
  for (const auto& r : sweep.rows) {
    csv << r.window << ',' << to_string(r.model) << ',';
    json row{{"window", r.window}, {"model", to_string(r.model)}};
    if (r.overall) {
      csv << detail::fmt_cell(r.overall->rmse) << ',' << detail::fmt_cell(r.overall->mae) << ','
          << detail::fmt_cell(r.overall->bias) << ',' << r.overall->count << '\n';
      row["rmse"] = r.overall->rmse;
      row["mae"] = r.overall->mae;
      row["bias"] = r.overall->bias;
      row["n"] = r.overall->count;
    } else {
      csv << ",,,\n";
      row["undefined"] = true;
    }
    rows.push_back(row);
  }
  write_text(dir / "sweep.csv", csv.str());

  json runs = json::array();
  for (const auto& r : sweep.runs) runs.push_back(run_to_json(r));
  write_json(dir / "sweep.json", {{"rows", rows}, {"runs", runs}});

  std::vector<std::string> files{"sweep.csv", "sweep.json", "manifest.json"};
  if (s.emit_svg) {
    std::vector<std::string> groups;
    for (int w : plan.windows) groups.push_back(std::to_string(w) + "-week");
    std::vector<std::string> model_names;
    for (ModelTag m : plan.models) model_names.push_back(to_string(m));
    std::vector<std::vector<std::optional<double>>> grid(plan.windows.size(),
                                                         std::vector<std::optional<double>>(plan.models.size()));
    for (const auto& r : sweep.rows) {
      const auto wi = static_cast<std::size_t>(std::find(plan.windows.begin(), plan.windows.end(), r.window) - plan.windows.begin());
      const auto mi = static_cast<std::size_t>(std::find(plan.models.begin(), plan.models.end(), r.model) - plan.models.begin());
      if (r.overall) grid[wi][mi] = r.overall->rmse;
    }
    write_text(dir / "sweep.svg", svg::grouped_bar_chart("Slope-weighted RMSE by smoothing window", groups, model_names,
                                                         {"#d62728", "#1f77b4", "#7f7f7f"}, grid, "RMSE"));
    files.push_back("sweep.svg");
  }
  write_json(dir / "manifest.json",
             {{"command", "sweep"}, {"panel", panel_summary(s, ing.report)}, {"plan", plan_to_json(plan)}, {"outputs", files}});
  std::cout << "sweep: " << sweep.rows.size() << " rows written to " << dir.string() << '\n';
  return 0;
}

int cmd_coeffs(const Settings& s) {
  const auto ing = load_input(s);
  if (s.windows.size() != 1) throw UsageError("coeffs takes exactly one --window value");
  if (s.target.empty()) throw UsageError("--target is required");
  Settings var_only = s;
  var_only.models = {"var_lasso"};
  const BacktestPlan plan = make_plan(var_only, ing.panel);
  const fs::path dir(s.out);
  ensure_dir(dir);

  const auto result = run_backtest(ing.panel, plan);
  if (result.var_fits.empty()) throw DataError("no VAR-Lasso fits were produced in the requested range");
  const auto ranks = coefficient_summary(result.var_fits, s.target, ing.panel.jurisdictions(), s.top_n);

  std::ostringstream csv;
  csv << "rank,source,lag,mean_abs,mean_signed\n";
  json rows = json::array();
  std::vector<std::string> labels;
  std::vector<double> values;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    const auto& r = ranks[i];
    csv << i + 1 << ',' << csv_quote(r.source) << ',' << r.lag << ',' << detail::fmt_cell(r.mean_abs) << ','
        << detail::fmt_cell(r.mean_signed) << '\n';
    rows.push_back({{"rank", i + 1}, {"source", r.source}, {"lag", r.lag}, {"mean_abs", r.mean_abs}, {"mean_signed", r.mean_signed}});
    labels.push_back(r.source + " lag " + std::to_string(r.lag));
    values.push_back(r.mean_abs);
  }
  write_text(dir / "coefficients.csv", csv.str());
  write_json(dir / "coefficients.json", {{"target", s.target}, {"fits", result.var_fits.size()}, {"ranks", rows}});
  std::vector<std::string> files{"coefficients.csv", "coefficients.json", "manifest.json"};
  if (s.emit_svg) {
    write_text(dir / "coefficients.svg",
               svg::bar_chart("Top VAR-Lasso coefficients for " + s.target, labels, values, "mean |coefficient|"));
    files.push_back("coefficients.svg");
  }
  write_json(dir / "manifest.json",
             {{"command", "coeffs"}, {"panel", panel_summary(s, ing.report)}, {"plan", plan_to_json(plan)}, {"target", s.target},
              {"top_n", s.top_n}, {"outputs", files}});
  std::cout << "coeffs: " << ranks.size() << " ranked coefficients for " << s.target << '\n';
  return 0;
}

int cmd_simulate(const Settings& s) {
  if (s.weeks < 10) throw UsageError("--weeks must be at least 10");
  const Date start = parse_flag_date("--start", s.start);
  Eigen::MatrixXd values;
  std::vector<std::string> names;
  if (s.preset == "sparse") {
    // Stationary sparse VAR(1) around a level of 100: own lag 0.4, each series also driven by its predecessor.
    if (s.series < 1) throw UsageError("--series must be positive");
    const Eigen::Index K = s.series;
    Eigen::MatrixXd phi = 0.4 * Eigen::MatrixXd::Identity(K, K);
    for (Eigen::Index k = 1; k < K; ++k) phi(k, k - 1) = 0.3;
    synth::SyntheticVarSpec spec;
    spec.lag_matrices = {phi};
    spec.intercept = (Eigen::MatrixXd::Identity(K, K) - phi) * Eigen::VectorXd::Constant(K, 100.0);
    spec.noise_cov = 100.0 * Eigen::MatrixXd::Identity(K, K);
    spec.n = s.weeks;
    spec.seed = s.seed;
    values = synth::generate(spec);
    names = synth::series_names(K);
  } else if (s.preset == "shifted") {
    if (s.shift < 1) throw UsageError("--shift must be positive");
    values = synth::shifted_pair(s.weeks, s.shift, 0.8, 2.0, 0.5, 20.0, s.seed);
    names = {"A", "B"};
  } else if (s.preset == "noise") {
    if (s.series < 1) throw UsageError("--series must be positive");
    const Eigen::Index K = s.series;
    synth::SyntheticVarSpec spec;
    spec.lag_matrices = {Eigen::MatrixXd::Zero(K, K)};
    spec.intercept = Eigen::VectorXd::Constant(K, 100.0);
    spec.noise_cov = 100.0 * Eigen::MatrixXd::Identity(K, K);
    spec.n = s.weeks;
    spec.seed = s.seed;
    spec.burn_in = 0;
    values = synth::generate(spec);
    names = synth::series_names(K);
  } else {
    throw UsageError("--preset must be 'sparse', 'shifted' or 'noise'");
  }
  const auto panel = synth::to_count_panel(values, names, start);
  const fs::path dir(s.out);
  ensure_dir(dir);
  std::ostringstream csv;
  write_panel(csv, panel);
  write_text(dir / "panel.csv", csv.str());
  write_json(dir / "manifest.json", {{"command", "simulate"},
                                     {"preset", s.preset},
                                     {"series", panel.num_series()},
                                     {"weeks", panel.num_weeks()},
                                     {"start", start.str()},
                                     {"seed", s.seed},
                                     {"outputs", {"panel.csv", "manifest.json"}}});
  std::cout << "simulate: " << panel.num_series() << " series x " << panel.num_weeks() << " weeks written to "
            << (dir / "panel.csv").string() << '\n';
  return 0;
}

void report_error(const std::string& out_dir, ErrorKind kind, const std::string& message) {
  const json err{{"error", {{"kind", to_string(kind)}, {"exit_code", static_cast<int>(kind)}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
  if (out_dir.empty()) return;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  std::ofstream f(fs::path(out_dir) / "error.json");
  if (f) f << err.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse VAR-Lasso forecasting of weekly case counts"};
  app.require_subcommand(1);
  Settings s;
  std::map<std::string, OptionMap> options;

  auto add_input = [&](CLI::App* sub, OptionMap& o) {
    o["input"] = sub->add_option("--input", s.input, "Panel CSV (week_start, jurisdiction, cases)");
    o["out"] = sub->add_option("--out", s.out, "Output directory");
    o["config"] = sub->add_option("--config", s.config, "JSON config; flags win on conflict");
    sub->add_option("--date-col", s.date_col, "Date column name");
    sub->add_option("--id-col", s.id_col, "Jurisdiction column name");
    sub->add_option("--value-col", s.value_col, "Count column name");
  };
  auto add_model = [&](CLI::App* sub, OptionMap& o) {
    o["window"] = sub->add_option("--window", s.windows, "Smoothing window(s) in weeks")->delimiter(',');
    o["lag"] = sub->add_option("--lag", s.lag, "VAR order p");
    o["ar_lag"] = sub->add_option("--ar-lag", s.ar_lag, "AR order (defaults to --lag)");
    o["lambda"] = sub->add_option("--lambda", s.lambda, "Penalty policy: cv or fixed:<value>");
    o["from"] = sub->add_option("--from", s.from, "First target week (YYYY-MM-DD)");
    o["to"] = sub->add_option("--to", s.to, "Last target week (YYYY-MM-DD)");
    o["seed"] = sub->add_option("--seed", s.seed, "Seed recorded in the manifest");
    o["refit_policy"] = sub->add_option("--refit-policy", s.refit_policy, "auto, reuse or refit");
    o["score_target"] = sub->add_option("--score-target", s.score_target, "smoothed or raw");
    o["clamp_nonneg"] = sub->add_flag("--clamp-nonneg", s.clamp_nonneg, "Clamp forecasts at zero");
    o["intervals"] = sub->add_flag("--intervals", s.intervals, "Emit 95% prediction intervals");
    o["freeze_lambda"] = sub->add_flag("--freeze-lambda", s.freeze_lambda, "Reuse the first week's penalty");
    sub->add_flag("--no-adf", s.no_adf, "Skip the ADF diagnostics");
    o["threads"] = sub->add_option("--threads", s.threads, "Worker threads for the weekly fits");
    o["min_rows"] = sub->add_option("--min-rows", s.min_rows, "Override the minimum design rows for a VAR fit");
    o["svg"] = sub->add_flag("--svg,!--no-svg", s.emit_svg, "Emit SVG charts (default on)");
  };

  auto* ingest = app.add_subcommand("ingest", "Validate a panel CSV and report annual totals");
  add_input(ingest, options["ingest"]);

  auto* backtest = app.add_subcommand("backtest", "Rolling-origin 2-week-ahead backtest");
  add_input(backtest, options["backtest"]);
  add_model(backtest, options["backtest"]);
  options["backtest"]["models"] = backtest->add_option("--models", s.models, "Models to run")->delimiter(',');

  auto* sweep = app.add_subcommand("sweep", "Smoothing-window sensitivity sweep");
  add_input(sweep, options["sweep"]);
  add_model(sweep, options["sweep"]);
  options["sweep"]["models"] = sweep->add_option("--models", s.models, "Models to run")->delimiter(',');

  auto* coeffs = app.add_subcommand("coeffs", "Rank VAR-Lasso coefficients for one jurisdiction");
  add_input(coeffs, options["coeffs"]);
  add_model(coeffs, options["coeffs"]);
  options["coeffs"]["target"] = coeffs->add_option("--target", s.target, "Target jurisdiction");
  options["coeffs"]["top_n"] = coeffs->add_option("--top-n", s.top_n, "Number of coefficients to report");

  auto* simulate = app.add_subcommand("simulate", "Write a synthetic panel CSV");
  auto& so = options["simulate"];
  so["out"] = simulate->add_option("--out", s.out, "Output directory");
  so["config"] = simulate->add_option("--config", s.config, "JSON config; flags win on conflict");
  so["preset"] = simulate->add_option("--preset", s.preset, "sparse, shifted or noise");
  so["series"] = simulate->add_option("--series", s.series, "Number of series");
  so["weeks"] = simulate->add_option("--weeks", s.weeks, "Number of weeks");
  so["start"] = simulate->add_option("--start", s.start, "First week (YYYY-MM-DD)");
  so["seed"] = simulate->add_option("--seed", s.seed, "Random seed");
  so["shift"] = simulate->add_option("--shift", s.shift, "Lead of series A over B (shifted preset)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error({}, ErrorKind::usage, e.what());
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    for (auto* sub : app.get_subcommands()) {
      const auto& opts = options[sub->get_name()];
      merge_config(s, opts);
      if (sub == ingest) return cmd_ingest(s);
      if (sub == backtest) return cmd_backtest(s);
      if (sub == sweep) return cmd_sweep(s);
      if (sub == coeffs) return cmd_coeffs(s);
      if (sub == simulate) return cmd_simulate(s);
    }
  } catch (const Error& e) {
    report_error(s.out, e.kind(), e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    report_error(s.out, ErrorKind::numerical, e.what());
    return static_cast<int>(ErrorKind::numerical);
  }
  return 0;
}
