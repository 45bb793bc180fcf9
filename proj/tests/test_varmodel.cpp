#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "varlasso/synth.hpp"
#include "varlasso/varmodel.hpp"

using namespace varlasso;

namespace {

Eigen::MatrixXd sparse_var_sample(std::uint64_t seed, Eigen::Index n = 400, double sigma = 0.1) {
  synth::SyntheticVarSpec spec;
  spec.intercept = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd phi(2, 2);
  phi << 0.5, 0.0, 0.3, 0.4;
  spec.lag_matrices = {phi};
  spec.noise_cov = sigma * sigma * Eigen::MatrixXd::Identity(2, 2);
  spec.n = n;
  spec.seed = seed;
  return synth::generate(spec);
}

VarLassoFit manual_fit(Eigen::VectorXd c, std::vector<Eigen::MatrixXd> lags) {
  VarLassoFit fit;
  fit.intercept = std::move(c);
  fit.lag_matrices = std::move(lags);
  fit.residual_cov = Eigen::MatrixXd::Zero(fit.intercept.size(), fit.intercept.size());
  return fit;
}

}  // namespace

TEST(Design, UnrollsSingleSeries) {
  Eigen::MatrixXd d(1, 3);
  d << 1, 2, 4;
  const auto des = build_design(d, 1);
  Eigen::MatrixXd X(2, 2), Y(2, 1);
  X << 1, 1, 1, 2;
  Y << 2, 4;
  EXPECT_EQ(des.X, X);
  EXPECT_EQ(des.Y, Y);
}

TEST(Design, ShapesAndIntercept) {
  const Eigen::MatrixXd d = Eigen::MatrixXd::Random(2, 5);
  const auto des = build_design(d, 2);
  EXPECT_EQ(des.X.rows(), 3);
  EXPECT_EQ(des.X.cols(), 5);
  EXPECT_EQ(des.Y.rows(), 3);
  EXPECT_EQ(des.Y.cols(), 2);
  EXPECT_TRUE((des.X.col(0).array() == 1.0).all());
  // Column for series 1 at lag 2 in the first row is d(1, 0).
  EXPECT_EQ(des.X(0, design_column(2, 2, 1)), d(1, 0));
  EXPECT_EQ(des.X(0, design_column(2, 1, 0)), d(0, 1));
  EXPECT_THROW(build_design(d, 5), DataError);
}

TEST(Design, CoefficientReshapeRoundTrip) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  for (int K = 1; K <= 4; ++K) {
    for (int p = 1; p <= 3; ++p) {
      Eigen::MatrixXd B(1 + K * p, K);
      for (Eigen::Index i = 0; i < B.size(); ++i) B(i) = z(rng);
      VarLassoFit fit;
      set_coefficients(fit, B, K, p);
      EXPECT_EQ(coefficient_matrix(fit), B);
    }
  }
}

TEST(FitVar, NullModelIsMostlyZero) {
  std::size_t zeros = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    synth::SyntheticVarSpec spec;
    spec.intercept = Eigen::VectorXd::Zero(2);
    spec.lag_matrices = {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)};
    spec.noise_cov = Eigen::MatrixXd::Identity(2, 2);
    spec.n = 200;
    spec.seed = 100 + seed;
    VarSpec vs;
    vs.p = 2;
    const auto fit = fit_var_lasso(synth::generate(spec), vs);
    for (const auto& m : fit.lag_matrices) {
      zeros += static_cast<std::size_t>((m.array() == 0.0).count());
      total += static_cast<std::size_t>(m.size());
    }
  }
  EXPECT_GE(static_cast<double>(zeros) / static_cast<double>(total), 0.9);
}

TEST(FitVar, RecoversSparseSupport) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    VarSpec vs;
    vs.p = 1;
    const auto fit = fit_var_lasso(sparse_var_sample(seed + 1), vs);
    const auto& phi = fit.lag_matrices[0];
    hits += phi(0, 0) != 0.0 && phi(0, 1) == 0.0 && phi(1, 0) != 0.0 && phi(1, 1) != 0.0;
  }
  EXPECT_GE(hits, 27);
}

TEST(FitVar, LambdaMaxGivesInterceptOnly) {
  const Eigen::MatrixXd d = sparse_var_sample(5, 120, 1.0);
  VarSpec vs;
  vs.p = 3;
  vs.lambda = LambdaPolicy::fixed(var_lambda_max(d, 3));
  const auto fit = fit_var_lasso(d, vs);
  for (const auto& m : fit.lag_matrices) EXPECT_TRUE((m.array() == 0.0).all());
  const Eigen::VectorXd means = d.rightCols(d.cols() - 3).rowwise().mean();
  EXPECT_LT((fit.intercept - means).cwiseAbs().maxCoeff(), 1e-10);
  const auto fc = forecast_two_step(fit, d.rightCols(3), Eigen::VectorXd::Zero(2));
  EXPECT_LT((fc.step1 - fit.intercept).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((fc.step2 - fit.intercept).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitVar, ResidualCovarianceUsesRowCount) {
  const Eigen::MatrixXd d = sparse_var_sample(6, 100, 1.0);
  VarSpec vs;
  vs.p = 1;
  vs.lambda = LambdaPolicy::fixed(0.0);
  const auto fit = fit_var_lasso(d, vs);
  const auto des = build_design(d, 1);
  const Eigen::MatrixXd R = des.Y - des.X * coefficient_matrix(fit);
  EXPECT_LT((fit.residual_cov - R.transpose() * R / 99.0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitVar, PerEquationLambda) {
  VarSpec vs;
  vs.p = 1;
  vs.per_equation_lambda = true;
  const auto fit = fit_var_lasso(sparse_var_sample(7), vs);
  ASSERT_EQ(fit.equation_lambdas.size(), 2u);
  EXPECT_DOUBLE_EQ(fit.lambda, 0.5 * (fit.equation_lambdas[0] + fit.equation_lambdas[1]));
}

TEST(FitVar, RejectsShortOrBadInput) {
  VarSpec vs;
  vs.p = 25;
  EXPECT_THROW(fit_var_lasso(Eigen::MatrixXd::Random(3, 40), vs), DataError);
  vs.min_rows = 5;
  EXPECT_NO_THROW(fit_var_lasso(Eigen::MatrixXd::Random(3, 40), vs));
  Eigen::MatrixXd bad = Eigen::MatrixXd::Random(2, 80);
  bad(1, 7) = std::numeric_limits<double>::quiet_NaN();
  vs.p = 2;
  EXPECT_THROW(fit_var_lasso(bad, vs), NumericalError);
}

TEST(Forecast, InterceptOnlyRecursion) {
  const auto fit = manual_fit(Eigen::VectorXd::Constant(1, 0.5), {Eigen::MatrixXd::Zero(1, 1)});
  const auto fc = forecast_two_step(fit, Eigen::MatrixXd::Constant(1, 1, 3.0), Eigen::VectorXd::Constant(1, 10.0));
  EXPECT_DOUBLE_EQ(fc.level2(0), 11.0);
  EXPECT_DOUBLE_EQ(fc.level1(0), 10.5);
}

TEST(Forecast, ArOneRecursion) {
  const auto fit = manual_fit(Eigen::VectorXd::Zero(1), {Eigen::MatrixXd::Constant(1, 1, 0.5)});
  const auto fc = forecast_two_step(fit, Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Constant(1, 20.0));
  EXPECT_DOUBLE_EQ(fc.step1(0), 1.0);
  EXPECT_DOUBLE_EQ(fc.step2(0), 0.5);
  EXPECT_DOUBLE_EQ(fc.level2(0), 21.5);
}

TEST(Forecast, ZeroModelReturnsAnchor) {
  const auto fit = manual_fit(Eigen::VectorXd::Zero(3), {Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3)});
  const Eigen::VectorXd anchors = Eigen::Vector3d(4, 5, 6);
  EXPECT_EQ(forecast_two_step(fit, Eigen::MatrixXd::Random(3, 2), anchors).level2, anchors);
}

TEST(Forecast, UsesNewestColumnAsLagOne) {
  Eigen::MatrixXd phi2(1, 1);
  phi2 << 1.0;
  const auto fit = manual_fit(Eigen::VectorXd::Zero(1), {Eigen::MatrixXd::Zero(1, 1), phi2});
  Eigen::MatrixXd hist(1, 3);
  hist << 7, 3, 9;  // oldest to newest
  EXPECT_DOUBLE_EQ(predict_one_step(fit, hist)(0), 3.0);
}

TEST(Forecast, EquivariantToLevelShift) {
  // Integer levels keep the shifted differences exact.
  const Eigen::MatrixXd levels =
      (10.0 * sparse_var_sample(8, 150, 1.0).array() + 50.0).unaryExpr([](double v) { return std::round(v); }).matrix();
  auto run = [](const Eigen::MatrixXd& lv) {
    const Eigen::MatrixXd diffs = lv.rightCols(lv.cols() - 1) - lv.leftCols(lv.cols() - 1);
    VarSpec vs;
    vs.p = 2;
    const auto fit = fit_var_lasso(diffs, vs);
    return forecast_two_step(fit, diffs.rightCols(2), lv.col(lv.cols() - 1));
  };
  const auto base = run(levels);
  Eigen::MatrixXd shifted = levels;
  shifted.row(1).array() += 12.25;
  const auto moved = run(shifted);
  EXPECT_EQ(base.step1, moved.step1);
  EXPECT_EQ(base.step2, moved.step2);
  EXPECT_EQ(moved.level2(0), base.level2(0));
  EXPECT_NEAR(moved.level2(1), base.level2(1) + 12.25, 1e-9);
}

TEST(Forecast, ZeroPenaltyMatchesLeastSquaresAr) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<double> levels{100.0};
    double prev = 0.0;
    for (int t = 0; t < 150; ++t) {
      prev = 0.4 * prev + z(rng);
      levels.push_back(levels.back() + prev);
    }
    for (int p : {1, 3}) {
      Eigen::MatrixXd diffs(1, 150);
      for (int t = 0; t < 150; ++t) diffs(0, t) = levels[static_cast<std::size_t>(t + 1)] - levels[static_cast<std::size_t>(t)];
      VarSpec vs;
      vs.p = p;
      vs.lambda = LambdaPolicy::fixed(0.0);
      vs.solver.tol = 1e-13;
      vs.solver.max_iter = 1000000;
      const auto fit = fit_var_lasso(diffs, vs);
      const auto fc = forecast_two_step(fit, diffs.rightCols(p), Eigen::VectorXd::Constant(1, levels.back()));
      const auto ref = oracle::ols_ar_two_step(levels, p);
      EXPECT_NEAR(fc.level1(0), ref.first, 1e-6);
      EXPECT_NEAR(fc.level2(0), ref.second, 1e-6);
    }
  }
}

TEST(Forecast, RefitPathSharesStepOne) {
  const Eigen::MatrixXd d = sparse_var_sample(9, 200, 1.0);
  VarSpec vs;
  vs.p = 2;
  const auto refit = forecast_two_step_refit(d, vs, Eigen::VectorXd::Zero(2));
  const auto reuse = forecast_two_step(fit_var_lasso(d, vs), d.rightCols(2), Eigen::VectorXd::Zero(2));
  EXPECT_EQ(refit.forecast.step1, reuse.step1);
  EXPECT_EQ(refit.second.diagnostics.rows, refit.first.diagnostics.rows + 1);
}

TEST(Intervals, Examples) {
  const auto set = make_forecast_set(ModelTag::var_lasso, {"A"}, Date::parse("2024-01-07"), Eigen::VectorXd::Constant(1, 10.0));
  const auto zero = prediction_interval_two_step(set, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1));
  EXPECT_EQ(*zero.entries[0].lower95, 10.0);
  EXPECT_EQ(*zero.entries[0].upper95, 10.0);
  const auto one = prediction_interval_two_step(set, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1));
  EXPECT_DOUBLE_EQ(*one.entries[0].lower95, 10.0 - 1.96 * std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(*one.entries[0].upper95, 10.0 + 1.96 * std::sqrt(2.0));
  EXPECT_THROW(prediction_interval_two_step(set, Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Zero(1)), DataError);
}

TEST(Intervals, WidthMonotoneInEachVariance) {
  const auto set = make_forecast_set(ModelTag::var_lasso, {"A"}, Date::parse("2024-01-07"), Eigen::VectorXd::Constant(1, 0.0));
  double last = -1.0;
  for (double v1 = 0.0; v1 < 5.0; v1 += 0.25) {
    for (double v2 = 0.0; v2 < 5.0; v2 += 0.25) {
      const auto a = prediction_interval_two_step(set, Eigen::VectorXd::Constant(1, v1), Eigen::VectorXd::Constant(1, v2));
      const auto b = prediction_interval_two_step(set, Eigen::VectorXd::Constant(1, v1 + 0.1), Eigen::VectorXd::Constant(1, v2));
      const auto c = prediction_interval_two_step(set, Eigen::VectorXd::Constant(1, v1), Eigen::VectorXd::Constant(1, v2 + 0.1));
      const double w = *a.entries[0].upper95 - *a.entries[0].lower95;
      EXPECT_GE(*b.entries[0].upper95 - *b.entries[0].lower95, w);
      EXPECT_GE(*c.entries[0].upper95 - *c.entries[0].lower95, w);
      if (v2 == 0.0) {
        EXPECT_GE(w, last);
        last = w;
      }
    }
  }
}

TEST(Serialization, FitJsonListsNonzeroEntries) {
  Eigen::MatrixXd phi(2, 2);
  phi << 0.5, 0.0, 0.3, 0.0;
  auto fit = manual_fit(Eigen::Vector2d(1, 2), {phi});
  fit.lambda = 0.7;
  fit.train_window = std::make_pair(Date::parse("2023-01-01"), Date::parse("2024-01-07"));
  const auto j = fit_to_json(fit, {"A", "B"});
  EXPECT_EQ(j["lambda"], 0.7);
  EXPECT_EQ(j["lag_matrices"][0]["matrix"][1][0], 0.3);
  ASSERT_EQ(j["nonzero"].size(), 2u);
  EXPECT_EQ(j["nonzero"][1]["from"], "A");
  EXPECT_EQ(j["nonzero"][1]["to"], "B");
  EXPECT_EQ(j["nonzero"][1]["lag"], 1);
  EXPECT_EQ(j["train_window"][0], "2023-01-01");
}

TEST(ModelTags, Parse) {
  EXPECT_EQ(parse_model_tag("var"), ModelTag::var_lasso);
  EXPECT_EQ(parse_model_tag("ar_lasso"), ModelTag::ar_lasso);
  EXPECT_EQ(parse_model_tag("naive"), ModelTag::naive);
  EXPECT_THROW(parse_model_tag("arima"), UsageError);
}
