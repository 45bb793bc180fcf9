#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "varlasso/lasso.hpp"

using namespace varlasso;

namespace {

struct Random {
  std::mt19937_64 rng;
  explicit Random(std::uint64_t seed) : rng(seed) {}
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
  Eigen::MatrixXd matrix(Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = normal();
    return m;
  }
};

// Random problem with an intercept column and a sparse truth.
LassoProblem random_problem(Random& r, Eigen::Index n, Eigen::Index d) {
  LassoProblem p;
  p.design = r.matrix(n, d);
  p.design.col(0).setOnes();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  for (Eigen::Index j = 0; j < d; ++j)
    if (r.uniform(0, 2) == 0) beta(j) = 3.0 * r.normal();
  p.response = p.design * beta + r.matrix(n, 1);
  p.penalize_mask.assign(static_cast<std::size_t>(d), true);
  p.penalize_mask[0] = false;
  return p;
}

}  // namespace

TEST(SoftThreshold, Values) {
  EXPECT_EQ(soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_EQ(soft_threshold(0.5, 1.0), 0.0);
}

TEST(FitLasso, OrthonormalDesignAtZeroPenalty) {
  LassoProblem p;
  p.design = Eigen::MatrixXd::Identity(2, 2);
  p.response = Eigen::MatrixXd(2, 1);
  p.response << 3, 7;
  p.lambda = 0.0;
  const auto sol = fit_lasso(p);
  EXPECT_NEAR(sol.coefficients(0, 0), 3.0, 1e-12);
  EXPECT_NEAR(sol.coefficients(1, 0), 7.0, 1e-12);
}

TEST(FitLasso, SingleColumnSoftThreshold) {
  LassoProblem p;
  p.design = Eigen::MatrixXd(2, 1);
  p.design << 1, 0;  // x'x = 1
  p.response = Eigen::MatrixXd(2, 1);
  p.response << 2, 5;  // x'y = 2
  p.lambda = 1.0;
  EXPECT_NEAR(fit_lasso(p).coefficients(0, 0), 1.5, 1e-12);
  p.lambda = 4.0;
  EXPECT_EQ(fit_lasso(p).coefficients(0, 0), 0.0);
}

TEST(FitLasso, LambdaMaxZeroesEverything) {
  Random r(4);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = random_problem(r, 40, 8);
    const double lmax = lambda_max(p);
    Eigen::VectorXd yc = p.response.col(0).array() - p.response.col(0).mean();
    double manual = 0.0;
    for (Eigen::Index j = 1; j < 8; ++j) manual = std::max(manual, std::abs(2.0 * p.design.col(j).dot(yc)));
    EXPECT_NEAR(lmax, manual, 1e-9 * manual);
    for (double scale : {1.0, 1.5}) {
      p.lambda = lmax * scale;
      const auto sol = fit_lasso(p);
      for (Eigen::Index j = 1; j < 8; ++j) EXPECT_EQ(sol.coefficients(j, 0), 0.0);
      EXPECT_NEAR(sol.coefficients(0, 0), p.response.col(0).mean(), 1e-10);
    }
  }
}

TEST(FitLasso, KktHoldsOnRandomProblems) {
  Random r(7);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = r.uniform(5, 50);
    const Eigen::Index d = r.uniform(2, 20);
    auto p = random_problem(r, n, d);
    p.lambda = lambda_max(p) * std::pow(10.0, -2.0 * r.uniform(0, 100) / 100.0);
    LassoOptions opt;
    opt.tol = 1e-10;
    opt.max_iter = 200000;
    const auto sol = fit_lasso(p, opt);
    ASSERT_TRUE(sol.converged);
    EXPECT_LE(oracle::kkt_violation(p.design, p.response.col(0), sol.coefficients.col(0), p.lambda, p.penalize_mask), 1e-6)
        << "rep " << rep;
  }
}

TEST(FitLasso, ZeroPenaltyMatchesNormalEquations) {
  Random r(8);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::Index d = r.uniform(2, 12);
    const Eigen::Index n = d + r.uniform(5, 40);
    auto p = random_problem(r, n, d);
    p.lambda = 0.0;
    LassoOptions opt;
    opt.tol = 1e-12;
    opt.max_iter = 500000;
    const auto sol = fit_lasso(p, opt);
    const Eigen::VectorXd ref = oracle::normal_equations(p.design, p.response.col(0));
    EXPECT_LE((sol.coefficients.col(0) - ref).norm(), 1e-6 * std::max(1.0, ref.norm())) << "rep " << rep;
  }
}

TEST(FitLasso, ObjectiveNonIncreasingPerSweep) {
  Random r(9);
  for (int rep = 0; rep < 30; ++rep) {
    auto p = random_problem(r, 30, 10);
    p.lambda = 0.1 * lambda_max(p);
    LassoOptions opt;
    opt.record_trace = true;
    const auto sol = fit_lasso(p, opt);
    ASSERT_GE(sol.objective_trace.size(), 1u);
    for (std::size_t i = 1; i < sol.objective_trace.size(); ++i)
      EXPECT_LE(sol.objective_trace[i], sol.objective_trace[i - 1] * (1 + 1e-12) + 1e-12);
    const Eigen::VectorXd b = sol.coefficients.col(0);
    const double manual = (p.response.col(0) - p.design * b).squaredNorm() + p.lambda * b.tail(b.size() - 1).cwiseAbs().sum();
    EXPECT_NEAR(sol.objective_value, manual, 1e-9 * std::max(1.0, manual));
    EXPECT_NEAR(sol.objective_trace.back(), manual, 1e-8 * std::max(1.0, manual));
  }
}

TEST(FitLasso, MultiResponseEqualsColumnwise) {
  Random r(10);
  auto p = random_problem(r, 40, 6);
  p.response = Eigen::MatrixXd(40, 3);
  for (int k = 0; k < 3; ++k) p.response.col(k) = r.matrix(40, 1);
  p.lambda = 5.0;
  const auto joint = fit_lasso(p);
  for (int k = 0; k < 3; ++k) {
    LassoProblem single = p;
    single.response = p.response.col(k);
    EXPECT_EQ(fit_lasso(single).coefficients.col(0), joint.coefficients.col(k));
  }
}

TEST(FitLasso, ReportsNonConvergence) {
  Random r(11);
  auto p = random_problem(r, 40, 10);
  p.lambda = 1e-3;
  LassoOptions opt;
  opt.max_iter = 1;
  opt.tol = 1e-15;
  EXPECT_FALSE(fit_lasso(p, opt).converged);
}

TEST(FitLasso, DropsConstantColumns) {
  Random r(12);
  auto p = random_problem(r, 30, 5);
  p.design.col(3).setConstant(2.0);
  p.lambda = 1.0;
  const auto sol = fit_lasso(p);
  EXPECT_EQ(sol.dropped_columns, (std::vector<Eigen::Index>{3}));
  EXPECT_EQ(sol.coefficients(3, 0), 0.0);
}

TEST(FitLasso, RejectsBadInput) {
  Random r(13);
  auto p = random_problem(r, 20, 4);
  p.lambda = -1.0;
  EXPECT_THROW(fit_lasso(p), DataError);
  p.lambda = 1.0;
  p.response(3, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(fit_lasso(p), NumericalError);
  auto q = random_problem(r, 20, 4);
  q.response = Eigen::MatrixXd::Zero(19, 1);
  EXPECT_THROW(fit_lasso(q), DataError);
}

TEST(LambdaGrid, TwoPointGrid) {
  LassoProblem p;
  p.design = Eigen::MatrixXd(2, 1);
  p.design << 1, 0;
  p.response = Eigen::MatrixXd(2, 1);
  p.response << 5, 0;
  const auto g = lambda_grid(p, 2, 0.1);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_DOUBLE_EQ(g[0], 10.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0);
}

TEST(LambdaGrid, StrictlyDecreasingAndTopIsNull) {
  Random r(14);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = random_problem(r, 30, 6);
    const auto g = lambda_grid(p, 2 + rep, 0.001 + 0.04 * rep);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g[i], g[i - 1]);
    p.lambda = g[0];
    const auto sol = fit_lasso(p);
    for (Eigen::Index j = 1; j < 6; ++j) EXPECT_EQ(sol.coefficients(j, 0), 0.0);
  }
}

TEST(LambdaGrid, RejectsBadArguments) {
  Random r(15);
  auto p = random_problem(r, 30, 4);
  EXPECT_THROW(lambda_grid(p, 1, 0.1), DataError);
  EXPECT_THROW(lambda_grid(p, 5, 1.5), DataError);
  p.response.setConstant(3.0);
  EXPECT_THROW(lambda_grid(p, 5, 0.1), DataError);
}

TEST(RollingFolds, ValidationFollowsTraining) {
  const auto folds = rolling_folds(100, 5, 50);
  ASSERT_EQ(folds.size(), 5u);
  EXPECT_EQ(folds.front().first, 50);
  EXPECT_EQ(folds.back().second, 100);
  for (std::size_t f = 1; f < folds.size(); ++f) EXPECT_EQ(folds[f].first, folds[f - 1].second);
  EXPECT_THROW(rolling_folds(10, 5, 8), DataError);
}

TEST(CrossValidation, RecoversSingleRelevantColumn) {
  int hits = 0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    Random r(1000 + static_cast<std::uint64_t>(rep));
    const Eigen::Index n = 200;
    Eigen::MatrixXd X(n, 11);
    X.col(0).setOnes();
    X.rightCols(10) = r.matrix(n, 10);
    const Eigen::VectorXd y = 3.0 * X.col(1) + 0.01 * r.matrix(n, 1);
    std::vector<bool> mask(11, true);
    mask[0] = false;
    LassoProblem p{X, y, mask, 0.0};
    const auto grid = lambda_grid(p, 20, 0.01);
    const auto cv = cv_select_lambda(X, y, grid, 10, 100, mask, {}, CvRule::one_standard_error);
    p.lambda = cv.best_lambda;
    const auto sol = fit_lasso(p);
    bool ok = sol.coefficients(1, 0) != 0.0;
    for (Eigen::Index j = 2; j < 11; ++j) ok = ok && sol.coefficients(j, 0) == 0.0;
    hits += ok;
  }
  EXPECT_GE(hits, 95);
}

TEST(CrossValidation, SingleElementGrid) {
  Random r(16);
  const auto p = random_problem(r, 30, 4);
  const auto cv = cv_select_lambda(p.design, p.response, {2.5}, 3, 10, p.penalize_mask);
  EXPECT_EQ(cv.best_lambda, 2.5);
  EXPECT_EQ(cv.best_index, 0u);
}

TEST(CrossValidation, DuplicateLambdasPickFirstIndex) {
  Random r(17);
  const auto p = random_problem(r, 60, 5);
  const double l = 0.05 * lambda_max(p);
  for (CvRule rule : {CvRule::min_error, CvRule::one_standard_error}) {
    const auto cv = cv_select_lambda(p.design, p.response, {l, l, l}, 5, 30, p.penalize_mask, {}, rule);
    EXPECT_EQ(cv.best_index, 0u);
  }
}

TEST(CrossValidation, Errors) {
  Random r(18);
  const auto p = random_problem(r, 30, 4);
  EXPECT_THROW(cv_select_lambda(p.design, p.response, {}, 3, 10), DataError);
  EXPECT_THROW(cv_select_lambda(p.design, p.response, {2.0, 1.0}, 40, 10), DataError);
}
