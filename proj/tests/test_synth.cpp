#include <sstream>

#include <gtest/gtest.h>

#include "varlasso/panel.hpp"
#include "varlasso/synth.hpp"
#include "varlasso/varmodel.hpp"

using namespace varlasso;
using namespace varlasso::synth;

namespace {

Eigen::MatrixXd triangular_phi() {
  Eigen::MatrixXd phi(2, 2);
  phi << 0.5, 0.0, 0.3, 0.4;
  return phi;
}

}  // namespace

TEST(Generate, DeterministicWithoutNoise) {
  SyntheticVarSpec spec;
  spec.intercept = Eigen::VectorXd::Zero(2);
  spec.lag_matrices = {triangular_phi()};
  spec.noise_cov = Eigen::MatrixXd::Zero(2, 2);
  spec.n = 2;
  spec.burn_in = 0;
  spec.initial = Eigen::MatrixXd::Ones(2, 1);
  const auto y = generate(spec);
  EXPECT_DOUBLE_EQ(y(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y(1, 0), 0.7);
  EXPECT_DOUBLE_EQ(y(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(y(1, 1), 0.43);
}

TEST(Generate, MeanMatchesIntercept) {
  SyntheticVarSpec spec;
  spec.intercept = Eigen::VectorXd::Constant(1, 2.0);
  spec.lag_matrices = {Eigen::MatrixXd::Zero(1, 1)};
  spec.noise_cov = Eigen::MatrixXd::Constant(1, 1, 4.0);
  spec.n = 5000;
  spec.seed = 12;
  const auto y = generate(spec);
  EXPECT_NEAR(y.mean(), 2.0, 3.0 * 2.0 / std::sqrt(5000.0));
}

TEST(Generate, SameSeedSameOutput) {
  SyntheticVarSpec spec;
  spec.intercept = Eigen::VectorXd::Constant(2, 1.0);
  spec.lag_matrices = {triangular_phi()};
  spec.noise_cov = Eigen::MatrixXd::Identity(2, 2);
  spec.seed = 99;
  EXPECT_EQ(generate(spec), generate(spec));
  auto other = spec;
  other.seed = 100;
  EXPECT_NE(generate(spec), generate(other));
}

TEST(Generate, RejectsInvalidSpecs) {
  SyntheticVarSpec spec;
  spec.intercept = Eigen::VectorXd::Zero(2);
  spec.lag_matrices = {Eigen::MatrixXd::Identity(2, 2)};
  spec.noise_cov = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(generate(spec), DataError);
  spec.lag_matrices = {Eigen::MatrixXd::Zero(3, 3)};
  EXPECT_THROW(generate(spec), DataError);
  spec.lag_matrices = {Eigen::MatrixXd::Zero(2, 2)};
  spec.noise_cov = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(generate(spec), DataError);
}

TEST(Stationarity, Radius) {
  const auto tri = check_stationarity({triangular_phi()});
  EXPECT_NEAR(tri.radius, 0.5, 1e-12);
  EXPECT_TRUE(tri.stationary);
  const auto unit = check_stationarity({Eigen::MatrixXd::Identity(2, 2)});
  EXPECT_NEAR(unit.radius, 1.0, 1e-12);
  EXPECT_FALSE(unit.stationary);
  EXPECT_EQ(check_stationarity({Eigen::MatrixXd::Zero(2, 2)}).radius, 0.0);
}

TEST(Stationarity, ComplexAndHigherOrderRoots) {
  // Rotation scaled by 0.9: eigenvalues 0.9 e^{+-i pi/2}.
  Eigen::MatrixXd rot(2, 2);
  rot << 0.0, -0.9, 0.9, 0.0;
  EXPECT_NEAR(check_stationarity({rot}).radius, 0.9, 1e-12);
  // AR(2) y_t = 0.5 y_{t-1} + 0.5 y_{t-2} has a unit root.
  EXPECT_NEAR(check_stationarity({Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd::Constant(1, 1, 0.5)}).radius, 1.0, 1e-12);
}

TEST(Generate, LargeSampleRefitIsConsistent) {
  SyntheticVarSpec spec;
  spec.intercept = Eigen::Vector2d(0.2, -0.1);
  spec.lag_matrices = {triangular_phi()};
  spec.noise_cov = Eigen::MatrixXd::Identity(2, 2);
  spec.n = 10000;
  spec.seed = 4;
  const auto y = generate(spec);
  VarSpec vs;
  vs.p = 1;
  vs.lambda = LambdaPolicy::fixed(0.0);
  const auto fit = fit_var_lasso(y, vs);
  EXPECT_LT((fit.lag_matrices[0] - triangular_phi()).cwiseAbs().maxCoeff(), 0.05);
  EXPECT_LT((fit.intercept - spec.intercept).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Generate, ArOneAutocovariance) {
  const double phi = 0.6, sigma = 1.5;
  SyntheticVarSpec spec;
  spec.intercept = Eigen::VectorXd::Zero(1);
  spec.lag_matrices = {Eigen::MatrixXd::Constant(1, 1, phi)};
  spec.noise_cov = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
  spec.n = 10000;
  spec.seed = 21;
  const Eigen::VectorXd y = generate(spec).row(0).transpose();
  const double m = y.mean();
  double acc = 0.0;
  for (Eigen::Index t = 1; t < y.size(); ++t) acc += (y(t) - m) * (y(t - 1) - m);
  const double gamma1 = acc / static_cast<double>(y.size());
  const double expected = phi * sigma * sigma / (1.0 - phi * phi);
  EXPECT_NEAR(gamma1, expected, 0.1 * expected);
}

TEST(CountPanel, RoundsClampsAndReingests) {
  Eigen::MatrixXd v(2, 3);
  v << 1.4, -2.0, 3.6, 0.5, 10.49, 7.0;
  const auto panel = to_count_panel(v, {"A", "B"}, Date::parse("2024-01-07"));
  CountMatrix expected(2, 3);
  expected << 1, 0, 4, 1, 10, 7;
  EXPECT_EQ(panel.counts(), expected);
  std::ostringstream out;
  write_panel(out, panel);
  std::istringstream in(out.str());
  EXPECT_EQ(read_panel(in).panel, panel);
}

TEST(CountPanel, PoissonIsSeeded) {
  const Eigen::MatrixXd v = Eigen::MatrixXd::Constant(3, 50, 20.0);
  const auto a = to_count_panel(v, series_names(3), Date::parse("2024-01-07"), CountTransform::poisson, 5);
  const auto b = to_count_panel(v, series_names(3), Date::parse("2024-01-07"), CountTransform::poisson, 5);
  EXPECT_EQ(a, b);
  EXPECT_NEAR(a.as_real().mean(), 20.0, 1.5);
}

TEST(ShiftedPair, FollowerLagsLeader) {
  const auto xy = shifted_pair(200, 6, 0.8, 2.0, 1e-9, 20.0, 3);
  for (Eigen::Index t = 6; t < 200; ++t) EXPECT_NEAR(xy(1, t), xy(0, t - 6), 1e-6);
}
