#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "varlasso/error.hpp"
#include "varlasso/panel.hpp"

namespace varlasso::synth {

struct Stationarity {
  double radius = 0.0;
  bool stationary = true;
};

/// Kp x Kp companion matrix of (Phi_1 .. Phi_p).
inline Eigen::MatrixXd companion_matrix(const std::vector<Eigen::MatrixXd>& lags) {
  if (lags.empty()) throw DataError("companion matrix needs at least one lag matrix");
  const Eigen::Index K = lags.front().rows();
  for (const auto& m : lags)
    if (m.rows() != K || m.cols() != K) throw DataError("lag matrices must all be square with the same dimension");
  const auto p = static_cast<Eigen::Index>(lags.size());
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(K * p, K * p);
  for (Eigen::Index l = 0; l < p; ++l) C.block(0, l * K, K, K) = lags[static_cast<std::size_t>(l)];
  if (p > 1) C.block(K, 0, K * (p - 1), K * (p - 1)).setIdentity();
  return C;
}

inline Stationarity check_stationarity(const std::vector<Eigen::MatrixXd>& lags) {
  const Eigen::MatrixXd C = companion_matrix(lags);
  const Eigen::EigenSolver<Eigen::MatrixXd> es(C, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed for the companion matrix");
  const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
  return {radius, radius < 1.0};
}

struct SyntheticVarSpec {
  Eigen::VectorXd intercept;                // K
  std::vector<Eigen::MatrixXd> lag_matrices;  // p matrices, K x K
  Eigen::MatrixXd noise_cov;                // K x K, positive semi-definite
  Eigen::Index n = 100;
  std::uint64_t seed = 1;
  Eigen::Index burn_in = 200;
  std::optional<Eigen::MatrixXd> initial;   // K x p start values, columns oldest to newest; zeros otherwise

  Eigen::Index num_series() const { return intercept.size(); }
};

namespace detail {
// Symmetric square root; tolerates singular (even zero) covariance.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}
}  // namespace detail

/// y_t = c + sum_l Phi_l y_{t-l} + e_t, e_t ~ N(0, noise_cov). Returns K x n after burn-in.
inline Eigen::MatrixXd generate(const SyntheticVarSpec& spec) {
  const Eigen::Index K = spec.num_series();
  const auto p = static_cast<Eigen::Index>(spec.lag_matrices.size());
  if (K < 1 || p < 1) throw DataError("synthetic VAR needs K >= 1 and p >= 1");
  for (const auto& phi : spec.lag_matrices)
    if (phi.rows() != K || phi.cols() != K) throw DataError("lag matrices must be K x K");
  if (spec.noise_cov.rows() != K || spec.noise_cov.cols() != K) throw DataError("noise_cov must be K x K");
  if ((spec.noise_cov - spec.noise_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw DataError("noise_cov must be symmetric");
  const auto st = check_stationarity(spec.lag_matrices);
  if (!st.stationary)
    throw DataError("synthetic VAR is not stationary (companion spectral radius " + std::to_string(st.radius) + ")");
  if (spec.n < 1 || spec.burn_in < 0) throw DataError("synthetic VAR needs n >= 1 and burn_in >= 0");

  const Eigen::MatrixXd L = detail::psd_sqrt(spec.noise_cov);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Eigen::Index total = spec.burn_in + spec.n;
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(K, p + total);
  if (spec.initial) {
    if (spec.initial->rows() != K || spec.initial->cols() != p) throw DataError("initial values must be K x p");
    y.leftCols(p) = *spec.initial;
  }
  Eigen::VectorXd e(K);
  for (Eigen::Index t = p; t < p + total; ++t) {
    for (Eigen::Index k = 0; k < K; ++k) e(k) = normal(rng);
    Eigen::VectorXd v = spec.intercept + L * e;
    for (Eigen::Index l = 1; l <= p; ++l) v.noalias() += spec.lag_matrices[static_cast<std::size_t>(l - 1)] * y.col(t - l);
    y.col(t) = v;
  }
  return y.rightCols(spec.n);
}

enum class CountTransform { round, poisson };

/// Integer panel from a real-valued K x T matrix: rounded and clamped at zero, or Poisson with
/// the clamped value as mean.
inline TimeSeriesPanel to_count_panel(const Eigen::Ref<const Eigen::MatrixXd>& values, std::vector<std::string> names,
                                      Date first_week, CountTransform transform = CountTransform::round,
                                      std::uint64_t seed = 1) {
  CountMatrix counts(values.rows(), values.cols());
  std::mt19937_64 rng(seed);
  for (Eigen::Index k = 0; k < values.rows(); ++k) {
    for (Eigen::Index t = 0; t < values.cols(); ++t) {
      const double mean = std::max(values(k, t), 0.0);
      if (transform == CountTransform::round) {
        counts(k, t) = static_cast<std::int64_t>(std::llround(mean));
      } else {
        std::poisson_distribution<std::int64_t> pois(mean);
        counts(k, t) = mean > 0.0 ? pois(rng) : 0;
      }
    }
  }
  return TimeSeriesPanel(std::move(names), first_week, std::move(counts));
}

/// Default series names S1..SK.
inline std::vector<std::string> series_names(Eigen::Index K, const std::string& prefix = "S") {
  std::vector<std::string> names;
  for (Eigen::Index k = 0; k < K; ++k) names.push_back(prefix + std::to_string(k + 1));
  return names;
}

/// Two series where the second repeats the first `shift` weeks later plus noise.
/// The leader is a stationary AR(1) around `level`.
inline Eigen::MatrixXd shifted_pair(Eigen::Index n, int shift, double phi, double sigma, double follower_noise,
                                    double level, std::uint64_t seed) {
  SyntheticVarSpec leader;
  leader.intercept = Eigen::VectorXd::Constant(1, level * (1.0 - phi));
  leader.lag_matrices = {Eigen::MatrixXd::Constant(1, 1, phi)};
  leader.noise_cov = Eigen::MatrixXd::Constant(1, 1, sigma * sigma);
  leader.n = n + shift;
  leader.seed = seed;
  leader.burn_in = 500;
  const Eigen::MatrixXd a = generate(leader);

  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> normal(0.0, follower_noise);
  Eigen::MatrixXd out(2, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    out(0, t) = a(0, t + shift);
    out(1, t) = a(0, t) + normal(rng);
  }
  return out;
}

}  // namespace varlasso::synth
