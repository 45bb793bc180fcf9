#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "varlasso/error.hpp"

namespace varlasso {

/// Minimize ||Y - X B||_F^2 + lambda * sum_{penalized j} |B_jk|.
/// No 1/(2n) factor: the penalty scale matches the raw sum of squares.
struct LassoProblem {
  Eigen::MatrixXd design;    // n x d
  Eigen::MatrixXd response;  // n x m, solved column by column
  std::vector<bool> penalize_mask;  // size d; empty means "all penalized"
  double lambda = 0.0;
};

struct LassoOptions {
  double tol = 1e-7;  // max absolute coefficient change in a sweep
  int max_iter = 10000;
  bool record_trace = false;
};

struct LassoSolution {
  Eigen::MatrixXd coefficients;  // d x m, original scale
  double objective_value = 0.0;
  int iterations = 0;  // largest sweep count over response columns
  bool converged = true;
  std::vector<Eigen::Index> dropped_columns;  // zero after centering; coefficient pinned to 0
  std::vector<double> objective_trace;        // per sweep, single-response solves only

  Eigen::VectorXd vector() const { return coefficients.col(0); }
};

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

/// ||Y - XB||^2 + lambda * sum |B_jk| over penalized rows j.
inline double lasso_objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& B,
                              const std::vector<bool>& mask, double lambda) {
  double pen = 0.0;
  for (Eigen::Index j = 0; j < B.rows(); ++j)
    if (mask.empty() || mask[static_cast<std::size_t>(j)]) pen += B.row(j).cwiseAbs().sum();
  return (Y - X * B).squaredNorm() + lambda * pen;
}

namespace detail {

/// Gram-form cyclic coordinate descent on a fixed design.
///
/// A constant unpenalized column is treated as the intercept and profiled out
/// by centering. Remaining columns are scaled to unit l2 norm; the penalty on a
/// scaled coordinate is lambda / norm so the original-scale objective is solved
/// exactly. Reusable across lambdas and response columns.
class CoordinateDescent {
 public:
  CoordinateDescent(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<bool>& mask) : d_(X.cols()) {
    if (X.rows() < 1 || X.cols() < 1) throw DataError("lasso design must have at least one row and one column");
    if (!X.allFinite()) throw NumericalError("lasso design contains non-finite values");
    if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != d_)
      throw DataError("penalize_mask has " + std::to_string(mask.size()) + " entries, design has " +
                      std::to_string(d_) + " columns");
    penalized_.resize(static_cast<std::size_t>(d_));
    for (Eigen::Index j = 0; j < d_; ++j) penalized_[static_cast<std::size_t>(j)] = mask.empty() || mask[static_cast<std::size_t>(j)];

    for (Eigen::Index j = 0; j < d_; ++j) {
      if (penalized_[static_cast<std::size_t>(j)]) continue;
      const auto col = X.col(j);
      if (col(0) != 0.0 && (col.array() == col(0)).all()) {
        intercept_ = j;
        intercept_value_ = col(0);
        break;
      }
    }
    means_ = Eigen::VectorXd::Zero(d_);
    if (intercept_) means_ = X.colwise().mean().transpose();

    Eigen::MatrixXd Xc = X;
    if (intercept_) Xc.rowwise() -= means_.transpose();
    scale_ = Eigen::VectorXd::Zero(d_);
    for (Eigen::Index j = 0; j < d_; ++j) {
      if (intercept_ && j == *intercept_) continue;
      const double norm = Xc.col(j).norm();
      const double ref = std::max(X.col(j).cwiseAbs().maxCoeff(), 1.0);
      if (norm <= 1e-12 * ref * std::sqrt(static_cast<double>(X.rows()))) {
        dropped_.push_back(j);
        continue;
      }
      scale_(j) = norm;
      active_.push_back(j);
    }
    const Eigen::Index a = static_cast<Eigen::Index>(active_.size());
    Xs_.resize(X.rows(), a);
    for (Eigen::Index i = 0; i < a; ++i) Xs_.col(i) = Xc.col(active_[static_cast<std::size_t>(i)]) / scale_(active_[static_cast<std::size_t>(i)]);
    gram_ = Xs_.transpose() * Xs_;
  }

  const std::vector<Eigen::Index>& dropped() const { return dropped_; }
  bool has_intercept() const { return intercept_.has_value(); }

  /// Largest |2 x_j' y_c| over penalized columns: the smallest lambda with an all-zero solution.
  double lambda_max(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    const Eigen::VectorXd c = Xs_.transpose() * centered(y);
    double best = 0.0;
    for (std::size_t i = 0; i < active_.size(); ++i) {
      const Eigen::Index j = active_[i];
      if (penalized_[static_cast<std::size_t>(j)])
        best = std::max(best, 2.0 * scale_(j) * std::abs(c(static_cast<Eigen::Index>(i))));
    }
    return best;
  }

  struct ColumnResult {
    Eigen::VectorXd beta;
    int sweeps = 0;
    bool converged = false;
    std::vector<double> trace;
  };

  ColumnResult solve(const Eigen::Ref<const Eigen::VectorXd>& y, double lambda, const LassoOptions& opt,
                     const Eigen::VectorXd* warm = nullptr) const {
    if (!y.allFinite()) throw NumericalError("lasso response contains non-finite values");
    const Eigen::Index a = static_cast<Eigen::Index>(active_.size());
    const Eigen::VectorXd yc = centered(y);
    const Eigen::VectorXd c = Xs_.transpose() * yc;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(a);
    if (warm != nullptr)
      for (Eigen::Index i = 0; i < a; ++i) b(i) = (*warm)(active_[static_cast<std::size_t>(i)]) * scale_(active_[static_cast<std::size_t>(i)]);
    Eigen::VectorXd q = gram_ * b;
    Eigen::VectorXd thresh(a);
    for (Eigen::Index i = 0; i < a; ++i) {
      const Eigen::Index j = active_[static_cast<std::size_t>(i)];
      thresh(i) = penalized_[static_cast<std::size_t>(j)] ? lambda / (2.0 * scale_(j) * gram_(i, i)) : 0.0;
    }
    const double yty = yc.squaredNorm();
    auto objective = [&] {
      double pen = 0.0;
      for (Eigen::Index i = 0; i < a; ++i) {
        const Eigen::Index j = active_[static_cast<std::size_t>(i)];
        if (penalized_[static_cast<std::size_t>(j)]) pen += std::abs(b(i)) / scale_(j);
      }
      return yty - 2.0 * b.dot(c) + b.dot(q) + lambda * pen;
    };

    ColumnResult out;
    if (a == 0) out.converged = true;
    for (int sweep = 0; sweep < opt.max_iter && a > 0; ++sweep) {
      double max_change = 0.0;
      for (Eigen::Index i = 0; i < a; ++i) {
        const double gii = gram_(i, i);
        const double rho = (c(i) - q(i)) / gii + b(i);
        double next = rho;
        if (thresh(i) > 0.0) {
          // A hair of slack so that lambda == lambda_max zeroes exactly despite rounding.
          next = std::abs(rho) <= thresh(i) * (1.0 + 8.0 * std::numeric_limits<double>::epsilon())
                     ? 0.0
                     : soft_threshold(rho, thresh(i));
        }
        const double delta = next - b(i);
        if (delta != 0.0) {
          q.noalias() += gram_.col(i) * delta;
          b(i) = next;
          max_change = std::max(max_change, std::abs(delta) / scale_(active_[static_cast<std::size_t>(i)]));
        }
      }
      out.sweeps = sweep + 1;
      if (opt.record_trace) out.trace.push_back(objective());
      if (max_change < opt.tol) {
        out.converged = true;
        break;
      }
    }

    out.beta = Eigen::VectorXd::Zero(d_);
    for (Eigen::Index i = 0; i < a; ++i) {
      const Eigen::Index j = active_[static_cast<std::size_t>(i)];
      out.beta(j) = b(i) / scale_(j);
    }
    if (intercept_) {
      const double ybar = y.mean();
      out.beta(*intercept_) = (ybar - means_.dot(out.beta)) / intercept_value_;
    }
    return out;
  }

 private:
  Eigen::VectorXd centered(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    if (!intercept_) return y;
    return y.array() - y.mean();
  }

  Eigen::Index d_;
  std::vector<bool> penalized_;
  std::optional<Eigen::Index> intercept_;
  double intercept_value_ = 1.0;
  Eigen::VectorXd means_;
  Eigen::VectorXd scale_;
  std::vector<Eigen::Index> active_;
  std::vector<Eigen::Index> dropped_;
  Eigen::MatrixXd Xs_;
  Eigen::MatrixXd gram_;
};

inline CoordinateDescent make_solver(const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<bool>& mask) {
  return CoordinateDescent(X, mask);
}

inline void check_response(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  if (Y.rows() != X.rows())
    throw DataError("lasso response has " + std::to_string(Y.rows()) + " rows, design has " + std::to_string(X.rows()));
  if (Y.cols() < 1) throw DataError("lasso response has no columns");
  if (!Y.allFinite()) throw NumericalError("lasso response contains non-finite values");
}

}  // namespace detail

/// Cyclic coordinate descent with exact soft-threshold updates.
/// Exhausting max_iter is not an error: the last iterate is returned with converged = false.
inline LassoSolution fit_lasso(const LassoProblem& problem, const LassoOptions& options = {},
                               const Eigen::MatrixXd* warm_start = nullptr) {
  if (!(problem.lambda >= 0.0)) throw DataError("lasso lambda must be >= 0");
  if (!(options.tol > 0.0)) throw DataError("lasso tolerance must be > 0");
  detail::check_response(problem.design, problem.response);
  const auto cd = detail::make_solver(problem.design, problem.penalize_mask);

  LassoSolution sol;
  sol.coefficients.resize(problem.design.cols(), problem.response.cols());
  sol.dropped_columns = cd.dropped();
  for (Eigen::Index k = 0; k < problem.response.cols(); ++k) {
    Eigen::VectorXd warm;
    if (warm_start != nullptr) warm = warm_start->col(k);
    auto col = cd.solve(problem.response.col(k), problem.lambda, options, warm_start ? &warm : nullptr);
    sol.coefficients.col(k) = col.beta;
    sol.iterations = std::max(sol.iterations, col.sweeps);
    sol.converged = sol.converged && col.converged;
    if (problem.response.cols() == 1) sol.objective_trace = std::move(col.trace);
  }
  sol.objective_value =
      lasso_objective(problem.design, problem.response, sol.coefficients, problem.penalize_mask, problem.lambda);
  return sol;
}

/// Smallest lambda at which every penalized coefficient is zero, max over response columns.
inline double lambda_max(const LassoProblem& problem) {
  detail::check_response(problem.design, problem.response);
  const auto cd = detail::make_solver(problem.design, problem.penalize_mask);
  double best = 0.0;
  for (Eigen::Index k = 0; k < problem.response.cols(); ++k) best = std::max(best, cd.lambda_max(problem.response.col(k)));
  return best;
}

/// Log-spaced descending grid from lambda_max to ratio * lambda_max.
inline std::vector<double> lambda_grid(const LassoProblem& problem, int n_lambda, double ratio) {
  if (n_lambda < 2) throw DataError("lambda grid needs n_lambda >= 2");
  if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("lambda grid ratio must lie in (0, 1)");
  const double top = lambda_max(problem);
  if (!(top > 0.0)) throw DataError("lambda grid undefined: response is zero after centering");
  std::vector<double> grid(static_cast<std::size_t>(n_lambda));
  for (int i = 0; i < n_lambda; ++i) grid[static_cast<std::size_t>(i)] = top * std::pow(ratio, static_cast<double>(i) / (n_lambda - 1));
  grid.front() = top;
  grid.back() = top * ratio;
  return grid;
}

/// min_error: the lambda with the smallest mean validation error.
/// one_standard_error: the largest lambda whose error is within one standard
/// error (across folds) of that minimum.
enum class CvRule { min_error, one_standard_error };

inline const char* to_string(CvRule r) { return r == CvRule::min_error ? "min" : "1se"; }

struct CvResult {
  double best_lambda = 0.0;
  std::size_t best_index = 0;
  std::size_t min_index = 0;     // grid entry with the smallest mean error
  std::vector<double> cv_curve;  // mean validation MSE per grid entry
  std::vector<double> cv_se;     // standard error of that mean across folds
  int n_folds = 0;
};

/// Contiguous validation block boundaries for rolling-origin CV:
/// fold f trains on rows [0, start_f) and validates on [start_f, end_f).
inline std::vector<std::pair<Eigen::Index, Eigen::Index>> rolling_folds(Eigen::Index n, int n_folds, Eigen::Index min_train) {
  if (n_folds < 1) throw DataError("cross-validation needs at least one fold");
  if (min_train < 1 || n - min_train < n_folds)
    throw DataError("insufficient data for cross-validation: " + std::to_string(n) + " rows, min_train " +
                    std::to_string(min_train) + ", " + std::to_string(n_folds) + " folds");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> folds;
  const Eigen::Index span = n - min_train;
  for (int f = 0; f < n_folds; ++f)
    folds.emplace_back(min_train + span * f / n_folds, min_train + span * (f + 1) / n_folds);
  return folds;
}

/// Forward-chaining cross-validation over a penalty grid. Validation blocks always
/// follow their training rows in time. Ties in CV error go to the larger lambda,
/// then to the earlier grid index.
inline CvResult cv_select_lambda(const Eigen::MatrixXd& design, const Eigen::MatrixXd& response,
                                 const std::vector<double>& grid, int n_folds, Eigen::Index min_train,
                                 const std::vector<bool>& penalize_mask = {}, const LassoOptions& options = {},
                                 CvRule rule = CvRule::min_error) {
  if (grid.empty()) throw DataError("cross-validation grid is empty");
  detail::check_response(design, response);
  for (double l : grid)
    if (!(l >= 0.0)) throw DataError("cross-validation grid holds a negative lambda");

  CvResult out;
  out.n_folds = n_folds;
  out.cv_curve.assign(grid.size(), 0.0);
  out.cv_se.assign(grid.size(), 0.0);
  if (grid.size() == 1) {
    out.best_lambda = grid[0];
    out.n_folds = 0;
    return out;
  }
  const auto folds = rolling_folds(design.rows(), n_folds, min_train);

  // Each fold walks the grid in order with warm starts; folds share nothing.
  std::vector<std::vector<double>> fold_mse(folds.size(), std::vector<double>(grid.size(), 0.0));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto [start, end] = folds[f];
    const Eigen::MatrixXd Xtr = design.topRows(start);
    const auto cd = detail::make_solver(Xtr, penalize_mask);
    const Eigen::MatrixXd Xva = design.middleRows(start, end - start);
    const Eigen::MatrixXd Yva = response.middleRows(start, end - start);
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(design.cols(), response.cols());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      // A repeated lambda reuses its first occurrence so duplicates tie exactly.
      const auto first = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), grid[g]) - grid.begin());
      if (first < g) {
        fold_mse[f][g] = fold_mse[f][first];
        continue;
      }
      for (Eigen::Index k = 0; k < response.cols(); ++k) {
        const Eigen::VectorXd warm = B.col(k);
        B.col(k) = cd.solve(response.col(k).head(start), grid[g], options, &warm).beta;
      }
      fold_mse[f][g] = (Yva - Xva * B).squaredNorm() / static_cast<double>(Yva.size());
    }
  }
  const double nf = static_cast<double>(folds.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (std::size_t f = 0; f < folds.size(); ++f) s += fold_mse[f][g];
    const double mean = s / nf;
    double ss = 0.0;
    for (std::size_t f = 0; f < folds.size(); ++f) ss += (fold_mse[f][g] - mean) * (fold_mse[f][g] - mean);
    out.cv_curve[g] = mean;
    out.cv_se[g] = folds.size() > 1 ? std::sqrt(ss / (nf - 1.0) / nf) : 0.0;
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (out.cv_curve[g] < out.cv_curve[best] || (out.cv_curve[g] == out.cv_curve[best] && grid[g] > grid[best]))
      best = g;
  }
  out.min_index = best;
  if (rule == CvRule::one_standard_error) {
    const double limit = out.cv_curve[best] + out.cv_se[best];
    for (std::size_t g = 0; g < grid.size(); ++g)
      if (out.cv_curve[g] <= limit && (grid[g] > grid[best] || (grid[g] == grid[best] && g < best))) best = g;
  }
  out.best_index = best;
  out.best_lambda = grid[best];
  return out;
}

}  // namespace varlasso
