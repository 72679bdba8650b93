#pragma once

#include <span>

#include <Eigen/Dense>

#include "bopi/dataset.hpp"
#include "bopi/intervals.hpp"

namespace bopi {

/// Ordinary least squares with an intercept.
struct OlsModel {
  Eigen::VectorXd coefficients;  // intercept first
  Eigen::MatrixXd gram_inverse;  // (X^T X)^{-1} for the design with intercept column
  double sigma2 = 0.0;           // RSS / N
  std::size_t rows = 0;

  [[nodiscard]] std::size_t parameter_count() const noexcept {
    return static_cast<std::size_t>(coefficients.size());
  }
  [[nodiscard]] double predict(std::span<const double> x) const;
  /// x*^T (X^T X)^{-1} x* with x* = (1, x).
  [[nodiscard]] double leverage(std::span<const double> x) const;
};

/// Throws std::invalid_argument when the design is rank deficient or N <= p.
OlsModel fit_ols(const Dataset& d);

/// fhat(x) +/- t_{1-(1-beta)/2, N-p} * sqrt(N sigma2 / (N - p) * (1 + leverage(x))).
Interval ols_prediction_interval(const OlsModel& ols, std::span<const double> x, Probability beta);

}  // namespace bopi
