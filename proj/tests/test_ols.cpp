#include <doctest.h>

#include "bopi/ols.hpp"
#include "bopi/random.hpp"
#include "oracles.hpp"

using namespace bopi;

namespace {

Dataset noisy_linear(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    y(i) = 1.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(i, j) = rng.uniform(-1.0, 1.0);
      y(i) += static_cast<double>(j + 1) * x(i, j);
    }
    y(i) += 0.5 * rng.normal();
  }
  return {std::move(x), std::move(y)};
}

}  // namespace

TEST_CASE("exact linear data") {
  FeatureMatrix x(6, 2);
  x << 0, 1, 1, 0, 2, 3, 3, 1, 4, 4, 5, 2;
  Eigen::VectorXd y = 2.0 + 0.5 * x.col(0).array() - 1.5 * x.col(1).array();
  const auto ols = fit_ols(Dataset(x, y));
  CHECK(ols.coefficients(0) == doctest::Approx(2.0));
  CHECK(ols.coefficients(1) == doctest::Approx(0.5));
  CHECK(ols.coefficients(2) == doctest::Approx(-1.5));
  CHECK(ols.sigma2 < 1e-20);
}

TEST_CASE("coefficients and inverse gram match the normal equations") {
  const Dataset d = noisy_linear(50, 3, 9);
  const auto ols = fit_ols(d);
  Eigen::MatrixXd design(50, 4);
  design.col(0).setOnes();
  design.rightCols(3) = d.features();
  const Eigen::MatrixXd inv = oracle::gauss_jordan_inverse(design.transpose() * design);
  const Eigen::VectorXd beta = inv * design.transpose() * d.response();
  for (int j = 0; j < 4; ++j) CHECK(ols.coefficients(j) == doctest::Approx(beta(j)).epsilon(1e-10));
  CHECK((ols.gram_inverse - inv).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::VectorXd res = d.response() - design * beta;
  CHECK(ols.sigma2 == doctest::Approx(res.squaredNorm() / 50.0).epsilon(1e-10));
}

TEST_CASE("intercept-only fit is the mean") {
  Eigen::VectorXd y(4);
  y << 1.0, 2.0, 3.0, 10.0;
  const auto ols = fit_ols(Dataset(FeatureMatrix(4, 0), y));
  CHECK(ols.coefficients(0) == doctest::Approx(4.0));
  CHECK(ols.leverage(std::vector<double>{}) == doctest::Approx(0.25));
}

TEST_CASE("leverage and interval width") {
  const Dataset d = noisy_linear(80, 2, 4);
  const auto ols = fit_ols(d);
  const Eigen::RowVectorXd centroid = d.features().colwise().mean();
  const std::vector<double> c(centroid.data(), centroid.data() + 2);
  CHECK(ols.leverage(c) == doctest::Approx(1.0 / 80.0).epsilon(1e-10));
  double last = ols_prediction_interval(ols, c, 0.9).size();
  for (double step : {0.5, 1.0, 2.0, 4.0}) {
    const std::vector<double> far = {c[0] + step, c[1] - step};
    CHECK(ols.leverage(far) >= 1.0 / 80.0);
    const double width = ols_prediction_interval(ols, far, 0.9).size();
    CHECK(width > last);
    last = width;
  }
}

TEST_CASE("prediction interval matches a brute-force computation") {
  const Dataset d = noisy_linear(50, 2, 12);
  const auto ols = fit_ols(d);
  Eigen::MatrixXd design(50, 3);
  design.col(0).setOnes();
  design.rightCols(2) = d.features();
  const Eigen::MatrixXd inv = oracle::gauss_jordan_inverse(design.transpose() * design);
  const Eigen::VectorXd beta = inv * design.transpose() * d.response();
  const double s2 = (d.response() - design * beta).squaredNorm() / 47.0;
  const std::vector<double> x = {0.3, -0.7};
  const Eigen::Vector3d xs(1.0, 0.3, -0.7);
  const double lev = xs.dot(inv * xs);
  const double t = oracle::t_quantile(0.975, 47.0);
  const double half = t * std::sqrt(s2 * (1.0 + lev));
  const auto iv = ols_prediction_interval(ols, x, 0.95);
  CHECK(iv.center() == doctest::Approx(xs.dot(beta)).epsilon(1e-10));
  CHECK(iv.size() / 2.0 == doctest::Approx(half).epsilon(1e-8));
}

TEST_CASE("rank deficiency and too few rows are rejected") {
  FeatureMatrix x(10, 2);
  for (Eigen::Index i = 0; i < 10; ++i) {
    x(i, 0) = static_cast<double>(i);
    x(i, 1) = 3.0 * static_cast<double>(i);
  }
  CHECK_THROWS_AS(fit_ols(Dataset(x, Eigen::VectorXd::Zero(10))), std::invalid_argument);
  CHECK_THROWS_AS(fit_ols(Dataset(x.topRows(3).leftCols(2), Eigen::VectorXd::Zero(3))), std::invalid_argument);
}
