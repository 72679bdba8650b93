#include "bopi/ols.hpp"

#include <cmath>
#include <stdexcept>

namespace bopi {
namespace {

Eigen::VectorXd augmented(std::span<const double> x, Eigen::Index p) {
  if (static_cast<Eigen::Index>(x.size()) + 1 != p) {
    throw std::invalid_argument("OLS query has the wrong number of features");
  }
  Eigen::VectorXd z(p);
  z(0) = 1.0;
  for (std::size_t j = 0; j < x.size(); ++j) z(static_cast<Eigen::Index>(j + 1)) = x[j];
  return z;
}

}  // namespace

double OlsModel::predict(std::span<const double> x) const {
  return coefficients.dot(augmented(x, coefficients.size()));
}

double OlsModel::leverage(std::span<const double> x) const {
  const Eigen::VectorXd z = augmented(x, coefficients.size());
  return z.dot(gram_inverse * z);
}

OlsModel fit_ols(const Dataset& d) {
  const auto n = static_cast<Eigen::Index>(d.rows());
  const auto p = static_cast<Eigen::Index>(d.feature_count() + 1);
  if (n <= p) throw std::invalid_argument("OLS needs more rows than parameters");

  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  design.rightCols(p - 1) = d.features();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p) throw std::invalid_argument("OLS design matrix is rank deficient");

  OlsModel out;
  out.coefficients = qr.solve(d.response());
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  // X P = Q R, so (X^T X)^{-1} = P R^{-1} R^{-T} P^T.
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  out.gram_inverse = qr.colsPermutation() * inner * qr.colsPermutation().transpose();
  out.rows = d.rows();
  out.sigma2 = (d.response() - design * out.coefficients).squaredNorm() / static_cast<double>(n);
  return out;
}

Interval ols_prediction_interval(const OlsModel& ols, std::span<const double> x, Probability beta) {
  const auto n = static_cast<long>(ols.rows);
  const auto p = static_cast<long>(ols.parameter_count());
  const double scale = std::sqrt(static_cast<double>(n) * ols.sigma2 / static_cast<double>(n - p) *
                                 (1.0 + ols.leverage(x)));
  const double t = student_t_quantile(beta.two_sided_upper(), n - p);
  return Interval::centered(ols.predict(x), t * scale);
}

}  // namespace bopi
