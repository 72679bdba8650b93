#pragma once

// Distribution primitives: CDFs and quantiles of the standard normal,
// Student t and chi-square distributions.
//
// CDFs are built on the regularized incomplete gamma and beta functions
// (series / continued-fraction evaluation). Quantiles are obtained by a
// safeguarded Newton iteration inside a bracket, so every quantile is
// consistent with its CDF to ~1e-10 in the argument.

namespace bopi {

/// A probability strictly inside (0, 1). Construction throws
/// std::domain_error otherwise.
class Probability {
 public:
  Probability(double value);  // NOLINT(google-explicit-constructor)

  [[nodiscard]] double value() const noexcept { return value_; }
  [[nodiscard]] Probability complement() const { return Probability(1.0 - value_); }

  /// 1 - (1 - p) / 2, the upper quantile level of a two-sided p-content interval.
  [[nodiscard]] double two_sided_upper() const noexcept { return 1.0 - (1.0 - value_) / 2.0; }

  friend bool operator==(const Probability&, const Probability&) = default;

 private:
  double value_;
};

/// Degrees of freedom, at least one.
class DegreesOfFreedom {
 public:
  DegreesOfFreedom(long value);  // NOLINT(google-explicit-constructor)

  [[nodiscard]] long value() const noexcept { return value_; }

 private:
  long value_;
};

namespace special {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed directly.
double gamma_q(double a, double x);
/// Regularized incomplete beta I_x(a, b). `y` must equal 1 - x; passing it
/// separately keeps precision when x is close to 1.
double incomplete_beta(double a, double b, double x, double y);
double incomplete_beta(double a, double b, double x);

}  // namespace special

double std_normal_pdf(double x) noexcept;
double std_normal_cdf(double x) noexcept;
double std_normal_quantile(Probability p);

double student_t_pdf(double x, DegreesOfFreedom df);
double student_t_cdf(double x, DegreesOfFreedom df);
/// Upper tail P(T > x), accurate far into the tail.
double student_t_sf(double x, DegreesOfFreedom df);
double student_t_quantile(Probability p, DegreesOfFreedom df);

double chi_square_pdf(double x, DegreesOfFreedom df);
double chi_square_cdf(double x, DegreesOfFreedom df);
double chi_square_quantile(Probability p, DegreesOfFreedom df);

}  // namespace bopi
