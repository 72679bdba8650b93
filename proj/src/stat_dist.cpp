#include "bopi/stat_dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bopi {

Probability::Probability(double value) : value_(value) {
  if (!(value > 0.0 && value < 1.0)) {
    throw std::domain_error("probability must lie in (0, 1), got " + std::to_string(value));
  }
}

DegreesOfFreedom::DegreesOfFreedom(long value) : value_(value) {
  if (value < 1) {
    throw std::domain_error("degrees of freedom must be >= 1, got " + std::to_string(value));
  }
}

namespace special {
namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxTerms = 100000;

double gamma_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int n = 0; n < kMaxTerms; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) {
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw std::runtime_error("incomplete gamma series did not converge");
}

// Upper tail Q(a, x) by the Legendre continued fraction (modified Lentz).
double gamma_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) {
      return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    }
  }
  throw std::runtime_error("incomplete gamma continued fraction did not converge");
}

double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxTerms; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::domain_error("gamma_p: need a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return gamma_series(a, x);
  return 1.0 - gamma_continued_fraction(a, x);
}

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::domain_error("gamma_q: need a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_series(a, x);
  return gamma_continued_fraction(a, x);
}

double incomplete_beta(double a, double b, double x, double y) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("incomplete_beta: need a, b > 0");
  if (x < 0.0 || y < 0.0) throw std::domain_error("incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (y == 0.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

double incomplete_beta(double a, double b, double x) { return incomplete_beta(a, b, x, 1.0 - x); }

}  // namespace special

namespace {

constexpr int kMaxSolveIterations = 200;
constexpr double kSolveTolerance = 1e-10;

// Finds the root of an increasing function f inside [lo, hi] with f(lo) <= 0 <= f(hi),
// taking Newton steps when they stay inside the bracket and bisecting otherwise.
template <class F, class D>
double solve_increasing(F f, D derivative, double lo, double hi, double x) {
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
  for (int it = 0; it < kMaxSolveIterations; ++it) {
    const double fx = f(x);
    if (fx == 0.0) return x;
    if (fx < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double slope = derivative(x);
    double next = x - fx / slope;
    if (!(slope > 0.0) || !std::isfinite(next) || next <= lo || next >= hi) {
      next = 0.5 * (lo + hi);
    }
    const double tol = kSolveTolerance * std::max(1.0, std::fabs(x));
    if (std::fabs(next - x) <= tol || hi - lo <= tol) return next;
    x = next;
  }
  throw std::runtime_error("quantile solve did not converge (internal error)");
}

// Acklam's rational approximation; used as the starting point for refinement.
double normal_quantile_guess(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// P(T <= -|x|) for Student t.
double student_t_lower_tail(double x, double v) {
  const double t2 = x * x;
  return 0.5 * special::incomplete_beta(v / 2.0, 0.5, v / (v + t2), t2 / (v + t2));
}

}  // namespace

double std_normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_quantile(Probability prob) {
  const double p = prob.value();
  if (p == 0.5) return 0.0;
  if (p > 0.5) return -std_normal_quantile(Probability(1.0 - p));
  return solve_increasing([p](double x) { return std_normal_cdf(x) - p; }, std_normal_pdf, -40.0,
                          0.0, normal_quantile_guess(p));
}

double student_t_pdf(double x, DegreesOfFreedom df) {
  const double v = static_cast<double>(df.value());
  return std::exp(std::lgamma((v + 1.0) / 2.0) - std::lgamma(v / 2.0) -
                  0.5 * std::log(v * std::numbers::pi) - (v + 1.0) / 2.0 * std::log1p(x * x / v));
}

double student_t_cdf(double x, DegreesOfFreedom df) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  const double tail = student_t_lower_tail(x, static_cast<double>(df.value()));
  return x < 0.0 ? tail : 1.0 - tail;
}

double student_t_sf(double x, DegreesOfFreedom df) { return student_t_cdf(-x, df); }

double student_t_quantile(Probability prob, DegreesOfFreedom df) {
  const double p = prob.value();
  if (p == 0.5) return 0.0;
  if (p > 0.5) return -student_t_quantile(Probability(1.0 - p), df);
  const double v = static_cast<double>(df.value());
  double lo = std::min(-1.0, 2.0 * std_normal_quantile(prob));
  while (student_t_lower_tail(lo, v) > p) {
    lo *= 2.0;
    if (!std::isfinite(lo)) throw std::runtime_error("student_t_quantile: bracket overflow");
  }
  return solve_increasing([&](double x) { return student_t_lower_tail(x, v) - p; },
                          [&](double x) { return student_t_pdf(x, df); }, lo, 0.0,
                          std_normal_quantile(prob));
}

double chi_square_pdf(double x, DegreesOfFreedom df) {
  const double k = static_cast<double>(df.value());
  if (x < 0.0) return 0.0;
  if (x == 0.0) {
    if (df.value() == 2) return 0.5;
    return df.value() < 2 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return std::exp((k / 2.0 - 1.0) * std::log(x) - x / 2.0 - k / 2.0 * std::numbers::ln2 -
                  std::lgamma(k / 2.0));
}

double chi_square_cdf(double x, DegreesOfFreedom df) {
  if (x <= 0.0) return 0.0;
  return special::gamma_p(static_cast<double>(df.value()) / 2.0, x / 2.0);
}

double chi_square_quantile(Probability prob, DegreesOfFreedom df) {
  const double p = prob.value();
  const double k = static_cast<double>(df.value());
  const double a = k / 2.0;
  double hi = std::max(k, 1.0);
  while (special::gamma_p(a, hi / 2.0) < p) hi *= 2.0;

  // Wilson-Hilferty starting point.
  const double z = std_normal_quantile(prob);
  const double h = 2.0 / (9.0 * k);
  const double guess = k * std::pow(std::max(1.0 - h + z * std::sqrt(h), 0.0), 3);
  const auto density = [&](double x) { return chi_square_pdf(x, df); };

  // Solve against whichever tail is smaller so the residual keeps its precision.
  if (p <= 0.5) {
    return solve_increasing([&](double x) { return special::gamma_p(a, x / 2.0) - p; }, density,
                            0.0, hi, guess);
  }
  const double q = 1.0 - p;
  return solve_increasing([&](double x) { return q - special::gamma_q(a, x / 2.0); }, density, 0.0,
                          hi, guess);
}

}  // namespace bopi
