#include "bopi/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bopi {
namespace {

void require_sample_size(long n) {
  if (n < 2) throw std::domain_error("interval constructors need n >= 2");
}

}  // namespace

SampleSummary::SampleSummary(double mean, double sd, long n) : mean_(mean), sd_(sd), n_(n) {
  if (!(sd >= 0.0)) throw std::domain_error("sample sd must be nonnegative");
  require_sample_size(n);
}

SampleSummary SampleSummary::of(std::span<const double> values) {
  const auto n = static_cast<long>(values.size());
  require_sample_size(n);
  // Welford update keeps the variance stable for large offsets.
  double mean = 0.0;
  double m2 = 0.0;
  long k = 0;
  for (double v : values) {
    ++k;
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (v - mean);
  }
  return {mean, std::sqrt(std::max(m2, 0.0) / static_cast<double>(n - 1)), n};
}

double prediction_factor(long n, Probability beta) {
  require_sample_size(n);
  const double t = student_t_quantile(beta.two_sided_upper(), n - 1);
  return t * std::sqrt(1.0 + 1.0 / static_cast<double>(n));
}

Interval normal_prediction_interval(const SampleSummary& s, Probability beta) {
  return Interval::centered(s.mean(), prediction_factor(s.n(), beta) * s.sd());
}

double tolerance_factor(long n, Probability beta, Probability gamma) {
  require_sample_size(n);
  const double nd = static_cast<double>(n);
  const double z = std_normal_quantile(beta.two_sided_upper());
  const double chi2 = chi_square_quantile(gamma.complement(), n - 1);
  return std::sqrt((nd - 1.0) * (1.0 + 1.0 / nd) * z * z / chi2);
}

Interval normal_tolerance_interval(const SampleSummary& s, Probability beta, Probability gamma) {
  return Interval::centered(s.mean(), tolerance_factor(s.n(), beta, gamma) * s.sd());
}

double tolerance_prediction_ratio(long n, Probability beta, Probability gamma) {
  require_sample_size(n);
  const double level = beta.two_sided_upper();
  const double z = std_normal_quantile(level);
  const double t = student_t_quantile(level, n - 1);
  const double chi2 = chi_square_quantile(gamma.complement(), n - 1);
  return z * std::sqrt(static_cast<double>(n - 1)) / (t * std::sqrt(chi2));
}

std::optional<long> min_n_for_containment(Probability beta, Probability gamma,
                                          std::span<const long> grid) {
  for (long n : grid) {
    if (tolerance_prediction_ratio(n, beta, gamma) >= 1.0) return n;
  }
  return std::nullopt;
}

std::vector<long> containment_table_grid() { return {20, 40, 50, 80, 100, 350}; }

std::vector<long> containment_fine_grid() {
  std::vector<long> grid;
  for (long n = 20; n <= 10000; n += 5) grid.push_back(n);
  return grid;
}

Interval conventional_interval(double fhat, double rmse, Probability beta) {
  if (!(rmse >= 0.0)) throw std::domain_error("rmse must be nonnegative");
  return Interval::centered(fhat, std_normal_quantile(beta.two_sided_upper()) * rmse);
}

}  // namespace bopi
