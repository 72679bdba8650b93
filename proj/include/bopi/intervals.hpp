#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bopi/stat_dist.hpp"

namespace bopi {

/// A closed interval [lower, upper] in response units.
struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  static Interval centered(double center, double half_width) {
    return {center - half_width, center + half_width};
  }

  [[nodiscard]] double size() const noexcept { return upper - lower; }
  [[nodiscard]] double center() const noexcept { return 0.5 * (lower + upper); }
  /// Bounds are inclusive: a response sitting exactly on a bound is covered.
  [[nodiscard]] bool contains(double y) const noexcept { return lower <= y && y <= upper; }
  [[nodiscard]] Interval shifted(double offset) const noexcept {
    return {lower + offset, upper + offset};
  }
};

using IntervalBand = std::vector<Interval>;

/// Mean, sample standard deviation and size of a univariate sample.
class SampleSummary {
 public:
  SampleSummary(double mean, double sd, long n);

  /// Mean and (n - 1)-denominator standard deviation of `values`.
  static SampleSummary of(std::span<const double> values);

  [[nodiscard]] double mean() const noexcept { return mean_; }
  [[nodiscard]] double sd() const noexcept { return sd_; }
  [[nodiscard]] long n() const noexcept { return n_; }

 private:
  double mean_;
  double sd_;
  long n_;
};

/// Coefficient of the sample sd in the two-sided beta-content normal prediction
/// interval: t_{1-(1-beta)/2, n-1} * sqrt(1 + 1/n).
double prediction_factor(long n, Probability beta);
Interval normal_prediction_interval(const SampleSummary& s, Probability beta);

/// Howe's two-sided gamma-coverage beta-content tolerance factor
/// sqrt((n-1)(1+1/n) Z^2_{1-(1-beta)/2} / chi^2_{1-gamma, n-1}).
double tolerance_factor(long n, Probability beta, Probability gamma);
Interval normal_tolerance_interval(const SampleSummary& s, Probability beta, Probability gamma);

/// Ratio of tolerance to prediction interval size for a normal sample of size n.
/// A value >= 1 means the tolerance interval contains the prediction interval.
double tolerance_prediction_ratio(long n, Probability beta, Probability gamma);

/// Smallest grid value n with tolerance_prediction_ratio(n, beta, gamma) >= 1.
/// The grid must be nonempty and ascending.
std::optional<long> min_n_for_containment(Probability beta, Probability gamma,
                                          std::span<const long> grid);

/// Sample sizes that appear in the published containment table, plus 20.
std::vector<long> containment_table_grid();
/// 20, 25, ..., 10000 for exploratory searches.
std::vector<long> containment_fine_grid();

/// fhat +/- Z_{1-(1-beta)/2} * rmse. The width does not depend on sample size.
Interval conventional_interval(double fhat, double rmse, Probability beta);

}  // namespace bopi
