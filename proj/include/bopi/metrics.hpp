#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bopi/intervals.hpp"

namespace bopi {

/// Fraction of responses inside their intervals; bounds count as inside.
double coverage(const IntervalBand& band, std::span<const double> y);

struct SizeSummary {
  double mean = 0.0;
  double sd = 0.0;  // (n - 1) denominator; 0 for a single interval
};

SizeSummary mis(const IntervalBand& band);
std::vector<double> interval_sizes(const IntervalBand& band);

/// Standard deviation of the normal law whose central `cover` interval has
/// width `mis_value`: mis / (2 Z_{1-(1-cover)/2}). Undefined for cover 0 or 1.
double egsd(double mis_value, double cover);

/// Each value divided by the largest one.
std::vector<double> normalize_egsd(std::span<const double> values);

/// Smallest observed coverage compatible with a true coverage of beta for n
/// held-out points under a one-sided score test at level alpha:
/// beta - Z_{1-alpha} sqrt(beta (1 - beta) / n).
double wilson_critical(Probability beta, std::size_t n, double alpha = 0.05);

enum class Significance { None, P05, P01, P001 };

std::string stars(Significance s);

struct PairedTTest {
  double t = 0.0;
  double p_value = 1.0;
  Significance significance = Significance::None;
};

/// Two-sided paired t-test on a - b. Identical inputs give p = 1; a constant
/// nonzero difference is an exact rejection (p = 0).
PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b);

/// Held-out intervals of one method on one dataset.
struct MethodOutcome {
  std::string method;
  IntervalBand band;
};

struct EvaluationReport {
  std::string dataset;
  std::string method;
  double beta = 0.0;
  double coverage = 0.0;
  double mis = 0.0;
  double sigma_is = 0.0;
  double wilson_critical = 0.0;
  bool reliable = false;
  std::optional<double> egsd;
  std::optional<double> egsd_normalized;
  Significance significance = Significance::None;
};

/// One report per method. The reliable method with the smallest MIS is marked
/// with the significance of a paired t-test of its interval sizes against the
/// next most efficient reliable method.
std::vector<EvaluationReport> build_reports(const std::string& dataset, Probability beta,
                                            const std::vector<MethodOutcome>& outcomes, std::span<const double> y);

}  // namespace bopi
