#include "bopi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bopi {

double coverage(const IntervalBand& band, std::span<const double> y) {
  if (band.size() != y.size()) throw std::invalid_argument("coverage: band and responses differ in length");
  if (band.empty()) throw std::invalid_argument("coverage of an empty band");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < band.size(); ++i) hits += band[i].contains(y[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(band.size());
}

std::vector<double> interval_sizes(const IntervalBand& band) {
  std::vector<double> out;
  out.reserve(band.size());
  for (const auto& iv : band) out.push_back(iv.size());
  return out;
}

SizeSummary mis(const IntervalBand& band) {
  if (band.empty()) throw std::invalid_argument("mean interval size of an empty band");
  const auto sizes = interval_sizes(band);
  if (sizes.size() == 1) return {sizes.front(), 0.0};
  const SampleSummary s = SampleSummary::of(sizes);
  return {s.mean(), s.sd()};
}

double egsd(double mis_value, double cover) {
  if (!(cover > 0.0 && cover < 1.0)) throw std::domain_error("EGSD is undefined for coverage 0 or 1");
  if (mis_value < 0.0) throw std::domain_error("EGSD needs a nonnegative mean interval size");
  return mis_value / (2.0 * std_normal_quantile(Probability(cover).two_sided_upper()));
}

std::vector<double> normalize_egsd(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("normalize_egsd: no values");
  const double top = *std::max_element(values.begin(), values.end());
  if (!(top > 0.0)) throw std::domain_error("normalize_egsd: values must be positive");
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(v / top);
  return out;
}

double wilson_critical(Probability beta, std::size_t n, double alpha) {
  if (n == 0) throw std::domain_error("wilson_critical needs n >= 1");
  const double z = std_normal_quantile(Probability(alpha).complement());
  const double b = beta.value();
  return b - z * std::sqrt(b * (1.0 - b) / static_cast<double>(n));
}

std::string stars(Significance s) {
  switch (s) {
    case Significance::P001: return "***";
    case Significance::P01: return "**";
    case Significance::P05: return "*";
    case Significance::None: break;
  }
  return "";
}

PairedTTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired t-test: samples differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired t-test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const SampleSummary s = SampleSummary::of(d);
  PairedTTest out;
  if (s.sd() == 0.0) {
    if (s.mean() == 0.0) return out;
    out.t = std::copysign(std::numeric_limits<double>::infinity(), s.mean());
    out.p_value = 0.0;
  } else {
    out.t = s.mean() / (s.sd() / std::sqrt(static_cast<double>(s.n())));
    out.p_value = std::min(1.0, 2.0 * student_t_sf(std::fabs(out.t), s.n() - 1));
  }
  if (out.p_value < 0.001) {
    out.significance = Significance::P001;
  } else if (out.p_value < 0.01) {
    out.significance = Significance::P01;
  } else if (out.p_value < 0.05) {
    out.significance = Significance::P05;
  }
  return out;
}

std::vector<EvaluationReport> build_reports(const std::string& dataset, Probability beta,
                                            const std::vector<MethodOutcome>& outcomes, std::span<const double> y) {
  std::vector<EvaluationReport> reports;
  reports.reserve(outcomes.size());
  const double critical = wilson_critical(beta, y.size());
  for (const auto& o : outcomes) {
    EvaluationReport r;
    r.dataset = dataset;
    r.method = o.method;
    r.beta = beta.value();
    r.coverage = coverage(o.band, y);
    const SizeSummary sizes = mis(o.band);
    r.mis = sizes.mean;
    r.sigma_is = sizes.sd;
    r.wilson_critical = critical;
    r.reliable = r.coverage >= critical;
    if (r.coverage > 0.0 && r.coverage < 1.0 && r.mis > 0.0) r.egsd = egsd(r.mis, r.coverage);
    reports.push_back(r);
  }

  double top = 0.0;
  for (const auto& r : reports) {
    if (r.egsd) top = std::max(top, *r.egsd);
  }
  for (auto& r : reports) {
    if (r.egsd && top > 0.0) r.egsd_normalized = *r.egsd / top;
  }

  std::vector<std::size_t> reliable;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (reports[i].reliable) reliable.push_back(i);
  }
  std::stable_sort(reliable.begin(), reliable.end(),
                   [&](std::size_t a, std::size_t b) { return reports[a].mis < reports[b].mis; });
  if (reliable.size() >= 2 && y.size() >= 2) {
    const auto best = interval_sizes(outcomes[reliable[0]].band);
    const auto second = interval_sizes(outcomes[reliable[1]].band);
    reports[reliable[0]].significance = paired_t_test(best, second).significance;
  }
  return reports;
}

}  // namespace bopi
