#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bopi/intervals.hpp"
#include "bopi/loess.hpp"

namespace bopi {

/// Bounds on the number of prediction errors used for a tolerance interval.
inline constexpr std::size_t kMinLhnpeSize = 20;
inline constexpr std::size_t kMaxLhnpeSize = 10000;

struct FixedNeighborhood {
  std::size_t k = 40;
};

struct AdaptiveNeighborhood {
  std::size_t k_min = 30;
  std::size_t k_max = 50;
  std::size_t step = 1;
};

using Neighborhood = std::variant<FixedNeighborhood, AdaptiveNeighborhood>;

enum class NeighborhoodKind { Fixed, Adaptive };

struct LhnpeConfig {
  double gamma = 0.99;
  Neighborhood neighborhood = FixedNeighborhood{};

  [[nodiscard]] NeighborhoodKind kind() const noexcept {
    return std::holds_alternative<FixedNeighborhood>(neighborhood) ? NeighborhoodKind::Fixed
                                                                   : NeighborhoodKind::Adaptive;
  }
  [[nodiscard]] std::size_t smallest_k() const noexcept;
  [[nodiscard]] std::size_t largest_k() const noexcept;

  /// Throws std::invalid_argument unless 20 <= K <= N for every K used, the
  /// adaptive bounds are ordered and, unless `allow_beyond_loess`, no K exceeds
  /// k_loess. Gamma must lie in (0, 1).
  void validate(std::size_t n, std::size_t k_loess, bool allow_beyond_loess = false) const;
};

/// Copy of `cfg` with every K above 10000 lowered to 10000. A message is
/// appended to `warnings` when anything changed.
LhnpeConfig clamp_to_search_limit(LhnpeConfig cfg, std::vector<std::string>* warnings = nullptr);

/// Smallest admissible gamma for `k` prediction errors at content `beta`,
/// read from the containment table (beta is rounded up to the next tabulated
/// column; 0.7 when k is below every tabulated requirement).
double min_gamma_floor(Probability beta, std::size_t k);

/// Prediction errors of the k training rows nearest to x.
std::vector<double> eset(const ErrorSet& es, const Dataset& d, std::span<const double> x, std::size_t k);
std::vector<double> eset(const ErrorSet& es, const KnnIndex& index, std::span<const double> x, std::size_t k,
                         const Exclusion& exclusion = {});

/// Mean +/- Howe factor times the (K - 1) sd of the errors. Needs at least 20 errors.
Interval error_tolerance_interval(std::span<const double> errors, Probability beta, Probability gamma);

/// Tolerance factors for a fixed (beta, gamma) over a range of sample sizes.
class ToleranceFactorTable {
 public:
  ToleranceFactorTable(Probability beta, Probability gamma, std::size_t k_lo, std::size_t k_hi);
  [[nodiscard]] double operator()(std::size_t k) const { return factors_.at(k - k_lo_); }

 private:
  std::size_t k_lo_;
  std::vector<double> factors_;
};

struct ScanResult {
  Interval interval;  // tolerance interval of the errors, not yet shifted by fhat
  std::size_t k = 0;
};

/// Tolerance intervals of the first K entries of `ordered_errors` for K in the
/// neighborhood's range; returns the smallest one (ties keep the smaller K).
ScanResult tolerance_scan(std::span<const double> ordered_errors, const Neighborhood& nb,
                          const ToleranceFactorTable& factors);

Interval f_bopi_interval(const LoessModel& m, const ErrorSet& es, std::span<const double> x, Probability beta,
                         Probability gamma, FixedNeighborhood nb);

struct AdaptiveInterval {
  Interval interval;
  std::size_t chosen_k = 0;
};

AdaptiveInterval a_bopi_interval(const LoessModel& m, const ErrorSet& es, std::span<const double> x,
                                 Probability beta, Probability gamma, AdaptiveNeighborhood nb);

/// fhat +/- Z * RMSE(ErrorSet) at every query.
IntervalBand conventional_band(const LoessModel& m, const ErrorSet& es, const FeatureMatrix& queries,
                               Probability beta);

/// BOPI intervals for many queries with one configuration. Holds references
/// to the model and error set, which must outlive it.
class BopiPredictor {
 public:
  BopiPredictor(const LoessModel& model, const ErrorSet& errors, Probability beta, LhnpeConfig cfg,
                bool allow_beyond_loess = false);

  struct Prediction {
    Interval interval;
    double fhat = 0.0;
    std::size_t k = 0;
  };

  [[nodiscard]] Prediction predict(std::span<const double> x) const;
  [[nodiscard]] std::vector<Prediction> predict_all(const FeatureMatrix& queries) const;
  [[nodiscard]] const LhnpeConfig& config() const noexcept { return cfg_; }

 private:
  const LoessModel* model_;
  const ErrorSet* errors_;
  LhnpeConfig cfg_;
  ToleranceFactorTable factors_;
};

/// Training rows ordered by distance to each training row, the row itself
/// excluded, up to a fixed depth.
class TrainingNeighborhoods {
 public:
  TrainingNeighborhoods(const KnnIndex& index, const Dataset& d, std::size_t depth);

  [[nodiscard]] std::span<const std::size_t> of(std::size_t i) const {
    return {indices_.data() + i * depth_, depth_};
  }
  [[nodiscard]] std::size_t depth() const noexcept { return depth_; }
  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }

 private:
  std::size_t rows_;
  std::size_t depth_;
  std::vector<std::size_t> indices_;
};

struct TrainingScore {
  double coverage = 0.0;
  double mis = 0.0;
};

/// Coverage and mean interval size on the training rows: row i is covered
/// when its own cross-validated error lies in the tolerance interval built
/// from its neighbors' errors.
TrainingScore evaluate_on_training(const ErrorSet& es, const TrainingNeighborhoods& nbrs, Probability beta,
                                   const LhnpeConfig& cfg);

struct TuneOptions {
  std::vector<double> gamma_grid = {0.99, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.5};
  std::size_t k_step = 5;
  std::size_t fixed_k0 = 20;
  std::size_t adaptive_min0 = 20;
  std::size_t adaptive_max0 = 30;
  std::size_t adaptive_scan_step = 1;
  std::size_t outer_iterations = 3;
  /// Largest K tried; defaults to k_loess. Always limited by N - 1 and 10000.
  std::optional<std::size_t> k_cap;
};

struct TuneStep {
  LhnpeConfig config;
  TrainingScore score;
  bool accepted = false;
};

struct TuneResult {
  LhnpeConfig config;
  TrainingScore score;
  bool feasible = false;
  std::vector<TuneStep> trace;
  std::vector<std::string> warnings;
};

TuneResult tune_hyperparams(const ErrorSet& es, const TrainingNeighborhoods& nbrs, Probability beta,
                            NeighborhoodKind kind, std::size_t k_cap, const TuneOptions& options = {});

/// Fits loess with k_loess, computes the error set and tunes on it.
TuneResult tune_hyperparams(std::shared_ptr<const Dataset> data, std::size_t k_loess, Probability beta,
                            NeighborhoodKind kind, CvScheme scheme = CvScheme::k_fold(), std::uint64_t seed = 0,
                            TuneOptions options = {});

}  // namespace bopi
