#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bopi/dataset.hpp"
#include "bopi/knn.hpp"

namespace bopi {

enum class Kernel { Tricube };

/// Tricube weights (1 - (d/b)^3)^3 for d < b, zero otherwise. The 1/b kernel
/// normalization is omitted since weighted least squares is invariant to it.
std::vector<double> tricube_weights(std::span<const double> distances, double bandwidth);

enum class FitStatus {
  Full,      // weighted normal equations solved as is
  Ridge,     // solved after adding diagonal jitter
  Constant,  // fell back to the weighted mean (degree-0 fit)
};

struct LocalFit {
  /// Intercept followed by slopes, in coordinates centered at the query.
  Eigen::VectorXd coefficients;
  std::vector<std::size_t> neighbor_indices;
  std::vector<double> weights;
  FitStatus status = FitStatus::Full;

  [[nodiscard]] double prediction() const { return coefficients(0); }
};

/// Degree-one loess: each query is fitted by tricube-weighted least squares on
/// its k_loess nearest training rows, with the bandwidth set to the distance of
/// the k-th neighbor. Immutable after construction.
class LoessModel {
 public:
  LoessModel(std::shared_ptr<const Dataset> data, std::size_t k_loess, Kernel kernel = Kernel::Tricube,
             KnnIndex::Backend backend = KnnIndex::Backend::Auto);

  [[nodiscard]] const Dataset& data() const noexcept { return *data_; }
  [[nodiscard]] std::shared_ptr<const Dataset> data_ptr() const noexcept { return data_; }
  [[nodiscard]] const KnnIndex& index() const noexcept { return index_; }
  [[nodiscard]] std::size_t k_loess() const noexcept { return k_loess_; }
  [[nodiscard]] Kernel kernel() const noexcept { return kernel_; }
  /// Number of coefficients in a local fit (features + intercept).
  [[nodiscard]] std::size_t coefficient_count() const noexcept { return data_->feature_count() + 1; }

  /// Fits at `x` using the k_loess nearest rows not excluded. When fewer rows
  /// are eligible, all eligible rows are used.
  [[nodiscard]] LocalFit fit_local(std::span<const double> x, const Exclusion& exclusion = {}) const;
  [[nodiscard]] double predict(std::span<const double> x, const Exclusion& exclusion = {}) const;
  [[nodiscard]] Eigen::VectorXd predict_all(const FeatureMatrix& queries) const;

 private:
  std::shared_ptr<const Dataset> data_;
  std::size_t k_loess_;
  Kernel kernel_;
  KnnIndex index_;
};

struct CvScheme {
  enum class Kind { LeaveOneOut, KFold };
  Kind kind = Kind::KFold;
  std::size_t folds = 10;

  static CvScheme leave_one_out() { return {Kind::LeaveOneOut, 0}; }
  static CvScheme k_fold(std::size_t k = 10) { return {Kind::KFold, k}; }
};

/// Cross-validated prediction errors y_i - fhat^{-i}(x_i), one per training row.
struct ErrorSet {
  std::vector<double> errors;
  CvScheme scheme;
  /// Fold of each row (row index itself under leave-one-out).
  std::vector<std::size_t> fold_of;

  [[nodiscard]] std::size_t size() const noexcept { return errors.size(); }
  [[nodiscard]] double rmse() const;
};

/// Deterministic fold assignment: a seeded shuffle dealt round-robin into k folds.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k, std::uint64_t seed);

ErrorSet cv_prediction_errors(const LoessModel& model, CvScheme scheme = CvScheme::k_fold(),
                              std::uint64_t seed = 0);

/// Sum of squared cross-validated errors for a neighborhood size.
double cv_score(std::shared_ptr<const Dataset> data, std::size_t k_loess, CvScheme scheme,
                std::uint64_t seed);

/// Grid value of k_loess with the smallest cross-validated SSE; ties go to the
/// smallest k.
std::size_t select_bandwidth(std::shared_ptr<const Dataset> data, std::span<const std::size_t> k_grid,
                             CvScheme scheme = CvScheme::k_fold(), std::uint64_t seed = 0);

}  // namespace bopi
