#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "bopi/dataset.hpp"

namespace bopi {

struct Neighbor {
  std::size_t index;
  double distance;
};

/// Points skipped by a neighbor query: a held-out fold mask and/or one index.
struct Exclusion {
  std::span<const std::uint8_t> mask;  // nonzero entries are excluded; empty means none
  std::optional<std::size_t> single;

  [[nodiscard]] bool excludes(std::size_t i) const noexcept {
    return (single && *single == i) || (!mask.empty() && mask[i] != 0);
  }
};

/// Reference k-nearest-neighbor scan under Euclidean distance. Result is
/// ordered by (distance, index), so ties at the k-th distance keep the lowest
/// indices. Returns fewer than k entries only when fewer points are eligible.
std::vector<Neighbor> knn_brute_force(const FeatureMatrix& points, std::span<const double> query,
                                      std::size_t k, const Exclusion& exclusion = {});

/// Neighbor search over a fixed point set. The kd-tree backend returns exactly
/// the same ordered list as knn_brute_force. The point matrix must outlive the index.
class KnnIndex {
 public:
  enum class Backend { BruteForce, KdTree, Auto };

  explicit KnnIndex(const FeatureMatrix& points, Backend backend = Backend::Auto);
  ~KnnIndex();
  KnnIndex(KnnIndex&&) noexcept;
  KnnIndex& operator=(KnnIndex&&) noexcept;

  [[nodiscard]] std::vector<Neighbor> query(std::span<const double> x, std::size_t k,
                                            const Exclusion& exclusion = {}) const;

  [[nodiscard]] Backend backend() const noexcept { return backend_; }
  [[nodiscard]] std::size_t size() const noexcept;

 private:
  struct KdTree;
  const FeatureMatrix* points_;
  Backend backend_;
  std::unique_ptr<KdTree> tree_;
};

/// k nearest rows of `d` to `x`. Throws std::out_of_range unless 1 <= k <= N.
std::vector<Neighbor> knn(const Dataset& d, std::span<const double> x, std::size_t k);

}  // namespace bopi
