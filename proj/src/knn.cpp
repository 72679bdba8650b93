#include "bopi/knn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace bopi {
namespace {

using Candidate = std::pair<double, std::size_t>;  // (squared distance, index)

double squared_distance(const double* a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

std::vector<Neighbor> to_neighbors(const std::vector<Candidate>& sorted) {
  std::vector<Neighbor> out;
  out.reserve(sorted.size());
  for (const auto& [sq, idx] : sorted) out.push_back({idx, std::sqrt(sq)});
  return out;
}

void check_query(const FeatureMatrix& points, std::span<const double> query) {
  if (static_cast<Eigen::Index>(query.size()) != points.cols()) {
    throw std::invalid_argument("knn: query dimension does not match the point set");
  }
}

}  // namespace

std::vector<Neighbor> knn_brute_force(const FeatureMatrix& points, std::span<const double> query,
                                      std::size_t k, const Exclusion& exclusion) {
  check_query(points, query);
  const auto n = static_cast<std::size_t>(points.rows());
  const auto dim = static_cast<std::size_t>(points.cols());
  std::vector<Candidate> all;
  all.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (exclusion.excludes(i)) continue;
    all.emplace_back(squared_distance(points.data() + i * dim, query), i);
  }
  if (k < all.size()) {
    std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
    all.resize(k);
  }
  std::sort(all.begin(), all.end());
  return to_neighbors(all);
}

struct KnnIndex::KdTree {
  static constexpr std::size_t kLeafSize = 16;

  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t dim = 0;
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  const FeatureMatrix& points;
  std::size_t dims;
  std::vector<std::size_t> order;
  std::vector<Node> nodes;

  explicit KdTree(const FeatureMatrix& pts)
      : points(pts), dims(static_cast<std::size_t>(pts.cols())), order(static_cast<std::size_t>(pts.rows())) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    nodes.reserve(2 * order.size() / kLeafSize + 2);
    build(0, order.size());
  }

  double coord(std::size_t i, std::size_t j) const { return points.data()[i * dims + j]; }

  int build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({begin, end});
    if (end - begin <= kLeafSize || dims == 0) return id;

    std::size_t best_dim = 0;
    double best_spread = -1.0;
    for (std::size_t j = 0; j < dims; ++j) {
      double lo = coord(order[begin], j);
      double hi = lo;
      for (std::size_t r = begin + 1; r < end; ++r) {
        const double v = coord(order[r], j);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = j;
      }
    }
    if (best_spread <= 0.0) return id;  // all points identical

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(mid),
                     order.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return coord(a, best_dim) < coord(b, best_dim); });
    const double split = coord(order[mid], best_dim);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes[static_cast<std::size_t>(id)].dim = best_dim;
    nodes[static_cast<std::size_t>(id)].split = split;
    nodes[static_cast<std::size_t>(id)].left = left;
    nodes[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  // Max-heap on (squared distance, index) holding the best k candidates so far.
  void search(int id, std::span<const double> x, std::size_t k, const Exclusion& exclusion,
              std::vector<Candidate>& heap) const {
    const Node& node = nodes[static_cast<std::size_t>(id)];
    if (node.left < 0) {
      for (std::size_t r = node.begin; r < node.end; ++r) {
        const std::size_t i = order[r];
        if (exclusion.excludes(i)) continue;
        const Candidate c{squared_distance(points.data() + i * dims, x), i};
        if (heap.size() < k) {
          heap.push_back(c);
          std::push_heap(heap.begin(), heap.end());
        } else if (c < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = c;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = x[node.dim] - node.split;
    const int near = diff <= 0.0 ? node.left : node.right;
    const int far = diff <= 0.0 ? node.right : node.left;
    search(near, x, k, exclusion, heap);
    // Points across the plane are at least |diff| away; equality may still hold
    // a tie with a lower index, so only strictly farther planes are pruned.
    if (heap.size() < k || diff * diff <= heap.front().first) search(far, x, k, exclusion, heap);
  }
};

KnnIndex::KnnIndex(const FeatureMatrix& points, Backend backend) : points_(&points), backend_(backend) {
  if (backend_ == Backend::Auto) {
    backend_ = (points.rows() >= 128 && points.cols() <= 8) ? Backend::KdTree : Backend::BruteForce;
  }
  if (backend_ == Backend::KdTree) tree_ = std::make_unique<KdTree>(points);
}

KnnIndex::~KnnIndex() = default;
KnnIndex::KnnIndex(KnnIndex&&) noexcept = default;
KnnIndex& KnnIndex::operator=(KnnIndex&&) noexcept = default;

std::size_t KnnIndex::size() const noexcept { return static_cast<std::size_t>(points_->rows()); }

std::vector<Neighbor> KnnIndex::query(std::span<const double> x, std::size_t k,
                                      const Exclusion& exclusion) const {
  if (!tree_) return knn_brute_force(*points_, x, k, exclusion);
  check_query(*points_, x);
  std::vector<Candidate> heap;
  heap.reserve(k);
  if (k > 0) tree_->search(0, x, k, exclusion, heap);
  std::sort_heap(heap.begin(), heap.end());
  return to_neighbors(heap);
}

std::vector<Neighbor> knn(const Dataset& d, std::span<const double> x, std::size_t k) {
  if (k < 1 || k > d.rows()) throw std::out_of_range("knn: k must lie in [1, N]");
  return knn_brute_force(d.features(), x, k);
}

}  // namespace bopi
