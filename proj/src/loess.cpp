#include "bopi/loess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "bopi/parallel.hpp"
#include "bopi/random.hpp"

namespace bopi {
namespace {

constexpr double kFullRankRcond = 1e-12;
constexpr double kRidgeRcond = 1e-15;
constexpr double kRidgeScale = 1e-8;

}  // namespace

std::vector<double> tricube_weights(std::span<const double> distances, double bandwidth) {
  if (!(bandwidth > 0.0)) throw std::domain_error("tricube bandwidth must be positive");
  std::vector<double> w(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const double u = distances[i] / bandwidth;
    if (u < 1.0) {
      const double t = 1.0 - u * u * u;
      w[i] = t * t * t;
    } else {
      w[i] = 0.0;
    }
  }
  return w;
}

LoessModel::LoessModel(std::shared_ptr<const Dataset> data, std::size_t k_loess, Kernel kernel,
                       KnnIndex::Backend backend)
    : data_(std::move(data)),
      k_loess_(k_loess),
      kernel_(kernel),
      index_((data_ ? data_->features() : throw std::invalid_argument("LoessModel: null dataset")),
             backend) {
  const std::size_t p = data_->feature_count() + 1;
  if (k_loess_ < p + 1 || k_loess_ > data_->rows()) {
    throw std::invalid_argument("k_loess must lie in [p + 1, N] = [" + std::to_string(p + 1) + ", " +
                                std::to_string(data_->rows()) + "], got " + std::to_string(k_loess_));
  }
}

LocalFit LoessModel::fit_local(std::span<const double> x, const Exclusion& exclusion) const {
  const auto neighbors = index_.query(x, k_loess_, exclusion);
  if (neighbors.empty()) throw std::invalid_argument("fit_local: no eligible training rows");

  const std::size_t m = neighbors.size();
  const std::size_t d = data_->feature_count();
  const std::size_t p = d + 1;

  LocalFit fit;
  fit.neighbor_indices.resize(m);
  std::vector<double> distances(m);
  for (std::size_t r = 0; r < m; ++r) {
    fit.neighbor_indices[r] = neighbors[r].index;
    distances[r] = neighbors[r].distance;
  }
  const double bandwidth = distances.back();
  fit.weights = bandwidth > 0.0 ? tricube_weights(distances, bandwidth) : std::vector<double>(m, 0.0);
  double weight_sum = std::accumulate(fit.weights.begin(), fit.weights.end(), 0.0);
  if (!(weight_sum > 0.0)) {
    // Every neighbor sits on the boundary or on the query itself.
    std::fill(fit.weights.begin(), fit.weights.end(), 1.0);
    weight_sum = static_cast<double>(m);
  }

  const auto& y = data_->response();
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  Eigen::VectorXd z(static_cast<Eigen::Index>(p));
  for (std::size_t r = 0; r < m; ++r) {
    const double w = fit.weights[r];
    if (w == 0.0) continue;
    const auto row = data_->row(fit.neighbor_indices[r]);
    z(0) = 1.0;
    for (std::size_t j = 0; j < d; ++j) z(static_cast<Eigen::Index>(j + 1)) = row[j] - x[j];
    normal.selfadjointView<Eigen::Lower>().rankUpdate(z, w);
    rhs += (w * y(static_cast<Eigen::Index>(fit.neighbor_indices[r]))) * z;
  }
  normal = normal.selfadjointView<Eigen::Lower>();

  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() == Eigen::Success && llt.rcond() > kFullRankRcond) {
    fit.coefficients = llt.solve(rhs);
    fit.status = FitStatus::Full;
    return fit;
  }
  const double jitter = kRidgeScale * normal.trace() / static_cast<double>(p);
  if (jitter > 0.0) {
    normal.diagonal().array() += jitter;
    llt.compute(normal);
    if (llt.info() == Eigen::Success && llt.rcond() > kRidgeRcond) {
      fit.coefficients = llt.solve(rhs);
      fit.status = FitStatus::Ridge;
      return fit;
    }
  }
  fit.coefficients = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  double weighted = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    weighted += fit.weights[r] * y(static_cast<Eigen::Index>(fit.neighbor_indices[r]));
  }
  fit.coefficients(0) = weighted / weight_sum;
  fit.status = FitStatus::Constant;
  return fit;
}

double LoessModel::predict(std::span<const double> x, const Exclusion& exclusion) const {
  return fit_local(x, exclusion).prediction();
}

Eigen::VectorXd LoessModel::predict_all(const FeatureMatrix& queries) const {
  Eigen::VectorXd out(queries.rows());
  const auto cols = static_cast<std::size_t>(queries.cols());
  parallel_for(static_cast<std::size_t>(queries.rows()), [&](std::size_t i) {
    out(static_cast<Eigen::Index>(i)) = predict({queries.data() + i * cols, cols});
  });
  return out;
}

double ErrorSet::rmse() const {
  if (errors.empty()) throw std::invalid_argument("rmse of an empty error set");
  double ss = 0.0;
  for (double e : errors) ss += e * e;
  return std::sqrt(ss / static_cast<double>(errors.size()));
}

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold cross validation needs k >= 2");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold[order[pos]] = pos % k;
  return fold;
}

ErrorSet cv_prediction_errors(const LoessModel& model, CvScheme scheme, std::uint64_t seed) {
  const Dataset& data = model.data();
  const std::size_t n = data.rows();
  if (n < 2) throw std::invalid_argument("cross validation needs at least two rows");
  const auto& y = data.response();

  ErrorSet out;
  out.scheme = scheme;
  out.errors.resize(n);

  if (scheme.kind == CvScheme::Kind::LeaveOneOut) {
    out.fold_of.resize(n);
    std::iota(out.fold_of.begin(), out.fold_of.end(), std::size_t{0});
    parallel_for(n, [&](std::size_t i) {
      Exclusion self;
      self.single = i;
      out.errors[i] = y(static_cast<Eigen::Index>(i)) - model.predict(data.row(i), self);
    });
    return out;
  }

  const std::size_t k = std::min(scheme.folds, n);
  out.scheme.folds = k;
  out.fold_of = assign_folds(n, k, seed);
  std::vector<std::vector<std::uint8_t>> masks(k, std::vector<std::uint8_t>(n, 0));
  for (std::size_t i = 0; i < n; ++i) masks[out.fold_of[i]][i] = 1;
  parallel_for(n, [&](std::size_t i) {
    Exclusion held_out;
    held_out.mask = masks[out.fold_of[i]];
    out.errors[i] = y(static_cast<Eigen::Index>(i)) - model.predict(data.row(i), held_out);
  });
  return out;
}

double cv_score(std::shared_ptr<const Dataset> data, std::size_t k_loess, CvScheme scheme,
                std::uint64_t seed) {
  const LoessModel model(std::move(data), k_loess);
  const auto es = cv_prediction_errors(model, scheme, seed);
  double ss = 0.0;
  for (double e : es.errors) ss += e * e;
  return ss;
}

std::size_t select_bandwidth(std::shared_ptr<const Dataset> data, std::span<const std::size_t> k_grid,
                             CvScheme scheme, std::uint64_t seed) {
  if (k_grid.empty()) throw std::invalid_argument("select_bandwidth: empty grid");
  std::vector<std::size_t> grid(k_grid.begin(), k_grid.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const auto& y = data->response();
  const double spread = (y.array() - y.mean()).square().sum();
  std::size_t best_k = grid.front();
  double best = cv_score(data, best_k, scheme, seed);
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double score = cv_score(data, grid[g], scheme, seed);
    // Scores equal up to rounding count as ties and keep the smaller k.
    const double tie_band = 1e-10 * best + 1e-20 * spread;
    if (score < best - tie_band) {
      best = score;
      best_k = grid[g];
    }
  }
  return best_k;
}

}  // namespace bopi
