#include "bopi/bopi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bopi/parallel.hpp"

namespace bopi {
namespace {

// Smallest sample size for which the gamma tolerance interval contains the
// beta prediction interval. Rows: gamma; columns: beta.
constexpr std::array<double, 4> kFloorGammas = {0.55, 0.6, 0.65, 0.7};
constexpr std::array<double, 4> kFloorBetas = {0.8, 0.9, 0.95, 0.99};
constexpr std::array<std::array<std::size_t, 4>, 4> kFloorSizes = {{
    {20, 50, 100, 350},
    {20, 20, 50, 80},
    {20, 20, 20, 40},
    {20, 20, 20, 20},
}};

std::vector<std::size_t> scan_sizes(const Neighborhood& nb) {
  if (const auto* f = std::get_if<FixedNeighborhood>(&nb)) return {f->k};
  const auto& a = std::get<AdaptiveNeighborhood>(nb);
  std::vector<std::size_t> sizes;
  for (std::size_t k = a.k_min; k <= a.k_max; k += a.step) sizes.push_back(k);
  if (sizes.empty() || sizes.back() != a.k_max) sizes.push_back(a.k_max);
  return sizes;
}

std::string describe(const LhnpeConfig& cfg) {
  if (const auto* f = std::get_if<FixedNeighborhood>(&cfg.neighborhood)) return "K=" + std::to_string(f->k);
  const auto& a = std::get<AdaptiveNeighborhood>(cfg.neighborhood);
  return "K=[" + std::to_string(a.k_min) + "," + std::to_string(a.k_max) + "]";
}

LhnpeConfig with_k_shift(const LhnpeConfig& cfg, std::size_t shift) {
  LhnpeConfig out = cfg;
  if (auto* f = std::get_if<FixedNeighborhood>(&out.neighborhood)) {
    f->k += shift;
  } else {
    auto& a = std::get<AdaptiveNeighborhood>(out.neighborhood);
    a.k_min += shift;
    a.k_max += shift;
  }
  return out;
}

}  // namespace

std::size_t LhnpeConfig::smallest_k() const noexcept {
  if (const auto* f = std::get_if<FixedNeighborhood>(&neighborhood)) return f->k;
  return std::get<AdaptiveNeighborhood>(neighborhood).k_min;
}

std::size_t LhnpeConfig::largest_k() const noexcept {
  if (const auto* f = std::get_if<FixedNeighborhood>(&neighborhood)) return f->k;
  return std::get<AdaptiveNeighborhood>(neighborhood).k_max;
}

void LhnpeConfig::validate(std::size_t n, std::size_t k_loess, bool allow_beyond_loess) const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (const auto* a = std::get_if<AdaptiveNeighborhood>(&neighborhood)) {
    if (a->k_min > a->k_max) throw std::invalid_argument("k_min must not exceed k_max");
    if (a->step == 0) throw std::invalid_argument("adaptive scan step must be positive");
  }
  const std::size_t lo = smallest_k();
  const std::size_t hi = largest_k();
  if (lo < kMinLhnpeSize) {
    throw std::invalid_argument("LHNPE neighborhoods need at least 20 points, got " + std::to_string(lo));
  }
  if (hi > n) {
    throw std::invalid_argument("LHNPE neighborhood " + std::to_string(hi) + " exceeds the " +
                                std::to_string(n) + " training rows");
  }
  if (!allow_beyond_loess && hi > k_loess) {
    throw std::invalid_argument("LHNPE neighborhood " + std::to_string(hi) + " exceeds k_loess " +
                                std::to_string(k_loess));
  }
}

LhnpeConfig clamp_to_search_limit(LhnpeConfig cfg, std::vector<std::string>* warnings) {
  bool changed = false;
  const auto clamp = [&](std::size_t& k) {
    if (k > kMaxLhnpeSize) {
      k = kMaxLhnpeSize;
      changed = true;
    }
  };
  if (auto* f = std::get_if<FixedNeighborhood>(&cfg.neighborhood)) {
    clamp(f->k);
  } else {
    auto& a = std::get<AdaptiveNeighborhood>(cfg.neighborhood);
    clamp(a.k_min);
    clamp(a.k_max);
  }
  if (changed && warnings) warnings->push_back("LHNPE neighborhood clamped to 10000 points");
  return cfg;
}

double min_gamma_floor(Probability beta, std::size_t k) {
  std::size_t column = kFloorBetas.size() - 1;
  for (std::size_t c = 0; c < kFloorBetas.size(); ++c) {
    if (beta.value() <= kFloorBetas[c] + 1e-12) {
      column = c;
      break;
    }
  }
  for (std::size_t r = 0; r < kFloorGammas.size(); ++r) {
    if (kFloorSizes[r][column] <= k) return kFloorGammas[r];
  }
  return kFloorGammas.back();
}

std::vector<double> eset(const ErrorSet& es, const KnnIndex& index, std::span<const double> x, std::size_t k,
                         const Exclusion& exclusion) {
  if (es.size() != index.size()) throw std::invalid_argument("error set and index sizes differ");
  if (k < kMinLhnpeSize || k > index.size()) {
    throw std::out_of_range("Eset size must lie in [20, N], got " + std::to_string(k));
  }
  const auto neighbors = index.query(x, k, exclusion);
  std::vector<double> out;
  out.reserve(neighbors.size());
  for (const auto& nb : neighbors) out.push_back(es.errors[nb.index]);
  return out;
}

std::vector<double> eset(const ErrorSet& es, const Dataset& d, std::span<const double> x, std::size_t k) {
  const KnnIndex index(d.features(), KnnIndex::Backend::BruteForce);
  return eset(es, index, x, k);
}

Interval error_tolerance_interval(std::span<const double> errors, Probability beta, Probability gamma) {
  if (errors.size() < kMinLhnpeSize) {
    throw std::invalid_argument("tolerance intervals on prediction errors need at least 20 errors");
  }
  return normal_tolerance_interval(SampleSummary::of(errors), beta, gamma);
}

ToleranceFactorTable::ToleranceFactorTable(Probability beta, Probability gamma, std::size_t k_lo,
                                           std::size_t k_hi)
    : k_lo_(k_lo) {
  if (k_lo < 2 || k_hi < k_lo) throw std::invalid_argument("invalid tolerance factor range");
  factors_.reserve(k_hi - k_lo + 1);
  for (std::size_t k = k_lo; k <= k_hi; ++k) factors_.push_back(tolerance_factor(static_cast<long>(k), beta, gamma));
}

ScanResult tolerance_scan(std::span<const double> ordered_errors, const Neighborhood& nb,
                          const ToleranceFactorTable& factors) {
  const auto sizes = scan_sizes(nb);
  if (ordered_errors.size() < sizes.back()) throw std::invalid_argument("not enough errors for the scan");
  // Same Welford recurrence as SampleSummary::of, so each prefix matches a direct computation bitwise.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t seen = 0;
  ScanResult best;
  bool have = false;
  for (std::size_t k : sizes) {
    while (seen < k) {
      const double v = ordered_errors[seen];
      ++seen;
      const double delta = v - mean;
      mean += delta / static_cast<double>(static_cast<long>(seen));
      m2 += delta * (v - mean);
    }
    const double sd = std::sqrt(std::max(m2, 0.0) / static_cast<double>(static_cast<long>(k) - 1));
    const Interval candidate = Interval::centered(mean, factors(k) * sd);
    if (!have || candidate.size() < best.interval.size()) {
      best = {candidate, k};
      have = true;
    }
  }
  return best;
}

BopiPredictor::BopiPredictor(const LoessModel& model, const ErrorSet& errors, Probability beta, LhnpeConfig cfg,
                             bool allow_beyond_loess)
    : model_(&model),
      errors_(&errors),
      cfg_(std::move(cfg)),
      factors_(beta, cfg_.gamma, cfg_.smallest_k(), cfg_.largest_k()) {
  if (errors.size() != model.data().rows()) throw std::invalid_argument("error set does not match the model");
  cfg_.validate(model.data().rows(), model.k_loess(), allow_beyond_loess);
}

BopiPredictor::Prediction BopiPredictor::predict(std::span<const double> x) const {
  const LocalFit fit = model_->fit_local(x);
  const std::size_t depth = cfg_.largest_k();
  std::vector<double> ordered(depth);
  if (fit.neighbor_indices.size() >= depth) {
    for (std::size_t r = 0; r < depth; ++r) ordered[r] = errors_->errors[fit.neighbor_indices[r]];
  } else {
    const auto neighbors = model_->index().query(x, depth);
    for (std::size_t r = 0; r < depth; ++r) ordered[r] = errors_->errors[neighbors[r].index];
  }
  const ScanResult scan = tolerance_scan(ordered, cfg_.neighborhood, factors_);
  const double fhat = fit.prediction();
  return {scan.interval.shifted(fhat), fhat, scan.k};
}

std::vector<BopiPredictor::Prediction> BopiPredictor::predict_all(const FeatureMatrix& queries) const {
  std::vector<Prediction> out(static_cast<std::size_t>(queries.rows()));
  const auto cols = static_cast<std::size_t>(queries.cols());
  parallel_for(out.size(), [&](std::size_t i) { out[i] = predict({queries.data() + i * cols, cols}); });
  return out;
}

Interval f_bopi_interval(const LoessModel& m, const ErrorSet& es, std::span<const double> x, Probability beta,
                         Probability gamma, FixedNeighborhood nb) {
  const BopiPredictor predictor(m, es, beta, LhnpeConfig{gamma.value(), nb});
  return predictor.predict(x).interval;
}

AdaptiveInterval a_bopi_interval(const LoessModel& m, const ErrorSet& es, std::span<const double> x,
                                 Probability beta, Probability gamma, AdaptiveNeighborhood nb) {
  const BopiPredictor predictor(m, es, beta, LhnpeConfig{gamma.value(), nb});
  const auto p = predictor.predict(x);
  return {p.interval, p.k};
}

IntervalBand conventional_band(const LoessModel& m, const ErrorSet& es, const FeatureMatrix& queries,
                               Probability beta) {
  const double rmse = es.rmse();
  const Eigen::VectorXd fhat = m.predict_all(queries);
  IntervalBand band;
  band.reserve(static_cast<std::size_t>(fhat.size()));
  for (Eigen::Index i = 0; i < fhat.size(); ++i) band.push_back(conventional_interval(fhat(i), rmse, beta));
  return band;
}

TrainingNeighborhoods::TrainingNeighborhoods(const KnnIndex& index, const Dataset& d, std::size_t depth)
    : rows_(d.rows()), depth_(depth) {
  if (index.size() != rows_) throw std::invalid_argument("index does not match the dataset");
  if (depth_ == 0 || depth_ + 1 > rows_) {
    throw std::invalid_argument("training neighborhood depth must lie in [1, N - 1]");
  }
  indices_.resize(rows_ * depth_);
  parallel_for(rows_, [&](std::size_t i) {
    Exclusion self;
    self.single = i;
    const auto neighbors = index.query(d.row(i), depth_, self);
    for (std::size_t r = 0; r < depth_; ++r) indices_[i * depth_ + r] = neighbors[r].index;
  });
}

TrainingScore evaluate_on_training(const ErrorSet& es, const TrainingNeighborhoods& nbrs, Probability beta,
                                   const LhnpeConfig& cfg) {
  const std::size_t n = nbrs.rows();
  if (es.size() != n) throw std::invalid_argument("error set does not match the neighborhoods");
  const std::size_t depth = cfg.largest_k();
  if (depth > nbrs.depth()) throw std::invalid_argument("configuration reaches beyond the neighborhood depth");
  const ToleranceFactorTable factors(beta, cfg.gamma, cfg.smallest_k(), depth);

  std::vector<std::uint8_t> covered(n);
  std::vector<double> sizes(n);
  parallel_for(n, [&](std::size_t i) {
    const auto idx = nbrs.of(i);
    std::vector<double> ordered(depth);
    for (std::size_t r = 0; r < depth; ++r) ordered[r] = es.errors[idx[r]];
    const ScanResult scan = tolerance_scan(ordered, cfg.neighborhood, factors);
    covered[i] = scan.interval.contains(es.errors[i]) ? 1 : 0;
    sizes[i] = scan.interval.size();
  });
  TrainingScore score;
  std::size_t hits = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    hits += covered[i];
    total += sizes[i];
  }
  score.coverage = static_cast<double>(hits) / static_cast<double>(n);
  score.mis = total / static_cast<double>(n);
  return score;
}

TuneResult tune_hyperparams(const ErrorSet& es, const TrainingNeighborhoods& nbrs, Probability beta,
                            NeighborhoodKind kind, std::size_t k_cap, const TuneOptions& options) {
  if (options.gamma_grid.empty()) throw std::invalid_argument("gamma grid is empty");
  if (options.k_step == 0) throw std::invalid_argument("K step must be positive");
  std::vector<double> grid = options.gamma_grid;
  std::sort(grid.begin(), grid.end(), std::greater<>());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  TuneResult result;
  const std::size_t cap = std::min({k_cap, nbrs.depth(), kMaxLhnpeSize});
  if (k_cap > kMaxLhnpeSize) result.warnings.push_back("K search limited to 10000 points");

  LhnpeConfig current;
  current.gamma = grid.front();
  if (kind == NeighborhoodKind::Fixed) {
    current.neighborhood = FixedNeighborhood{options.fixed_k0};
  } else {
    current.neighborhood =
        AdaptiveNeighborhood{options.adaptive_min0, options.adaptive_max0, options.adaptive_scan_step};
  }
  if (current.smallest_k() < kMinLhnpeSize) throw std::invalid_argument("initial K below 20");
  if (current.largest_k() > cap) {
    throw std::invalid_argument("initial neighborhood " + describe(current) + " exceeds the K limit " +
                                std::to_string(cap));
  }
  const LhnpeConfig initial = current;

  std::optional<TuneStep> best;
  const auto evaluate = [&](const LhnpeConfig& cfg) {
    TuneStep step{cfg, evaluate_on_training(es, nbrs, beta, cfg), false};
    const bool feasible = step.score.coverage >= beta.value() &&
                          cfg.gamma >= min_gamma_floor(beta, cfg.smallest_k()) - 1e-12;
    if (feasible && (!best || step.score.mis < best->score.mis)) best = step;
    result.trace.push_back(step);
    return step.score;
  };
  const auto accept = [&] { result.trace.back().accepted = true; };
  const auto satisfied = [&](const TrainingScore& s, double mis_min) {
    return s.coverage >= beta.value() && s.mis <= mis_min;
  };

  std::size_t gamma_index = 0;
  TrainingScore score = evaluate(current);
  accept();
  for (std::size_t iteration = 0; iteration < options.outer_iterations; ++iteration) {
    double mis_min = score.mis;
    while (satisfied(score, mis_min)) {
      const LhnpeConfig next = with_k_shift(current, options.k_step);
      if (next.largest_k() > cap) break;
      mis_min = score.mis;
      const TrainingScore trial = evaluate(next);
      if (!satisfied(trial, mis_min)) break;
      accept();
      current = next;
      score = trial;
    }
    mis_min = score.mis;
    while (satisfied(score, mis_min) && gamma_index + 1 < grid.size()) {
      const double gamma = grid[gamma_index + 1];
      if (gamma < min_gamma_floor(beta, current.smallest_k()) - 1e-12) break;
      LhnpeConfig next = current;
      next.gamma = gamma;
      mis_min = score.mis;
      const TrainingScore trial = evaluate(next);
      if (!satisfied(trial, mis_min)) break;
      accept();
      current = next;
      score = trial;
      ++gamma_index;
    }
  }

  if (best) {
    result.config = best->config;
    result.score = best->score;
    result.feasible = true;
  } else {
    result.config = initial;
    result.score = result.trace.front().score;
    result.feasible = false;
    result.warnings.push_back("no configuration reached the target coverage; returning gamma=" +
                              std::to_string(initial.gamma) + " with " + describe(initial));
  }
  return result;
}

TuneResult tune_hyperparams(std::shared_ptr<const Dataset> data, std::size_t k_loess, Probability beta,
                            NeighborhoodKind kind, CvScheme scheme, std::uint64_t seed, TuneOptions options) {
  const LoessModel model(data, k_loess);
  const ErrorSet es = cv_prediction_errors(model, scheme, seed);
  const std::size_t requested = options.k_cap.value_or(k_loess);
  const std::size_t depth = std::min({requested, data->rows() - 1, kMaxLhnpeSize});
  const TrainingNeighborhoods nbrs(model.index(), *data, depth);
  return tune_hyperparams(es, nbrs, beta, kind, requested, options);
}

}  // namespace bopi
