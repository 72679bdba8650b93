#include <doctest.h>

#include <algorithm>
#include <memory>
#include <numeric>

#include "bopi/bopi.hpp"
#include "bopi/random.hpp"
#include "oracles.hpp"

using namespace bopi;

namespace {

struct Fixture {
  std::shared_ptr<const Dataset> data;
  LoessModel model;
  ErrorSet errors;
};

std::shared_ptr<const Dataset> sine_data(std::size_t n, std::uint64_t seed, double a = 1.0, double b = 0.0) {
  Rng rng(seed);
  FeatureMatrix x(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.uniform(-1.0, 1.0);
    x(i, 1) = rng.uniform(-1.0, 1.0);
    y(i) = a * (std::sin(3.0 * x(i, 0)) + x(i, 1) + 0.3 * rng.normal()) + b;
  }
  return std::make_shared<const Dataset>(std::move(x), std::move(y));
}

Fixture make_fixture(std::shared_ptr<const Dataset> data, std::size_t k_loess) {
  LoessModel model(data, k_loess);
  ErrorSet es = cv_prediction_errors(model, CvScheme::k_fold(10), 3);
  return {data, std::move(model), std::move(es)};
}

double oracle_factor(long n, double beta, double gamma) {
  const double z = oracle::normal_quantile(1.0 - (1.0 - beta) / 2.0);
  const double chi = oracle::chi2_quantile(1.0 - gamma, static_cast<double>(n - 1));
  return std::sqrt(static_cast<double>(n - 1) * (1.0 + 1.0 / static_cast<double>(n)) * z * z / chi);
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = static_cast<double>(i);
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = oracle::mean_of(ra);
  const double mb = oracle::mean_of(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("eset returns the errors of the nearest training rows") {
  const auto f = make_fixture(sine_data(300, 1), 60);
  Rng rng(8);
  for (int q = 0; q < 20; ++q) {
    const std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const std::size_t k = 20 + rng.below(100);
    const auto got = eset(f.errors, *f.data, x, k);
    const auto nb = oracle::sorted_neighbors(f.data->features(), x, k);
    REQUIRE(got.size() == k);
    for (std::size_t r = 0; r < k; ++r) CHECK(got[r] == f.errors.errors[nb[r].first]);
    CHECK(eset(f.errors, f.model.index(), x, k) == got);
  }
  const std::vector<double> x = {0.0, 0.0};
  CHECK_THROWS_AS(eset(f.errors, *f.data, x, 19), std::out_of_range);
  CHECK_THROWS_AS(eset(f.errors, *f.data, x, 301), std::out_of_range);
  CHECK_NOTHROW(eset(f.errors, *f.data, x, 300));
}

TEST_CASE("tolerance interval on errors") {
  Rng rng(4);
  std::vector<double> e(40);
  for (auto& v : e) v = 2.0 + 3.0 * rng.normal();
  const auto iv = error_tolerance_interval(e, 0.9, 0.95);
  const double c = oracle_factor(40, 0.9, 0.95);
  CHECK(iv.center() == doctest::Approx(oracle::mean_of(e)).epsilon(1e-12));
  CHECK(iv.size() / 2.0 == doctest::Approx(c * oracle::sd_of(e)).epsilon(1e-8));
  CHECK_THROWS_AS(error_tolerance_interval(std::span<const double>(e).first(19), 0.9, 0.95),
                  std::invalid_argument);

  const std::vector<double> constant(25, 1.5);
  const auto degenerate = error_tolerance_interval(constant, 0.9, 0.95);
  CHECK(degenerate.lower == 1.5);
  CHECK(degenerate.upper == 1.5);
}

TEST_CASE("tolerance scan prefixes agree with direct summaries") {
  Rng rng(10);
  std::vector<double> e(60);
  for (auto& v : e) v = 100.0 + rng.normal();
  const ToleranceFactorTable table(0.95, 0.9, 20, 60);
  for (std::size_t k : {20, 33, 60}) {
    const auto scan = tolerance_scan(e, FixedNeighborhood{k}, table);
    const auto direct = normal_tolerance_interval(SampleSummary::of(std::span<const double>(e).first(k)), 0.95, 0.9);
    CHECK(scan.interval.lower == direct.lower);
    CHECK(scan.interval.upper == direct.upper);
    CHECK(scan.k == k);
  }
  CHECK_THROWS(tolerance_scan(std::span<const double>(e).first(30), FixedNeighborhood{40}, table));
}

TEST_CASE("F-BOPI interval is fhat plus the error tolerance interval") {
  const auto f = make_fixture(sine_data(400, 2), 80);
  Rng rng(3);
  for (int q = 0; q < 10; ++q) {
    const std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto iv = f_bopi_interval(f.model, f.errors, x, 0.9, 0.99, FixedNeighborhood{40});
    const double fhat = f.model.predict(x);
    const auto e = eset(f.errors, *f.data, x, 40);
    CHECK(iv.center() - fhat == doctest::Approx(oracle::mean_of(e)).epsilon(1e-9));
    CHECK(iv.size() / 2.0 == doctest::Approx(oracle_factor(40, 0.9, 0.99) * oracle::sd_of(e)).epsilon(1e-8));
  }
}

TEST_CASE("A-BOPI picks the smallest interval over its range") {
  const auto f = make_fixture(sine_data(400, 5), 80);
  Rng rng(6);
  for (int q = 0; q < 15; ++q) {
    const std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto a = a_bopi_interval(f.model, f.errors, x, 0.95, 0.95, AdaptiveNeighborhood{25, 60, 1});
    const double fhat = f.model.predict(x);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    for (std::size_t k = 25; k <= 60; ++k) {
      const auto e = eset(f.errors, *f.data, x, k);
      const double size = 2.0 * tolerance_factor(static_cast<long>(k), 0.95, 0.95) * oracle::sd_of(e);
      if (size < best * (1.0 - 1e-12)) {
        best = size;
        best_k = k;
      }
    }
    CHECK(a.chosen_k == best_k);
    CHECK(a.interval.size() == doctest::Approx(best).epsilon(1e-9));
    CHECK(a.interval.center() - fhat == doctest::Approx(oracle::mean_of(eset(f.errors, *f.data, x, best_k))).epsilon(1e-9));
    for (std::size_t k : {25, 40, 60}) {
      const auto fixed = f_bopi_interval(f.model, f.errors, x, 0.95, 0.95, FixedNeighborhood{k});
      CHECK(a.interval.size() <= fixed.size() * (1.0 + 1e-12));
    }
    const auto single = a_bopi_interval(f.model, f.errors, x, 0.95, 0.95, AdaptiveNeighborhood{40, 40, 1});
    const auto fixed40 = f_bopi_interval(f.model, f.errors, x, 0.95, 0.95, FixedNeighborhood{40});
    CHECK(single.interval.lower == fixed40.lower);
    CHECK(single.interval.upper == fixed40.upper);
    CHECK(single.chosen_k == 40);
  }
}

TEST_CASE("adaptive scan with a coarse step still reaches k_max") {
  const auto f = make_fixture(sine_data(300, 7), 60);
  const BopiPredictor p(f.model, f.errors, 0.9, LhnpeConfig{0.9, AdaptiveNeighborhood{20, 47, 10}});
  const auto all = p.predict_all(f.data->features().topRows(50));
  for (const auto& pr : all) CHECK((pr.k == 20 || pr.k == 30 || pr.k == 40 || pr.k == 47));
}

TEST_CASE("intervals are equivariant under affine response maps") {
  const double a = 3.5;
  const double b = -12.0;
  const auto base = make_fixture(sine_data(300, 9), 60);
  const auto moved = make_fixture(sine_data(300, 9, a, b), 60);
  const BopiPredictor p0(base.model, base.errors, 0.9, LhnpeConfig{0.95, AdaptiveNeighborhood{20, 50, 1}});
  const BopiPredictor p1(moved.model, moved.errors, 0.9, LhnpeConfig{0.95, AdaptiveNeighborhood{20, 50, 1}});
  Rng rng(1);
  for (int q = 0; q < 20; ++q) {
    const std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto i0 = p0.predict(x).interval;
    const auto i1 = p1.predict(x).interval;
    CHECK(i1.lower == doctest::Approx(a * i0.lower + b).epsilon(1e-8));
    CHECK(i1.upper == doctest::Approx(a * i0.upper + b).epsilon(1e-8));
  }
}

TEST_CASE("interval size grows with gamma and beta") {
  const auto f = make_fixture(sine_data(300, 11), 60);
  const std::vector<double> x = {0.1, -0.2};
  double last = 0.0;
  for (double gamma : {0.5, 0.7, 0.9, 0.95, 0.99}) {
    const double s = f_bopi_interval(f.model, f.errors, x, 0.9, gamma, FixedNeighborhood{40}).size();
    CHECK(s > last);
    last = s;
  }
  last = 0.0;
  for (double beta : {0.5, 0.8, 0.9, 0.95, 0.99}) {
    const double s = f_bopi_interval(f.model, f.errors, x, beta, 0.9, FixedNeighborhood{40}).size();
    CHECK(s > last);
    last = s;
  }
}

TEST_CASE("interval sizes follow heteroscedastic noise") {
  Rng rng(12);
  const std::size_t n = 1500;
  FeatureMatrix x(n, 1);
  Eigen::VectorXd y(n);
  const auto noise_sd = [](double v) { return 0.1 + 2.0 * v; };
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.uniform();
    y(i) = std::sin(4.0 * x(i, 0)) + noise_sd(x(i, 0)) * rng.normal();
  }
  const auto f = make_fixture(std::make_shared<const Dataset>(x, y), 100);
  const BopiPredictor p(f.model, f.errors, 0.9, LhnpeConfig{0.9, FixedNeighborhood{50}});
  std::vector<double> sizes;
  std::vector<double> truth;
  for (int q = 0; q < 200; ++q) {
    const double v = rng.uniform();
    sizes.push_back(p.predict(std::vector<double>{v}).interval.size());
    truth.push_back(noise_sd(v));
  }
  CHECK(spearman(sizes, truth) > 0.5);
  const auto conv = conventional_band(f.model, f.errors, x.topRows(5), 0.9);
  for (const auto& iv : conv) CHECK(iv.size() == doctest::Approx(conv.front().size()));
}

TEST_CASE("the error mean corrects a biased model") {
  Rng rng(13);
  const std::size_t n = 600;
  FeatureMatrix x(n, 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = rng.uniform(-1.0, 1.0);
    y(i) = 4.0 * x(i, 0) * x(i, 0) + 0.05 * rng.normal();
  }
  // A global linear fit is badly biased for a parabola.
  const auto f = make_fixture(std::make_shared<const Dataset>(x, y), n);
  const BopiPredictor p(f.model, f.errors, 0.9, LhnpeConfig{0.9, FixedNeighborhood{20}}, true);
  double center_err = 0.0;
  double fhat_err = 0.0;
  for (double v : {-0.9, -0.6, 0.0, 0.6, 0.9}) {
    const auto pr = p.predict(std::vector<double>{v});
    center_err += std::fabs(pr.interval.center() - 4.0 * v * v);
    fhat_err += std::fabs(pr.fhat - 4.0 * v * v);
  }
  CHECK(center_err < 0.2 * fhat_err);
}

TEST_CASE("minimum gamma floor") {
  CHECK(min_gamma_floor(0.95, 20) == 0.65);
  CHECK(min_gamma_floor(0.95, 49) == 0.65);
  CHECK(min_gamma_floor(0.95, 50) == 0.6);
  CHECK(min_gamma_floor(0.95, 100) == 0.55);
  CHECK(min_gamma_floor(0.99, 20) == 0.7);
  CHECK(min_gamma_floor(0.99, 40) == 0.65);
  CHECK(min_gamma_floor(0.99, 350) == 0.55);
  CHECK(min_gamma_floor(0.9, 20) == 0.6);
  CHECK(min_gamma_floor(0.9, 50) == 0.55);
  CHECK(min_gamma_floor(0.85, 30) == 0.6);
  CHECK(min_gamma_floor(0.8, 20) == 0.55);
  CHECK(min_gamma_floor(0.5, 20) == 0.55);
  CHECK(min_gamma_floor(0.999, 10000) == 0.55);
  CHECK(min_gamma_floor(0.999, 20) == 0.7);
}

TEST_CASE("configuration validation and clamping") {
  CHECK_THROWS_AS((LhnpeConfig{0.9, FixedNeighborhood{19}}.validate(100, 100)), std::invalid_argument);
  CHECK_THROWS_AS((LhnpeConfig{0.9, FixedNeighborhood{101}}.validate(100, 100, true)), std::invalid_argument);
  CHECK_THROWS_AS((LhnpeConfig{0.9, FixedNeighborhood{60}}.validate(100, 50)), std::invalid_argument);
  CHECK_NOTHROW(LhnpeConfig{0.9, FixedNeighborhood{60}}.validate(100, 50, true));
  CHECK_THROWS_AS((LhnpeConfig{0.9, AdaptiveNeighborhood{40, 30, 1}}.validate(100, 100)), std::invalid_argument);
  CHECK_THROWS_AS((LhnpeConfig{0.9, AdaptiveNeighborhood{30, 40, 0}}.validate(100, 100)), std::invalid_argument);
  CHECK_THROWS_AS((LhnpeConfig{1.0, FixedNeighborhood{30}}.validate(100, 100)), std::invalid_argument);
  CHECK_THROWS_AS((LhnpeConfig{0.0, FixedNeighborhood{30}}.validate(100, 100)), std::invalid_argument);

  std::vector<std::string> warnings;
  const auto same = clamp_to_search_limit(LhnpeConfig{0.9, FixedNeighborhood{500}}, &warnings);
  CHECK(same.largest_k() == 500);
  CHECK(warnings.empty());
  const auto clamped = clamp_to_search_limit(LhnpeConfig{0.9, AdaptiveNeighborhood{5000, 20000, 1}}, &warnings);
  CHECK(clamped.smallest_k() == 5000);
  CHECK(clamped.largest_k() == kMaxLhnpeSize);
  CHECK(warnings.size() == 1);

  const auto f = make_fixture(sine_data(100, 1), 50);
  CHECK_THROWS_AS(BopiPredictor(f.model, f.errors, 0.9, LhnpeConfig{0.9, FixedNeighborhood{60}}),
                  std::invalid_argument);
}

TEST_CASE("training evaluation against a direct computation") {
  const auto f = make_fixture(sine_data(200, 14), 60);
  const TrainingNeighborhoods nbrs(f.model.index(), *f.data, 60);
  const LhnpeConfig cfg{0.9, FixedNeighborhood{30}};
  const auto score = evaluate_on_training(f.errors, nbrs, 0.9, cfg);
  std::size_t hits = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < 200; ++i) {
    const auto nb = oracle::sorted_neighbors(f.data->features(), std::vector<double>(f.data->row(i).begin(), f.data->row(i).end()), 30, static_cast<long>(i));
    std::vector<double> e;
    for (const auto& [idx, dist] : nb) e.push_back(f.errors.errors[idx]);
    const double half = oracle_factor(30, 0.9, 0.9) * oracle::sd_of(e);
    const double m = oracle::mean_of(e);
    hits += (std::fabs(f.errors.errors[i] - m) <= half) ? 1 : 0;
    total += 2.0 * half;
  }
  CHECK(score.coverage == doctest::Approx(static_cast<double>(hits) / 200.0).epsilon(0.011));
  CHECK(score.mis == doctest::Approx(total / 200.0).epsilon(1e-8));
  CHECK_THROWS(evaluate_on_training(f.errors, nbrs, 0.9, LhnpeConfig{0.9, FixedNeighborhood{70}}));
  CHECK_THROWS(TrainingNeighborhoods(f.model.index(), *f.data, 200));
}

TEST_CASE("tuner postconditions") {
  const auto data = sine_data(400, 15);
  for (const auto kind : {NeighborhoodKind::Fixed, NeighborhoodKind::Adaptive}) {
    for (double beta : {0.8, 0.9, 0.95}) {
      const auto r = tune_hyperparams(data, 80, beta, kind, CvScheme::k_fold(10), 2);
      CHECK(r.config.kind() == kind);
      CHECK(r.config.largest_k() <= 80);
      CHECK(r.config.smallest_k() >= kMinLhnpeSize);
      if (r.feasible) {
        CHECK(r.score.coverage >= beta);
        CHECK(r.config.gamma >= min_gamma_floor(beta, r.config.smallest_k()) - 1e-12);
      }
      double last_gamma = 1.0;
      std::size_t last_k = 0;
      for (const auto& step : r.trace) {
        if (!step.accepted) continue;
        CHECK(step.config.gamma <= last_gamma);
        CHECK(step.config.smallest_k() >= last_k);
        last_gamma = step.config.gamma;
        last_k = step.config.smallest_k();
      }
      bool visited = false;
      for (const auto& step : r.trace) {
        if (step.config.gamma == r.config.gamma && step.config.smallest_k() == r.config.smallest_k() &&
            step.config.largest_k() == r.config.largest_k()) {
          visited = true;
        }
      }
      CHECK(visited);
      const auto again = tune_hyperparams(data, 80, beta, kind, CvScheme::k_fold(10), 2);
      CHECK(again.config.gamma == r.config.gamma);
      CHECK(again.config.largest_k() == r.config.largest_k());
      CHECK(again.score.mis == r.score.mis);
    }
  }
}

TEST_CASE("tuner reports infeasibility") {
  const auto data = sine_data(200, 16);
  TuneOptions options;
  options.gamma_grid = {0.5};  // below every floor
  const auto r = tune_hyperparams(data, 60, 0.9, NeighborhoodKind::Fixed, CvScheme::k_fold(10), 0, options);
  CHECK_FALSE(r.feasible);
  CHECK(r.config.gamma == 0.5);
  CHECK(r.config.largest_k() == 20);
  CHECK_FALSE(r.warnings.empty());
  options.fixed_k0 = 70;
  CHECK_THROWS(tune_hyperparams(data, 60, 0.9, NeighborhoodKind::Fixed, CvScheme::k_fold(10), 0, options));
}

namespace {

struct RandomCase {
  std::shared_ptr<const Dataset> data;
  std::size_t k_loess;
  std::vector<double> query;
  double beta;
  double gamma;
  AdaptiveNeighborhood range;
};

RandomCase random_case(Rng& rng, double a = 1.0, double b = 0.0, std::uint64_t* data_seed = nullptr) {
  const std::uint64_t seed = data_seed ? *data_seed : rng.next_u64();
  Rng local(seed);
  const std::size_t n = 120 + local.below(120);
  const std::size_t d = 1 + local.below(3);
  FeatureMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      x(i, j) = local.uniform(-1.0, 1.0);
      mean += std::cos(2.0 * x(i, j) + static_cast<double>(j));
    }
    y(i) = a * (mean + (0.2 + std::fabs(x(i, 0))) * local.normal()) + b;
  }
  RandomCase c;
  c.data = std::make_shared<const Dataset>(std::move(x), std::move(y));
  c.k_loess = 60 + local.below(40);
  for (std::size_t j = 0; j < d; ++j) c.query.push_back(local.uniform(-1.0, 1.0));
  const double betas[] = {0.8, 0.9, 0.95, 0.99};
  const double gammas[] = {0.7, 0.9, 0.95, 0.99};
  c.beta = betas[local.below(4)];
  c.gamma = gammas[local.below(4)];
  const std::size_t k_min = 20 + local.below(20);
  c.range = {k_min, k_min + local.below(c.k_loess - k_min), 1 + local.below(3)};
  return c;
}

}  // namespace

TEST_CASE("property: F-BOPI decomposition" * doctest::test_suite("properties")) {
  Rng rng(501);
  for (int inst = 0; inst < 50; ++inst) {
    const auto c = random_case(rng);
    const auto f = make_fixture(c.data, c.k_loess);
    const std::size_t k = c.range.k_max;
    const auto iv = f_bopi_interval(f.model, f.errors, c.query, c.beta, c.gamma, FixedNeighborhood{k});
    const auto e = eset(f.errors, *c.data, c.query, k);
    const double fhat = f.model.predict(c.query);
    CHECK(iv.center() - fhat == doctest::Approx(oracle::mean_of(e)).epsilon(1e-9));
    CHECK(iv.size() / 2.0 == doctest::Approx(oracle_factor(static_cast<long>(k), c.beta, c.gamma) * oracle::sd_of(e)).epsilon(1e-7));
  }
}

TEST_CASE("property: A-BOPI is never wider than F-BOPI inside its range" * doctest::test_suite("properties")) {
  Rng rng(502);
  for (int inst = 0; inst < 50; ++inst) {
    const auto c = random_case(rng);
    const auto f = make_fixture(c.data, c.k_loess);
    const auto a = a_bopi_interval(f.model, f.errors, c.query, c.beta, c.gamma, c.range);
    CHECK(a.chosen_k >= c.range.k_min);
    CHECK(a.chosen_k <= c.range.k_max);
    for (std::size_t k = c.range.k_min; k <= c.range.k_max; k += c.range.step) {
      const auto fixed = f_bopi_interval(f.model, f.errors, c.query, c.beta, c.gamma, FixedNeighborhood{k});
      CHECK(a.interval.size() <= fixed.size() * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("property: affine equivariance" * doctest::test_suite("properties")) {
  Rng rng(503);
  for (int inst = 0; inst < 50; ++inst) {
    std::uint64_t seed = rng.next_u64();
    const double a = rng.uniform(0.1, 20.0);
    const double b = rng.uniform(-50.0, 50.0);
    const auto base = random_case(rng, 1.0, 0.0, &seed);
    const auto moved = random_case(rng, a, b, &seed);
    const auto f0 = make_fixture(base.data, base.k_loess);
    const auto f1 = make_fixture(moved.data, moved.k_loess);
    const LhnpeConfig cfg{base.gamma, base.range};
    const auto i0 = BopiPredictor(f0.model, f0.errors, base.beta, cfg).predict(base.query).interval;
    const auto i1 = BopiPredictor(f1.model, f1.errors, base.beta, cfg).predict(base.query).interval;
    const double scale = std::max(1.0, std::fabs(a * i0.lower + b));
    CHECK(std::fabs(i1.lower - (a * i0.lower + b)) <= 1e-8 * scale);
    CHECK(std::fabs(i1.upper - (a * i0.upper + b)) <= 1e-8 * std::max(1.0, std::fabs(a * i0.upper + b)));
  }
}
