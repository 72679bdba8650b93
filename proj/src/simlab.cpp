#include "bopi/simlab.hpp"

#include <numbers>
#include <stdexcept>

#include "bopi/bopi.hpp"
#include "bopi/intervals.hpp"
#include "bopi/metrics.hpp"

namespace bopi {
namespace {

struct Range {
  double lo;
  double hi;
};

std::vector<Range> feature_ranges(DgpFamily family) {
  if (family == DgpFamily::Friedman1) return std::vector<Range>(10, Range{0.0, 1.0});
  constexpr double pi = std::numbers::pi;
  return {{0.0, 100.0}, {40.0 * pi, 560.0 * pi}, {0.0, 1.0}, {1.0, 11.0}};
}

std::vector<std::string> feature_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

Dataset as_dataset(RawSample sample) {
  Encoder enc;
  const auto names = feature_names(static_cast<std::size_t>(sample.x.cols()));
  for (std::size_t j = 0; j < names.size(); ++j) enc.columns.push_back({names[j], j, std::nullopt, 0.0, 1.0});
  return Dataset(std::move(sample.x), std::move(sample.y), std::move(enc));
}

Dataset generate_dataset(const DgpSpec& spec, DgpFamily expected) {
  if (spec.family != expected) throw std::invalid_argument("DGP family mismatch");
  Rng rng(spec.seed);
  return as_dataset(generate(spec.family, spec.n, spec.noise_sd, rng));
}

}  // namespace

std::string family_name(DgpFamily f) { return f == DgpFamily::Friedman1 ? "friedman1" : "friedman2"; }

DgpFamily parse_family(const std::string& name) {
  if (name == "friedman1") return DgpFamily::Friedman1;
  if (name == "friedman2") return DgpFamily::Friedman2;
  throw std::invalid_argument("unknown data generating process '" + name + "'");
}

double friedman1_mean(std::span<const double> x) {
  if (x.size() < 5) throw std::invalid_argument("friedman1 needs at least 5 features");
  return 10.0 * std::sin(std::numbers::pi * x[0] * x[1]) + 20.0 * (x[2] - 0.5) * (x[2] - 0.5) + 10.0 * x[3] +
         5.0 * x[4];
}

double friedman2_mean(std::span<const double> x) {
  if (x.size() < 4) throw std::invalid_argument("friedman2 needs 4 features");
  const double inner = x[1] * x[2] - 1.0 / (x[1] * x[3]);
  return std::sqrt(x[0] * x[0] + inner * inner);
}

RawSample generate(DgpFamily family, std::size_t n, double noise_sd, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sample size must be positive");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("noise sd must be nonnegative");
  const auto ranges = feature_ranges(family);
  const auto d = static_cast<Eigen::Index>(ranges.size());
  RawSample s{FeatureMatrix(static_cast<Eigen::Index>(n), d), Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) s.x(i, j) = rng.uniform(ranges[j].lo, ranges[j].hi);
    const std::span<const double> row(s.x.data() + i * d, static_cast<std::size_t>(d));
    const double mean = family == DgpFamily::Friedman1 ? friedman1_mean(row) : friedman2_mean(row);
    s.y(i) = mean + noise_sd * rng.normal();
  }
  return s;
}

Dataset friedman1(const DgpSpec& spec) { return generate_dataset(spec, DgpFamily::Friedman1); }
Dataset friedman2(const DgpSpec& spec) { return generate_dataset(spec, DgpFamily::Friedman2); }

std::string method_name(Method m) {
  switch (m) {
    case Method::Conventional: return "conventional";
    case Method::FBopi: return "f-bopi";
    case Method::ABopi: return "a-bopi";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "conventional" || name == "conv") return Method::Conventional;
  if (name == "f-bopi" || name == "fbopi") return Method::FBopi;
  if (name == "a-bopi" || name == "abopi") return Method::ABopi;
  throw std::invalid_argument("unknown method '" + name + "'");
}

const MethodAggregate& SimulationResult::aggregate(Method m) const {
  for (const auto& a : aggregates) {
    if (a.method == m) return a;
  }
  throw std::out_of_range("method not part of this simulation");
}

SimulationResult run_simulation(const DgpSpec& dgp, std::size_t n_sim, Probability beta, double gamma,
                                std::span<const Method> methods, const SimulationHyper& hyper,
                                std::uint64_t seed) {
  if (methods.empty()) throw std::invalid_argument("no methods requested");
  if (n_sim == 0) throw std::invalid_argument("n_sim must be positive");
  const std::size_t n_train = static_cast<std::size_t>(std::llround(2.0 * static_cast<double>(dgp.n) / 3.0));
  if (n_train < hyper.k_loess || n_train >= dgp.n) throw std::invalid_argument("sample too small for the split");

  SimulationResult result;
  result.iterations.reserve(n_sim * methods.size());
  for (std::size_t it = 0; it < n_sim; ++it) {
    Rng rng = Rng::substream(seed, it);
    const RawSample sample = generate(dgp.family, dgp.n, dgp.noise_sd, rng);
    const auto d = sample.x.cols();
    const auto n_test = static_cast<Eigen::Index>(dgp.n - n_train);
    const FeatureMatrix x_train = sample.x.topRows(static_cast<Eigen::Index>(n_train));
    const FeatureMatrix x_test_raw = sample.x.bottomRows(n_test);
    const Eigen::VectorXd y_test = sample.y.tail(n_test);

    auto train = std::make_shared<const Dataset>(
        encode_numeric(x_train, sample.y.head(static_cast<Eigen::Index>(n_train)), feature_names(d)));
    const FeatureMatrix x_test = apply_numeric_encoder(train->encoder(), x_test_raw);

    const LoessModel model(train, hyper.k_loess);
    const ErrorSet es = cv_prediction_errors(model, hyper.scheme, mix64(seed ^ it));
    const std::span<const double> y_span(y_test.data(), static_cast<std::size_t>(y_test.size()));

    for (Method m : methods) {
      IntervalBand band;
      if (m == Method::Conventional) {
        band = conventional_band(model, es, x_test, beta);
      } else {
        LhnpeConfig cfg;
        cfg.gamma = gamma;
        if (m == Method::FBopi) {
          cfg.neighborhood = FixedNeighborhood{hyper.k_f};
        } else {
          cfg.neighborhood = AdaptiveNeighborhood{hyper.k_min, hyper.k_max, hyper.adaptive_step};
        }
        const BopiPredictor predictor(model, es, beta, cfg);
        for (const auto& p : predictor.predict_all(x_test)) band.push_back(p.interval);
      }
      result.iterations.push_back({it, m, coverage(band, y_span), mis(band).mean});
    }
  }

  for (Method m : methods) {
    std::vector<double> cov;
    std::vector<double> size;
    for (const auto& r : result.iterations) {
      if (r.method != m) continue;
      cov.push_back(r.coverage);
      size.push_back(r.mis);
    }
    MethodAggregate agg{m, 0.0, 0.0, 0.0, 0.0};
    if (cov.size() >= 2) {
      const auto c = SampleSummary::of(cov);
      const auto s = SampleSummary::of(size);
      agg = {m, c.mean(), c.sd(), s.mean(), s.sd()};
    } else {
      agg = {m, cov.front(), 0.0, size.front(), 0.0};
    }
    result.aggregates.push_back(agg);
  }
  return result;
}

}  // namespace bopi
