#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bopi/dataset.hpp"
#include "bopi/loess.hpp"
#include "bopi/random.hpp"
#include "bopi/stat_dist.hpp"

namespace bopi {

enum class DgpFamily { Friedman1, Friedman2 };

struct DgpSpec {
  DgpFamily family = DgpFamily::Friedman1;
  std::size_t n = 1500;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;

  static DgpSpec friedman1(std::size_t n, std::uint64_t seed, double noise_sd = 1.0) {
    return {DgpFamily::Friedman1, n, noise_sd, seed};
  }
  static DgpSpec friedman2(std::size_t n, std::uint64_t seed, double noise_sd = std::sqrt(125.0)) {
    return {DgpFamily::Friedman2, n, noise_sd, seed};
  }
};

std::string family_name(DgpFamily f);
DgpFamily parse_family(const std::string& name);

/// 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5; x6..x10 are ignored.
double friedman1_mean(std::span<const double> x);
/// sqrt(x1^2 + (x2 x3 - 1 / (x2 x4))^2).
double friedman2_mean(std::span<const double> x);

struct RawSample {
  FeatureMatrix x;
  Eigen::VectorXd y;
};

/// Draws n rows: features uniform on their ranges, then the noise, row by row.
RawSample generate(DgpFamily family, std::size_t n, double noise_sd, Rng& rng);

/// Samples on the original feature scale (not standardized).
Dataset friedman1(const DgpSpec& spec);
Dataset friedman2(const DgpSpec& spec);

enum class Method { Conventional, FBopi, ABopi };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct SimulationHyper {
  std::size_t k_loess = 100;
  std::size_t k_f = 40;
  std::size_t k_min = 30;
  std::size_t k_max = 50;
  std::size_t adaptive_step = 1;
  CvScheme scheme = CvScheme::k_fold(10);
};

struct IterationRecord {
  std::size_t iteration = 0;
  Method method = Method::Conventional;
  double coverage = 0.0;
  double mis = 0.0;
};

struct MethodAggregate {
  Method method = Method::Conventional;
  double coverage_mean = 0.0;
  double coverage_sd = 0.0;
  double mis_mean = 0.0;
  double mis_sd = 0.0;
};

struct SimulationResult {
  std::vector<IterationRecord> iterations;  // iteration-major, methods in request order
  std::vector<MethodAggregate> aggregates;  // request order; sd uses n - 1

  [[nodiscard]] const MethodAggregate& aggregate(Method m) const;
};

/// Each iteration draws dgp.n fresh rows from substream `iteration` of `seed`,
/// trains on the first round(2n/3) and evaluates on the rest. Features are
/// standardized with training statistics. dgp.seed is not used here.
SimulationResult run_simulation(const DgpSpec& dgp, std::size_t n_sim, Probability beta, double gamma,
                                std::span<const Method> methods, const SimulationHyper& hyper, std::uint64_t seed);

}  // namespace bopi
