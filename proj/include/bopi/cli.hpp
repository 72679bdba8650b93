#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bopi/stat_dist.hpp"

namespace bopi::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kVerification = 3 };

/// Thrown for invalid configuration or command-line input (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LhnpeSettings {
  double gamma = 0.99;
  std::size_t k_f = 40;
  std::size_t k_min = 30;
  std::size_t k_max = 50;
  std::size_t step = 1;
};

struct DgpSettings {
  std::string family = "friedman1";
  std::size_t n = 1500;
  std::optional<double> noise_sd;
};

/// Everything a subcommand needs. Loaded from a JSON file, then overridden
/// by command-line flags.
struct RunConfig {
  std::string data_path;
  std::string response;
  std::string dataset_name;
  std::optional<DgpSettings> dgp;
  std::vector<std::string> methods = {"conventional", "f-bopi", "a-bopi", "ols"};
  std::vector<double> betas = {0.8, 0.9, 0.95, 0.99};
  std::vector<double> gammas = {0.99};
  LhnpeSettings lhnpe;
  std::optional<std::size_t> k_loess;
  std::vector<std::size_t> k_grid;
  std::string cv = "kfold";
  std::size_t folds = 10;
  std::size_t outer_folds = 10;
  std::size_t n_sim = 50;
  std::optional<std::uint64_t> seed;
  std::string output = "bopi_out";
  std::string tuned_path;
  double tune_fraction = 2.0 / 3.0;

  /// Throws ConfigError on out-of-range values or unknown names.
  void validate() const;
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig config_from_json_text(const std::string& text);

using ToleranceFactorFn = std::function<double(long, Probability, Probability)>;

struct VerifyOptions {
  std::filesystem::path output = "bopi_out";
  /// Replaces the library tolerance factor; lets tests inject a faulty one.
  ToleranceFactorFn tolerance_factor;
};

int cmd_verify(const VerifyOptions& options, std::ostream& log);
int cmd_tune(const RunConfig& config, std::ostream& log);
int cmd_evaluate(const RunConfig& config, std::ostream& log);
int cmd_simulate(const RunConfig& config, std::ostream& log);

/// Parses arguments, dispatches, maps exceptions to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bopi::cli
