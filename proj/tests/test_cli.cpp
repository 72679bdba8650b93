#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bopi/cli.hpp"
#include "bopi/intervals.hpp"
#include "bopi/random.hpp"

namespace fs = std::filesystem;
using namespace bopi;
using namespace bopi::cli;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bopi_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path linear_csv(const fs::path& dir, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const fs::path p = dir / "linear.csv";
  std::ofstream out(p);
  out.precision(17);
  out << "a,b,y\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(0.0, 10.0);
    const double b = rng.uniform(-5.0, 5.0);
    out << a << ',' << b << ',' << 3.0 + 0.5 * a - 2.0 * b + rng.normal() << '\n';
  }
  return p;
}

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "bopi");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace

TEST_CASE("verify passes with the library and fails with a faulty factor") {
  const auto dir = scratch("verify");
  std::ostringstream log;
  VerifyOptions good{dir / "good", {}};
  CHECK(cmd_verify(good, log) == kOk);
  CHECK(fs::exists(dir / "good" / "verify_report.csv"));
  const auto summary = nlohmann::json::parse(slurp(dir / "good" / "verify_summary.json"));
  CHECK(summary.dump().find("\"pass\":true") != std::string::npos);

  VerifyOptions bad{dir / "bad", [](long n, Probability beta, Probability gamma) {
                      return 0.9 * tolerance_factor(n, beta, gamma);
                    }};
  CHECK(cmd_verify(bad, log) == kVerification);
  CHECK(run_args({"verify", "-o", (dir / "cli").string()}) == kOk);
}

TEST_CASE("evaluate reports near-nominal coverage on linear data") {
  const auto dir = scratch("linear");
  RunConfig c;
  c.data_path = linear_csv(dir, 2000, 1).string();
  c.response = "y";
  c.methods = {"conventional", "ols"};
  c.betas = {0.9};
  c.k_loess = 100;
  c.seed = 7;
  c.output = (dir / "out").string();
  std::ostringstream log;
  REQUIRE(cmd_evaluate(c, log) == kOk);
  const auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  REQUIRE(report["reports"].size() == 2);
  for (const auto& r : report["reports"]) {
    const double cov = r["coverage"].get<double>();
    CHECK(cov >= 0.87);
    CHECK(cov <= 0.93);
  }
}

TEST_CASE("evaluate writes one section per beta and is reproducible") {
  const auto dir = scratch("sections");
  RunConfig c;
  c.data_path = linear_csv(dir, 300, 2).string();
  c.response = "y";
  c.k_loess = 60;
  c.seed = 3;
  c.output = (dir / "a").string();
  std::ostringstream log;
  REQUIRE(cmd_evaluate(c, log) == kOk);
  c.output = (dir / "b").string();
  REQUIRE(cmd_evaluate(c, log) == kOk);
  for (const auto* name : {"report.csv", "report.json", "egsd_f-bopi.csv", "egsd_ols.csv"}) {
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }
  const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  std::set<double> betas;
  for (const auto& r : report["reports"]) betas.insert(r["beta"].get<double>());
  CHECK(betas == std::set<double>{0.8, 0.9, 0.95, 0.99});
  CHECK(report["reports"].size() == 16);
  const std::string csv = slurp(dir / "a" / "report.csv");
  CHECK(csv.rfind("dataset,method,beta,coverage,mis,sigma_is,wilson_critical,reliable,egsd,egsd_normalized,stars\n", 0) == 0);
}

TEST_CASE("tune output feeds evaluate") {
  const auto dir = scratch("tune");
  RunConfig c;
  c.data_path = linear_csv(dir, 300, 4).string();
  c.response = "y";
  c.k_loess = 60;
  c.betas = {0.9};
  c.seed = 5;
  c.output = dir.string();
  std::ostringstream log;
  REQUIRE(cmd_tune(c, log) == kOk);
  const auto tuned = nlohmann::json::parse(slurp(dir / "tuned.json"));
  CHECK(tuned["k_loess"].get<std::size_t>() == 60);
  REQUIRE(tuned["betas"].size() == 1);
  const auto& entry = tuned["betas"].begin().value();
  CHECK(entry.contains("f-bopi"));
  CHECK(entry.contains("a-bopi"));
  c.tuned_path = (dir / "tuned.json").string();
  c.output = (dir / "eval").string();
  CHECK(cmd_evaluate(c, log) == kOk);
}

TEST_CASE("simulate writes reproducible outputs") {
  const auto dir = scratch("simulate");
  RunConfig c;
  c.dgp = DgpSettings{"friedman1", 300, std::nullopt};
  c.methods = {"conventional", "f-bopi", "a-bopi"};
  c.betas = {0.9};
  c.n_sim = 2;
  c.k_loess = 60;
  c.seed = 11;
  c.output = (dir / "a").string();
  std::ostringstream log;
  REQUIRE(cmd_simulate(c, log) == kOk);
  c.output = (dir / "b").string();
  REQUIRE(cmd_simulate(c, log) == kOk);
  CHECK(slurp(dir / "a" / "simulation_iterations.csv") == slurp(dir / "b" / "simulation_iterations.csv"));
  CHECK(slurp(dir / "a" / "simulation_aggregate.json") == slurp(dir / "b" / "simulation_aggregate.json"));
  CHECK(fs::exists(dir / "a" / "coverage_hist_beta0.9_gamma0.99_f-bopi.csv"));
}

TEST_CASE("configuration parsing") {
  const auto c = config_from_json_text(R"({"dataset": {"path": "x.csv", "response": "y"}, "betas": [0.9],
      "lhnpe": {"gamma": 0.95, "k_f": 25, "k_min": 20, "k_max": 40}, "k_loess": 80, "seed": 4,
      "cv": {"scheme": "loo"}})");
  CHECK(c.data_path == "x.csv");
  CHECK(c.betas == std::vector<double>{0.9});
  CHECK(c.lhnpe.k_f == 25);
  CHECK(c.k_loess == 80);
  CHECK(c.seed == 4u);
  CHECK(c.cv == "loo");
  CHECK_THROWS_AS(config_from_json_text("{not json"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"betas": [1.5]})").validate(), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"methods": ["magic"]})").validate(), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"n_sim": -3})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"k_grid": [40, 2.5]})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"betas": "0.9"})"), ConfigError);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  const auto csv = linear_csv(dir, 120, 6).string();
  CHECK(run_args({}) == kUsage);
  CHECK(run_args({"frobnicate"}) == kUsage);
  CHECK(run_args({"evaluate", "-d", csv, "-r", "y"}) == kUsage);  // no seed
  CHECK(run_args({"evaluate", "-d", csv, "-r", "y", "--seed", "1", "--betas", "1.2"}) == kUsage);
  CHECK(run_args({"evaluate", "-d", (dir / "missing.csv").string(), "-r", "y", "--seed", "1"}) == kData);
  CHECK(run_args({"evaluate", "-d", csv, "-r", "nope", "--seed", "1"}) == kData);
  {
    std::ofstream bad(dir / "ragged.csv");
    bad << "a,y\n1,2\n3\n";
  }
  CHECK(run_args({"evaluate", "-d", (dir / "ragged.csv").string(), "-r", "y", "--seed", "1"}) == kData);
  {
    std::ofstream cfg(dir / "bad.json");
    cfg << "{\"n_sim\": -3}";
  }
  CHECK(run_args({"simulate", "-c", (dir / "bad.json").string(), "--seed", "1"}) == kUsage);
  CHECK(run_args({"evaluate", "-d", csv, "-r", "y", "--seed", "1", "--k-loess", "50", "--methods", "ols",
                  "--betas", "0.9", "-o", (dir / "ok").string()}) == kOk);
}
