#include "bopi/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bopi/bopi.hpp"
#include "bopi/dataset.hpp"
#include "bopi/intervals.hpp"
#include "bopi/loess.hpp"
#include "bopi/metrics.hpp"
#include "bopi/ols.hpp"
#include "bopi/random.hpp"
#include "bopi/simlab.hpp"

namespace bopi::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKnownMethods = {"conventional", "f-bopi", "a-bopi", "ols"};

std::string num(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

std::size_t as_count(const json& v, const char* key) {
  if (!v.is_number_unsigned()) throw ConfigError(std::string(key) + " must be a nonnegative integer");
  return v.get<std::size_t>();
}

template <class T>
void read_into(const json& j, const char* key, T& target) {
  if (!j.contains(key)) return;
  if constexpr (std::is_same_v<T, std::size_t>) {
    target = as_count(j.at(key), key);
  } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
    target.clear();
    for (const auto& v : j.at(key)) target.push_back(as_count(v, key));
  } else {
    target = j.at(key).get<T>();
  }
}

std::uint64_t require_seed(const RunConfig& c) {
  if (!c.seed) throw ConfigError("a seed is required for this command");
  return *c.seed;
}

CvScheme scheme_of(const RunConfig& c) {
  return c.cv == "loo" ? CvScheme::leave_one_out() : CvScheme::k_fold(c.folds);
}

bool wants(const RunConfig& c, const std::string& method) {
  return std::find(c.methods.begin(), c.methods.end(), method) != c.methods.end();
}

std::shared_ptr<const Dataset> load_dataset(const RunConfig& c, std::ostream& log) {
  if (c.data_path.empty()) throw ConfigError("no dataset path given");
  if (c.response.empty()) throw ConfigError("no response column given");
  const RawTable raw = read_csv_file(c.data_path);
  auto data = std::make_shared<const Dataset>(encode_dataset(raw, c.response));
  const auto& enc = data->encoder();
  if (enc.rows_dropped > 0) log << "dropped " << enc.rows_dropped << " rows with missing cells\n";
  for (const auto& col : enc.dropped_columns) log << "warning: constant column '" << col << "' dropped\n";
  return data;
}

std::string dataset_label(const RunConfig& c) {
  if (!c.dataset_name.empty()) return c.dataset_name;
  if (!c.data_path.empty()) return fs::path(c.data_path).stem().string();
  if (c.dgp) return c.dgp->family;
  return "dataset";
}

std::vector<std::size_t> default_k_grid(std::size_t p, std::size_t n) {
  std::vector<std::size_t> grid;
  for (std::size_t k : {20, 30, 50, 75, 100, 150, 200, 300}) {
    if (k >= p + 1 && k <= n) grid.push_back(k);
  }
  if (grid.empty()) grid.push_back(std::min(n, p + 1));
  return grid;
}

std::size_t resolve_k_loess(const RunConfig& c, std::shared_ptr<const Dataset> data, std::uint64_t seed,
                            std::ostream& log) {
  if (c.k_loess) return *c.k_loess;
  auto grid = c.k_grid.empty() ? default_k_grid(data->feature_count() + 1, data->rows()) : c.k_grid;
  const std::size_t k = select_bandwidth(data, grid, scheme_of(c), seed);
  log << "selected k_loess = " << k << " by cross validation\n";
  return k;
}

LhnpeConfig fixed_config(const LhnpeSettings& s, double gamma) {
  return {gamma, FixedNeighborhood{s.k_f}};
}

LhnpeConfig adaptive_config(const LhnpeSettings& s, double gamma) {
  return {gamma, AdaptiveNeighborhood{s.k_min, s.k_max, s.step}};
}

json config_json(const LhnpeConfig& cfg) {
  json j;
  j["gamma"] = cfg.gamma;
  if (const auto* f = std::get_if<FixedNeighborhood>(&cfg.neighborhood)) {
    j["k_f"] = f->k;
  } else {
    const auto& a = std::get<AdaptiveNeighborhood>(cfg.neighborhood);
    j["k_min"] = a.k_min;
    j["k_max"] = a.k_max;
    j["step"] = a.step;
  }
  return j;
}

LhnpeConfig config_from(const json& j, NeighborhoodKind kind) {
  LhnpeConfig cfg;
  cfg.gamma = j.at("gamma").get<double>();
  if (kind == NeighborhoodKind::Fixed) {
    cfg.neighborhood = FixedNeighborhood{j.at("k_f").get<std::size_t>()};
  } else {
    cfg.neighborhood = AdaptiveNeighborhood{j.at("k_min").get<std::size_t>(), j.at("k_max").get<std::size_t>(),
                                            j.value("step", std::size_t{1})};
  }
  return cfg;
}

/// Key used for per-beta entries in the tuned file.
std::string beta_key(double beta) { return num(beta); }

// ---- verify -------------------------------------------------------------

struct CheckRow {
  std::string check;
  double gamma;
  double beta;
  long n;
  double ratio;
  std::string expectation;
  bool pass;
};

constexpr std::array<double, 4> kTableGammas = {0.55, 0.6, 0.65, 0.7};
constexpr std::array<double, 4> kTableBetas = {0.8, 0.9, 0.95, 0.99};
// Published smallest sizes; cells printed as "<= 20" are stored as 20.
constexpr std::array<std::array<long, 4>, 4> kTableSizes = {{
    {20, 50, 100, 350},
    {20, 20, 50, 80},
    {20, 20, 20, 40},
    {20, 20, 20, 20},
}};

std::vector<long> proposition_grid() {
  std::set<long> ns;
  for (long n = 20; n <= 200; ++n) ns.insert(n);
  constexpr int kLogPoints = 48;
  for (int i = 0; i < kLogPoints; ++i) {
    const double t = static_cast<double>(i) / (kLogPoints - 1);
    ns.insert(std::lround(20.0 * std::pow(10000.0 / 20.0, t)));
  }
  return {ns.begin(), ns.end()};
}

}  // namespace

// ---- configuration --------------------------------------------------------

void RunConfig::validate() const {
  for (const auto& m : methods) {
    if (!kKnownMethods.count(m)) throw ConfigError("unknown method '" + m + "'");
  }
  if (methods.empty()) throw ConfigError("no methods requested");
  const auto check_prob = [](double v, const char* what) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(what) + " must lie in (0, 1), got " + num(v));
  };
  if (betas.empty()) throw ConfigError("no beta values given");
  for (double b : betas) check_prob(b, "beta");
  if (gammas.empty()) throw ConfigError("no gamma values given");
  for (double g : gammas) check_prob(g, "gamma");
  check_prob(lhnpe.gamma, "gamma");
  if (cv != "kfold" && cv != "loo") throw ConfigError("cv must be 'kfold' or 'loo'");
  if (cv == "kfold" && folds < 2) throw ConfigError("folds must be at least 2");
  if (outer_folds < 2) throw ConfigError("outer_folds must be at least 2");
  if (lhnpe.k_f < kMinLhnpeSize || lhnpe.k_min < kMinLhnpeSize) throw ConfigError("LHNPE sizes must be >= 20");
  if (lhnpe.k_min > lhnpe.k_max) throw ConfigError("k_min must not exceed k_max");
  if (lhnpe.step == 0) throw ConfigError("step must be positive");
  if (n_sim == 0) throw ConfigError("n_sim must be positive");
  if (!(tune_fraction > 0.0 && tune_fraction <= 1.0)) throw ConfigError("tune_fraction must lie in (0, 1]");
  if (dgp) {
    try {
      parse_family(dgp->family);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (dgp->noise_sd && !(*dgp->noise_sd >= 0.0)) throw ConfigError("noise_sd must be nonnegative");
  }
}

RunConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      read_into(d, "path", c.data_path);
      read_into(d, "response", c.response);
      read_into(d, "name", c.dataset_name);
    }
    if (j.contains("dgp")) {
      DgpSettings g;
      const auto& d = j.at("dgp");
      read_into(d, "family", g.family);
      read_into(d, "n", g.n);
      if (d.contains("noise_sd")) g.noise_sd = d.at("noise_sd").get<double>();
      c.dgp = g;
    }
    read_into(j, "methods", c.methods);
    read_into(j, "betas", c.betas);
    read_into(j, "gammas", c.gammas);
    if (j.contains("lhnpe")) {
      const auto& l = j.at("lhnpe");
      read_into(l, "gamma", c.lhnpe.gamma);
      read_into(l, "k_f", c.lhnpe.k_f);
      read_into(l, "k_min", c.lhnpe.k_min);
      read_into(l, "k_max", c.lhnpe.k_max);
      read_into(l, "step", c.lhnpe.step);
    }
    if (j.contains("k_loess")) c.k_loess = as_count(j.at("k_loess"), "k_loess");
    read_into(j, "k_grid", c.k_grid);
    if (j.contains("cv")) {
      const auto& cv = j.at("cv");
      read_into(cv, "scheme", c.cv);
      read_into(cv, "folds", c.folds);
    }
    read_into(j, "outer_folds", c.outer_folds);
    read_into(j, "n_sim", c.n_sim);
    if (j.contains("seed")) c.seed = as_count(j.at("seed"), "seed");
    read_into(j, "output", c.output);
    read_into(j, "tuned", c.tuned_path);
    read_into(j, "tune_fraction", c.tune_fraction);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

// ---- verify ---------------------------------------------------------------

int cmd_verify(const VerifyOptions& options, std::ostream& log) {
  const ToleranceFactorFn tol = options.tolerance_factor ? options.tolerance_factor : ToleranceFactorFn(tolerance_factor);
  std::map<std::pair<long, double>, double> prediction_cache;
  const auto ratio = [&](long n, double beta, double gamma) {
    auto key = std::make_pair(n, beta);
    auto it = prediction_cache.find(key);
    if (it == prediction_cache.end()) it = prediction_cache.emplace(key, prediction_factor(n, beta)).first;
    return tol(n, beta, gamma) / it->second;
  };

  std::vector<CheckRow> rows;
  for (std::size_t r = 0; r < kTableGammas.size(); ++r) {
    for (std::size_t c = 0; c < kTableBetas.size(); ++c) {
      const long n = kTableSizes[r][c];
      const double v = ratio(n, kTableBetas[c], kTableGammas[r]);
      rows.push_back({"table_cell", kTableGammas[r], kTableBetas[c], n, v, ">=1", v >= 1.0});
    }
  }
  // Next smaller size appearing in the same column must not yet give containment.
  for (std::size_t r = 0; r < kTableGammas.size(); ++r) {
    for (std::size_t c = 0; c < kTableBetas.size(); ++c) {
      const long n = kTableSizes[r][c];
      long below = 0;
      for (std::size_t rr = 0; rr < kTableGammas.size(); ++rr) {
        const long other = kTableSizes[rr][c];
        if (other < n) below = std::max(below, other);
      }
      if (below == 0) continue;
      const double v = ratio(below, kTableBetas[c], kTableGammas[r]);
      rows.push_back({"table_next_smaller", kTableGammas[r], kTableBetas[c], below, v, "<1", v < 1.0});
    }
  }
  const auto grid = proposition_grid();
  for (double gamma : {0.7, 0.8, 0.9, 0.99}) {
    for (int b = 1; b <= 99; ++b) {
      const double beta = b / 100.0;
      for (long n : grid) {
        const double v = ratio(n, beta, gamma);
        rows.push_back({"containment_grid", gamma, beta, n, v, ">=1", v >= 1.0});
      }
    }
  }

  fs::create_directories(options.output);
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;
  {
    auto out = open_output(options.output / "verify_report.csv");
    out << "check,gamma,beta,n,ratio,expected,pass\n";
    for (const auto& row : rows) {
      out << row.check << ',' << num(row.gamma) << ',' << num(row.beta) << ',' << row.n << ',' << num(row.ratio)
          << ',' << row.expectation << ',' << (row.pass ? "true" : "false") << '\n';
      auto& t = tally[row.check];
      ++t.first;
      if (!row.pass) ++t.second;
    }
  }
  json summary;
  bool ok = true;
  for (const auto& [check, counts] : tally) {
    summary["checks"][check] = {{"cells", counts.first}, {"failures", counts.second}};
    ok = ok && counts.second == 0;
    log << check << ": " << counts.first - counts.second << "/" << counts.first << " passed\n";
  }
  json failures = json::array();
  for (const auto& row : rows) {
    if (!row.pass && failures.size() < 50) {
      failures.push_back({{"check", row.check}, {"gamma", row.gamma}, {"beta", row.beta}, {"n", row.n},
                          {"ratio", row.ratio}});
    }
  }
  summary["failures"] = failures;
  summary["pass"] = ok;
  write_json(options.output / "verify_summary.json", summary);
  log << (ok ? "verification passed\n" : "verification FAILED\n");
  return ok ? kOk : kVerification;
}

// ---- tune -----------------------------------------------------------------

int cmd_tune(const RunConfig& config, std::ostream& log) {
  config.validate();
  const std::uint64_t seed = require_seed(config);
  auto full = load_dataset(config, log);

  std::vector<std::size_t> order(full->rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_tune = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(config.tune_fraction * static_cast<double>(full->rows()))));
  order.resize(std::min(n_tune, full->rows()));
  std::sort(order.begin(), order.end());
  auto data = std::make_shared<const Dataset>(full->subset(order));
  log << "tuning on " << data->rows() << " of " << full->rows() << " rows\n";

  const std::size_t k_loess = resolve_k_loess(config, data, seed, log);
  const LoessModel model(data, k_loess);
  const ErrorSet es = cv_prediction_errors(model, scheme_of(config), seed);
  const std::size_t depth = std::min({k_loess, data->rows() - 1, kMaxLhnpeSize});
  const TrainingNeighborhoods nbrs(model.index(), *data, depth);

  json out;
  out["dataset"] = dataset_label(config);
  out["k_loess"] = k_loess;
  out["seed"] = seed;
  bool all_feasible = true;
  for (double beta : config.betas) {
    json entry;
    for (const auto& [name, kind] : {std::pair{std::string("f-bopi"), NeighborhoodKind::Fixed},
                                     std::pair{std::string("a-bopi"), NeighborhoodKind::Adaptive}}) {
      if (!wants(config, name)) continue;
      const TuneResult r = tune_hyperparams(es, nbrs, beta, kind, k_loess);
      json j = config_json(r.config);
      j["coverage"] = r.score.coverage;
      j["mis"] = r.score.mis;
      j["feasible"] = r.feasible;
      j["evaluations"] = r.trace.size();
      entry[name] = j;
      all_feasible = all_feasible && r.feasible;
      for (const auto& w : r.warnings) log << "warning (beta=" << num(beta) << ", " << name << "): " << w << '\n';
      log << "beta=" << num(beta) << ' ' << name << ": " << j.dump() << '\n';
    }
    out["betas"][beta_key(beta)] = entry;
  }
  out["feasible"] = all_feasible;
  fs::create_directories(config.output);
  write_json(fs::path(config.output) / "tuned.json", out);
  return kOk;
}

// ---- evaluate ---------------------------------------------------------------

int cmd_evaluate(const RunConfig& config, std::ostream& log) {
  config.validate();
  const std::uint64_t seed = require_seed(config);
  auto data = load_dataset(config, log);
  const std::size_t n = data->rows();

  json tuned;
  if (!config.tuned_path.empty()) {
    std::ifstream in(config.tuned_path);
    if (!in) throw ConfigError("cannot open tuned file " + config.tuned_path);
    try {
      tuned = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("tuned file is not valid JSON: ") + e.what());
    }
  }
  std::size_t k_loess = 0;
  if (tuned.contains("k_loess") && !config.k_loess) {
    k_loess = tuned.at("k_loess").get<std::size_t>();
  } else {
    k_loess = resolve_k_loess(config, data, seed, log);
  }

  const auto hyper_for = [&](double beta, NeighborhoodKind kind) {
    const std::string name = kind == NeighborhoodKind::Fixed ? "f-bopi" : "a-bopi";
    if (tuned.contains("betas") && tuned["betas"].contains(beta_key(beta)) &&
        tuned["betas"][beta_key(beta)].contains(name)) {
      return config_from(tuned["betas"][beta_key(beta)][name], kind);
    }
    return kind == NeighborhoodKind::Fixed ? fixed_config(config.lhnpe, config.lhnpe.gamma)
                                           : adaptive_config(config.lhnpe, config.lhnpe.gamma);
  };

  const std::vector<std::size_t> fold_of = assign_folds(n, std::min(config.outer_folds, n), seed);
  const std::size_t n_folds = *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  // bands[beta][method][row]
  std::vector<std::vector<IntervalBand>> bands(config.betas.size(),
                                               std::vector<IntervalBand>(config.methods.size(), IntervalBand(n)));

  for (std::size_t f = 0; f < n_folds; ++f) {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? test_idx : train_idx).push_back(i);
    auto train = std::make_shared<const Dataset>(data->subset(train_idx));
    const Dataset test = data->subset(test_idx);
    const LoessModel model(train, std::min(k_loess, train->rows()));
    const ErrorSet es = cv_prediction_errors(model, scheme_of(config), mix64(seed ^ (f + 1)));
    std::optional<OlsModel> ols;
    if (wants(config, "ols")) ols = fit_ols(*train);

    for (std::size_t b = 0; b < config.betas.size(); ++b) {
      const Probability beta(config.betas[b]);
      for (std::size_t m = 0; m < config.methods.size(); ++m) {
        const std::string& method = config.methods[m];
        IntervalBand band;
        if (method == "conventional") {
          band = conventional_band(model, es, test.features(), beta);
        } else if (method == "ols") {
          for (std::size_t r = 0; r < test.rows(); ++r) band.push_back(ols_prediction_interval(*ols, test.row(r), beta));
        } else {
          const auto kind = method == "f-bopi" ? NeighborhoodKind::Fixed : NeighborhoodKind::Adaptive;
          const BopiPredictor predictor(model, es, beta, hyper_for(beta.value(), kind));
          for (const auto& p : predictor.predict_all(test.features())) band.push_back(p.interval);
        }
        for (std::size_t r = 0; r < test_idx.size(); ++r) bands[b][m][test_idx[r]] = band[r];
      }
    }
  }

  const std::string label = dataset_label(config);
  const auto& y = data->response();
  const std::span<const double> ys(y.data(), static_cast<std::size_t>(y.size()));
  std::vector<EvaluationReport> reports;
  for (std::size_t b = 0; b < config.betas.size(); ++b) {
    std::vector<MethodOutcome> outcomes;
    for (std::size_t m = 0; m < config.methods.size(); ++m) outcomes.push_back({config.methods[m], bands[b][m]});
    const auto rs = build_reports(label, config.betas[b], outcomes, ys);
    reports.insert(reports.end(), rs.begin(), rs.end());
  }

  fs::create_directories(config.output);
  const fs::path dir(config.output);
  {
    auto out = open_output(dir / "report.csv");
    out << "dataset,method,beta,coverage,mis,sigma_is,wilson_critical,reliable,egsd,egsd_normalized,stars\n";
    for (const auto& r : reports) {
      out << r.dataset << ',' << r.method << ',' << num(r.beta) << ',' << num(r.coverage) << ',' << num(r.mis) << ','
          << num(r.sigma_is) << ',' << num(r.wilson_critical) << ',' << (r.reliable ? "true" : "false") << ','
          << opt_num(r.egsd) << ',' << opt_num(r.egsd_normalized) << ',' << stars(r.significance) << '\n';
    }
  }
  json j = json::array();
  for (const auto& r : reports) {
    json row = {{"dataset", r.dataset},   {"method", r.method},
                {"beta", r.beta},         {"coverage", r.coverage},
                {"mis", r.mis},           {"sigma_is", r.sigma_is},
                {"wilson_critical", r.wilson_critical}, {"reliable", r.reliable},
                {"stars", stars(r.significance)}};
    row["egsd"] = r.egsd ? json(*r.egsd) : json(nullptr);
    row["egsd_normalized"] = r.egsd_normalized ? json(*r.egsd_normalized) : json(nullptr);
    j.push_back(row);
  }
  write_json(dir / "report.json", json{{"dataset", label}, {"rows", n}, {"k_loess", k_loess}, {"reports", j}});
  for (const auto& method : config.methods) {
    auto out = open_output(dir / ("egsd_" + method + ".csv"));
    out << "beta,egsd_normalized\n";
    for (const auto& r : reports) {
      if (r.method == method) out << num(r.beta) << ',' << opt_num(r.egsd_normalized) << '\n';
    }
  }
  for (const auto& r : reports) {
    log << r.method << " beta=" << num(r.beta) << " coverage=" << num(100.0 * r.coverage) << "% mis=" << num(r.mis)
        << (r.reliable ? "" : " (unreliable)") << ' ' << stars(r.significance) << '\n';
  }
  return kOk;
}

// ---- simulate -------------------------------------------------------------

int cmd_simulate(const RunConfig& config, std::ostream& log) {
  config.validate();
  const std::uint64_t seed = require_seed(config);
  if (!config.dgp) throw ConfigError("simulate needs a dgp section");
  const DgpFamily family = parse_family(config.dgp->family);
  DgpSpec spec = family == DgpFamily::Friedman1 ? DgpSpec::friedman1(config.dgp->n, seed)
                                                : DgpSpec::friedman2(config.dgp->n, seed);
  if (config.dgp->noise_sd) spec.noise_sd = *config.dgp->noise_sd;

  std::vector<Method> methods;
  for (const auto& m : config.methods) {
    if (m == "ols") {
      log << "note: ols is not part of the simulation protocol and is skipped\n";
      continue;
    }
    methods.push_back(parse_method(m));
  }
  if (methods.empty()) throw ConfigError("no simulation methods requested");

  SimulationHyper hyper;
  hyper.k_loess = config.k_loess.value_or(100);
  hyper.k_f = config.lhnpe.k_f;
  hyper.k_min = config.lhnpe.k_min;
  hyper.k_max = config.lhnpe.k_max;
  hyper.adaptive_step = config.lhnpe.step;
  hyper.scheme = scheme_of(config);

  fs::create_directories(config.output);
  const fs::path dir(config.output);
  auto iterations = open_output(dir / "simulation_iterations.csv");
  iterations << "family,n,beta,gamma,iteration,method,coverage,mis\n";
  json aggregate = json::array();
  for (double beta : config.betas) {
    for (double gamma : config.gammas) {
      const SimulationResult r = run_simulation(spec, config.n_sim, beta, gamma, methods, hyper, seed);
      for (const auto& rec : r.iterations) {
        iterations << config.dgp->family << ',' << spec.n << ',' << num(beta) << ',' << num(gamma) << ','
                   << rec.iteration << ',' << method_name(rec.method) << ',' << num(rec.coverage) << ','
                   << num(rec.mis) << '\n';
      }
      for (const auto& a : r.aggregates) {
        aggregate.push_back({{"family", config.dgp->family}, {"n", spec.n}, {"noise_sd", spec.noise_sd},
                             {"beta", beta}, {"gamma", gamma}, {"method", method_name(a.method)},
                             {"n_sim", config.n_sim}, {"coverage_mean", a.coverage_mean},
                             {"coverage_sd", a.coverage_sd}, {"mis_mean", a.mis_mean}, {"mis_sd", a.mis_sd}});
        log << "beta=" << num(beta) << " gamma=" << num(gamma) << ' ' << method_name(a.method)
            << " coverage=" << num(100.0 * a.coverage_mean) << "% (sd " << num(100.0 * a.coverage_sd)
            << ") mis=" << num(a.mis_mean) << '\n';

        constexpr int kBins = 100;
        std::vector<std::size_t> counts(kBins, 0);
        for (const auto& rec : r.iterations) {
          if (rec.method != a.method) continue;
          const int bin = std::clamp(static_cast<int>(std::floor(rec.coverage * kBins)), 0, kBins - 1);
          ++counts[static_cast<std::size_t>(bin)];
        }
        auto hist = open_output(dir / ("coverage_hist_beta" + num(beta) + "_gamma" + num(gamma) + "_" +
                                       method_name(a.method) + ".csv"));
        hist << "coverage,count\n";
        for (int bin = 0; bin < kBins; ++bin) hist << num((bin + 0.5) / kBins) << ',' << counts[bin] << '\n';
      }
    }
  }
  write_json(dir / "simulation_aggregate.json", aggregate);
  return kOk;
}

// ---- entry point ----------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bounded oscillation prediction intervals for local linear regression"};
  app.require_subcommand(1);

  std::string config_path;
  std::string data_path;
  std::string response;
  std::string name;
  std::vector<std::string> methods;
  std::vector<double> betas;
  std::vector<double> gammas;
  std::optional<double> gamma;
  std::optional<std::size_t> k_loess;
  std::optional<std::size_t> k_f;
  std::optional<std::size_t> k_min;
  std::optional<std::size_t> k_max;
  std::optional<std::size_t> folds;
  std::optional<std::size_t> n_sim;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string tuned;
  bool loo = false;
  std::string dgp_family;
  std::optional<std::size_t> dgp_n;
  std::optional<double> noise_sd;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON configuration file");
    sub->add_option("-o,--output", output, "Output directory (default bopi_out)");
    sub->add_option("--seed", seed, "Seed for every random step");
    sub->add_option("--methods", methods, "conventional, f-bopi, a-bopi, ols");
    sub->add_option("--betas", betas, "Content levels (default 0.8 0.9 0.95 0.99)");
    sub->add_option("--k-loess", k_loess, "Regression neighborhood size");
    sub->add_option("--k-f", k_f, "F-BOPI neighborhood size (default 40)");
    sub->add_option("--k-min", k_min, "A-BOPI smallest neighborhood (default 30)");
    sub->add_option("--k-max", k_max, "A-BOPI largest neighborhood (default 50)");
    sub->add_option("--folds", folds, "Folds for prediction errors (default 10)");
    sub->add_flag("--loo", loo, "Leave-one-out prediction errors");
  };
  const auto add_data = [&](CLI::App* sub) {
    sub->add_option("-d,--data", data_path, "CSV file with a header row");
    sub->add_option("-r,--response", response, "Response column name");
    sub->add_option("--name", name, "Dataset label in reports");
  };

  auto* verify = app.add_subcommand("verify", "Check tolerance/prediction interval containment tables");
  verify->add_option("-o,--output", output, "Output directory (default bopi_out)");
  auto* tune = app.add_subcommand("tune", "Tune gamma and LHNPE neighborhoods");
  add_common(tune);
  add_data(tune);
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validated comparison of interval methods");
  add_common(evaluate);
  add_data(evaluate);
  evaluate->add_option("--gamma", gamma, "Tolerance confidence (default 0.99)");
  evaluate->add_option("--tuned", tuned, "tuned.json from the tune command");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on Friedman data");
  add_common(simulate);
  simulate->add_option("--gammas", gammas, "Tolerance confidences (default 0.99)");
  simulate->add_option("--dgp", dgp_family, "friedman1 or friedman2");
  simulate->add_option("-n,--n", dgp_n, "Sample size per iteration (default 1500)");
  simulate->add_option("--noise-sd", noise_sd, "Noise standard deviation");
  simulate->add_option("--n-sim", n_sim, "Iterations (default 50)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (verify->parsed()) {
      VerifyOptions options;
      if (!output.empty()) options.output = output;
      return cmd_verify(options, out);
    }
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!data_path.empty()) config.data_path = data_path;
    if (!response.empty()) config.response = response;
    if (!name.empty()) config.dataset_name = name;
    if (!methods.empty()) config.methods = methods;
    if (!betas.empty()) config.betas = betas;
    if (!gammas.empty()) config.gammas = gammas;
    if (gamma) config.lhnpe.gamma = *gamma;
    if (k_loess) config.k_loess = *k_loess;
    if (k_f) config.lhnpe.k_f = *k_f;
    if (k_min) config.lhnpe.k_min = *k_min;
    if (k_max) config.lhnpe.k_max = *k_max;
    if (folds) config.folds = *folds;
    if (loo) config.cv = "loo";
    if (n_sim) config.n_sim = *n_sim;
    if (seed) config.seed = *seed;
    if (!output.empty()) config.output = output;
    if (!tuned.empty()) config.tuned_path = tuned;
    if (!dgp_family.empty() || dgp_n || noise_sd) {
      DgpSettings g = config.dgp.value_or(DgpSettings{});
      if (!dgp_family.empty()) g.family = dgp_family;
      if (dgp_n) g.n = *dgp_n;
      if (noise_sd) g.noise_sd = *noise_sd;
      config.dgp = g;
    }
    if (simulate->parsed() && !config.dgp) config.dgp = DgpSettings{};

    if (tune->parsed()) return cmd_tune(config, out);
    if (evaluate->parsed()) return cmd_evaluate(config, out);
    return cmd_simulate(config, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  }
}

}  // namespace bopi::cli
