#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bopi/bopi.hpp"
#include "bopi/intervals.hpp"
#include "bopi/metrics.hpp"
#include "bopi/ols.hpp"
#include "bopi/simlab.hpp"

namespace py = pybind11;
using namespace bopi;

namespace {

CvScheme scheme_from(const std::string& cv, std::size_t folds) {
  if (cv == "loo") return CvScheme::leave_one_out();
  if (cv == "kfold") return CvScheme::k_fold(folds);
  throw std::invalid_argument("cv must be 'kfold' or 'loo'");
}

NeighborhoodKind kind_from(const std::string& kind) {
  if (kind == "fixed") return NeighborhoodKind::Fixed;
  if (kind == "adaptive") return NeighborhoodKind::Adaptive;
  throw std::invalid_argument("kind must be 'fixed' or 'adaptive'");
}

py::dict config_dict(const LhnpeConfig& cfg) {
  py::dict d;
  d["gamma"] = cfg.gamma;
  if (cfg.kind() == NeighborhoodKind::Fixed) {
    d["kind"] = "fixed";
    d["k"] = cfg.smallest_k();
  } else {
    d["kind"] = "adaptive";
    d["k_min"] = cfg.smallest_k();
    d["k_max"] = cfg.largest_k();
  }
  return d;
}

py::tuple band_arrays(const IntervalBand& band) {
  Eigen::VectorXd lower(static_cast<Eigen::Index>(band.size()));
  Eigen::VectorXd upper(static_cast<Eigen::Index>(band.size()));
  for (std::size_t i = 0; i < band.size(); ++i) {
    lower(static_cast<Eigen::Index>(i)) = band[i].lower;
    upper(static_cast<Eigen::Index>(i)) = band[i].upper;
  }
  return py::make_tuple(lower, upper);
}

/// Loess fit plus its cross-validated prediction errors.
class Model {
 public:
  Model(FeatureMatrix x, Eigen::VectorXd y, std::size_t k_loess, const std::string& cv, std::size_t folds,
        std::uint64_t seed)
      : data_(std::make_shared<const Dataset>(std::move(x), std::move(y))),
        model_(data_, k_loess),
        errors_(cv_prediction_errors(model_, scheme_from(cv, folds), seed)) {}

  Eigen::VectorXd predict(const FeatureMatrix& q) const { return model_.predict_all(q); }

  Eigen::VectorXd errors() const {
    return Eigen::Map<const Eigen::VectorXd>(errors_.errors.data(), static_cast<Eigen::Index>(errors_.size()));
  }

  double rmse() const { return errors_.rmse(); }
  std::size_t k_loess() const { return model_.k_loess(); }

  py::tuple conventional(const FeatureMatrix& q, double beta) const {
    return band_arrays(conventional_band(model_, errors_, q, beta));
  }

  py::dict intervals(const FeatureMatrix& q, double beta, double gamma, std::optional<std::size_t> k,
                     std::optional<std::size_t> k_min, std::optional<std::size_t> k_max, std::size_t step) const {
    LhnpeConfig cfg;
    cfg.gamma = gamma;
    if (k_min || k_max) {
      if (k) throw std::invalid_argument("give either k or k_min/k_max");
      cfg.neighborhood = AdaptiveNeighborhood{k_min.value_or(30), k_max.value_or(50), step};
    } else {
      cfg.neighborhood = FixedNeighborhood{k.value_or(40)};
    }
    const BopiPredictor predictor(model_, errors_, beta, cfg);
    std::vector<BopiPredictor::Prediction> preds;
    {
      py::gil_scoped_release release;
      preds = predictor.predict_all(q);
    }
    const auto n = static_cast<Eigen::Index>(preds.size());
    Eigen::VectorXd lower(n), upper(n), fhat(n);
    Eigen::VectorXi chosen(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = preds[static_cast<std::size_t>(i)];
      lower(i) = p.interval.lower;
      upper(i) = p.interval.upper;
      fhat(i) = p.fhat;
      chosen(i) = static_cast<int>(p.k);
    }
    py::dict out;
    out["lower"] = lower;
    out["upper"] = upper;
    out["fhat"] = fhat;
    out["k"] = chosen;
    return out;
  }

  py::dict tune(double beta, const std::string& kind, std::optional<std::size_t> k_cap) const {
    const std::size_t requested = k_cap.value_or(model_.k_loess());
    const std::size_t depth = std::min({requested, data_->rows() - 1, kMaxLhnpeSize});
    TuneResult r;
    {
      py::gil_scoped_release release;
      const TrainingNeighborhoods nbrs(model_.index(), *data_, depth);
      r = tune_hyperparams(errors_, nbrs, beta, kind_from(kind), requested);
    }
    py::dict out = config_dict(r.config);
    out["coverage"] = r.score.coverage;
    out["mis"] = r.score.mis;
    out["feasible"] = r.feasible;
    out["evaluations"] = r.trace.size();
    out["warnings"] = r.warnings;
    return out;
  }

 private:
  std::shared_ptr<const Dataset> data_;
  LoessModel model_;
  ErrorSet errors_;
};

}  // namespace

PYBIND11_MODULE(_bopi, m) {
  m.doc() = "Bounded oscillation prediction intervals for local linear regression";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  m.def("tolerance_factor", [](long n, double beta, double gamma) { return tolerance_factor(n, beta, gamma); },
        py::arg("n"), py::arg("beta"), py::arg("gamma"));
  m.def("prediction_factor", [](long n, double beta) { return prediction_factor(n, beta); }, py::arg("n"),
        py::arg("beta"));
  m.def("tolerance_prediction_ratio",
        [](long n, double beta, double gamma) { return tolerance_prediction_ratio(n, beta, gamma); }, py::arg("n"),
        py::arg("beta"), py::arg("gamma"));
  m.def("min_gamma_floor", [](double beta, std::size_t k) { return min_gamma_floor(beta, k); }, py::arg("beta"),
        py::arg("k"));
  m.def("wilson_critical", [](double beta, std::size_t n, double alpha) { return wilson_critical(beta, n, alpha); },
        py::arg("beta"), py::arg("n"), py::arg("alpha") = 0.05);
  m.def("egsd", &egsd, py::arg("mis"), py::arg("coverage"));
  m.def(
      "paired_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = paired_t_test(a, b);
        return py::make_tuple(r.t, r.p_value, stars(r.significance));
      },
      py::arg("a"), py::arg("b"), "Returns (t, p_value, stars).");
  m.def(
      "coverage",
      [](const std::vector<double>& lower, const std::vector<double>& upper, const std::vector<double>& y) {
        if (lower.size() != upper.size()) throw std::invalid_argument("lower and upper differ in length");
        IntervalBand band;
        for (std::size_t i = 0; i < lower.size(); ++i) band.push_back({lower[i], upper[i]});
        return coverage(band, y);
      },
      py::arg("lower"), py::arg("upper"), py::arg("y"));

  m.def(
      "select_bandwidth",
      [](FeatureMatrix x, Eigen::VectorXd y, const std::vector<std::size_t>& grid, const std::string& cv,
         std::size_t folds, std::uint64_t seed) {
        auto data = std::make_shared<const Dataset>(std::move(x), std::move(y));
        py::gil_scoped_release release;
        return select_bandwidth(data, grid, scheme_from(cv, folds), seed);
      },
      py::arg("x"), py::arg("y"), py::arg("grid"), py::arg("cv") = "kfold", py::arg("folds") = 10,
      py::arg("seed") = 0);

  m.def(
      "ols_intervals",
      [](FeatureMatrix x, Eigen::VectorXd y, const FeatureMatrix& q, double beta) {
        const OlsModel ols = fit_ols(Dataset(std::move(x), std::move(y)));
        IntervalBand band;
        for (Eigen::Index i = 0; i < q.rows(); ++i) {
          band.push_back(ols_prediction_interval(ols, {q.data() + i * q.cols(), static_cast<std::size_t>(q.cols())}, beta));
        }
        return band_arrays(band);
      },
      py::arg("x"), py::arg("y"), py::arg("queries"), py::arg("beta"));

  m.def(
      "friedman",
      [](const std::string& family, std::size_t n, std::uint64_t seed, std::optional<double> noise_sd) {
        const DgpFamily f = parse_family(family);
        DgpSpec spec = f == DgpFamily::Friedman1 ? DgpSpec::friedman1(n, seed) : DgpSpec::friedman2(n, seed);
        if (noise_sd) spec.noise_sd = *noise_sd;
        const Dataset d = f == DgpFamily::Friedman1 ? friedman1(spec) : friedman2(spec);
        return py::make_tuple(FeatureMatrix(d.features()), Eigen::VectorXd(d.response()));
      },
      py::arg("family") = "friedman1", py::arg("n") = 1500, py::arg("seed") = 0, py::arg("noise_sd") = py::none());

  m.def(
      "simulate",
      [](const std::string& family, std::size_t n, std::size_t n_sim, double beta, double gamma, std::uint64_t seed,
         std::size_t k_loess, std::size_t k_f, std::size_t k_min, std::size_t k_max) {
        const DgpFamily f = parse_family(family);
        const DgpSpec spec = f == DgpFamily::Friedman1 ? DgpSpec::friedman1(n, seed) : DgpSpec::friedman2(n, seed);
        SimulationHyper hyper;
        hyper.k_loess = k_loess;
        hyper.k_f = k_f;
        hyper.k_min = k_min;
        hyper.k_max = k_max;
        const std::vector<Method> methods = {Method::Conventional, Method::FBopi, Method::ABopi};
        SimulationResult r;
        {
          py::gil_scoped_release release;
          r = run_simulation(spec, n_sim, beta, gamma, methods, hyper, seed);
        }
        py::dict out;
        for (const auto& a : r.aggregates) {
          py::dict d;
          d["coverage_mean"] = a.coverage_mean;
          d["coverage_sd"] = a.coverage_sd;
          d["mis_mean"] = a.mis_mean;
          d["mis_sd"] = a.mis_sd;
          out[py::str(method_name(a.method))] = d;
        }
        return out;
      },
      py::arg("family") = "friedman1", py::arg("n") = 1500, py::arg("n_sim") = 10, py::arg("beta") = 0.95,
      py::arg("gamma") = 0.99, py::arg("seed") = 0, py::arg("k_loess") = 100, py::arg("k_f") = 40,
      py::arg("k_min") = 30, py::arg("k_max") = 50);

  py::class_<Model>(m, "Model", "Loess fit with cross-validated prediction errors.")
      .def(py::init<FeatureMatrix, Eigen::VectorXd, std::size_t, const std::string&, std::size_t, std::uint64_t>(),
           py::arg("x"), py::arg("y"), py::arg("k_loess"), py::arg("cv") = "kfold", py::arg("folds") = 10,
           py::arg("seed") = 0)
      .def("predict", &Model::predict, py::arg("queries"))
      .def_property_readonly("errors", &Model::errors)
      .def_property_readonly("rmse", &Model::rmse)
      .def_property_readonly("k_loess", &Model::k_loess)
      .def("conventional", &Model::conventional, py::arg("queries"), py::arg("beta"),
           "Returns (lower, upper) of fhat +/- Z * RMSE.")
      .def("intervals", &Model::intervals, py::arg("queries"), py::arg("beta"), py::arg("gamma") = 0.99,
           py::arg("k") = py::none(), py::arg("k_min") = py::none(), py::arg("k_max") = py::none(),
           py::arg("step") = 1,
           "F-BOPI intervals with k, or A-BOPI with k_min/k_max. Returns a dict of arrays.")
      .def("tune", &Model::tune, py::arg("beta"), py::arg("kind") = "fixed", py::arg("k_cap") = py::none());
}
