#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <stdexcept>

#include "hqrwaci/conformal.hpp"
#include "hqrwaci/distributions.hpp"
#include "hqrwaci/metrics.hpp"
#include "hqrwaci/pipeline.hpp"
#include "hqrwaci/quantile_regression.hpp"
#include "hqrwaci/synthetic.hpp"

namespace py = pybind11;
using namespace hqrwaci;

namespace {

ModelKind model_kind_from(const std::string& name) {
  std::string v = name;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "qra") return ModelKind::QRA;
  if (v == "hqr") return ModelKind::HQR;
  if (v == "hqr_w" || v == "hqr-w") return ModelKind::HQR_W;
  throw std::invalid_argument("model kind must be qra, hqr or hqr_w");
}

WeightKind weight_kind_from(const std::string& name) {
  if (name == "gaussian") return WeightKind::Gaussian;
  if (name == "geometric") return WeightKind::Geometric;
  throw std::invalid_argument("weights must be gaussian or geometric");
}

py::dict interval_dict(const Interval& iv) {
  py::dict d;
  d["lower"] = iv.lower;
  d["upper"] = iv.upper;
  d["kind"] = iv.kind == IntervalKind::Finite
                  ? "finite"
                  : (iv.kind == IntervalKind::Infinite ? "infinite" : "empty");
  return d;
}

py::dict report_dict(const MetricsReport& rep) {
  py::dict d;
  d["n"] = rep.n;
  d["coverage"] = rep.coverage;
  d["mean_length"] = rep.mean_length;
  d["winkler"] = rep.winkler;
  d["pearson"] = rep.pearson;
  d["pearson_degenerate"] = rep.pearson_degenerate;
  d["ils"] = rep.ils;
  d["spearman"] = rep.spearman;
  d["spearman_degenerate"] = rep.spearman_degenerate;
  d["length_std"] = rep.length_std;
  d["mcd"] = rep.mcd_value;
  d["n_empty"] = rep.n_empty;
  d["n_infinite"] = rep.n_infinite;
  return d;
}

IntervalStream stream_from(const std::vector<double>& y,
                           const std::vector<double>& lower,
                           const std::vector<double>& upper,
                           const std::vector<double>& center,
                           const std::vector<int>& groups) {
  const std::size_t n = y.size();
  if (lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("stream: y/lower/upper lengths differ");
  }
  IntervalStream s;
  s.y = y;
  s.timestamps.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.timestamps[i] = static_cast<std::int64_t>(i);
  }
  s.intervals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.intervals.push_back(Interval::finite(lower[i], upper[i]));
  }
  s.center = center.empty() ? y : center;
  if (!center.empty() && center.size() != n) {
    throw std::invalid_argument("stream: center length differs");
  }
  if (!groups.empty() && groups.size() != n) {
    throw std::invalid_argument("stream: groups length differs");
  }
  s.group_keys = groups;
  return s;
}

}  // namespace

PYBIND11_MODULE(hqrwaci, m) {
  m.doc() =
      "Prediction intervals from forecast ensembles: heteroscedastic quantile "
      "regression with width-adaptive conformal calibration";

  m.def("pinball_loss", &pinball_loss, py::arg("beta"), py::arg("y"),
        py::arg("y_hat"));
  m.def("t_critical", &t_critical, py::arg("p"), py::arg("dof"));
  m.def("normal_quantile", &normal_quantile, py::arg("p"));

  m.def(
      "fit_quantile",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double beta) {
        const QrFit fit = fit_quantile(X, y, beta);
        py::dict d;
        d["coefficients"] = fit.coefficients;
        d["dropped"] = fit.dropped;
        d["iterations"] = fit.iterations;
        d["objective"] = fit.objective;
        return d;
      },
      py::arg("X"), py::arg("y"), py::arg("beta"),
      "Exact linear pinball fit; coefficients start with the intercept.");

  m.def(
      "build_features",
      [](const std::string& kind, const Eigen::RowVectorXd& forecasts) {
        return build_features(model_kind_from(kind), forecasts);
      },
      py::arg("kind"), py::arg("forecasts"));

  m.def(
      "augmented_quantile",
      [](std::vector<double> scores, double p) {
        std::sort(scores.begin(), scores.end());
        return augmented_quantile(std::span<const double>(scores), p);
      },
      py::arg("scores"), py::arg("p"),
      "p-quantile of scores augmented with +inf.");

  m.def(
      "cqr_score",
      [](double y, double lower, double upper) {
        return cqr_score(y, Interval::finite(lower, upper));
      },
      py::arg("y"), py::arg("lower"), py::arg("upper"));

  m.def(
      "cqr_conformalize",
      [](double lower, double upper, double q) {
        return interval_dict(cqr_conformalize(Interval::finite(lower, upper), q));
      },
      py::arg("lower"), py::arg("upper"), py::arg("q"));

  m.def(
      "rolling_intervals",
      [](const std::vector<double>& y, const Eigen::MatrixXd& forecasts,
         const std::string& kind, std::size_t window, double alpha,
         std::size_t refit_stride) {
        ForecastPanel panel;
        panel.y = y;
        panel.forecasts = forecasts;
        panel.timestamps.resize(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
          panel.timestamps[i] = static_cast<std::int64_t>(i);
        }
        RollingConfig rc;
        rc.window = window;
        rc.alpha = alpha;
        rc.refit_stride = refit_stride;
        const RollingResult res =
            rolling_intervals(panel, model_kind_from(kind), rc);
        py::dict d;
        std::vector<double> lo;
        std::vector<double> hi;
        lo.reserve(res.stream.size());
        hi.reserve(res.stream.size());
        for (const Interval& iv : res.stream.intervals) {
          lo.push_back(iv.lower);
          hi.push_back(iv.upper);
        }
        d["lower"] = lo;
        d["upper"] = hi;
        d["y"] = res.stream.y;
        d["center"] = res.stream.center;
        d["first_index"] = y.size() - res.stream.size();
        d["crossings"] = res.crossings;
        return d;
      },
      py::arg("y"), py::arg("forecasts"), py::arg("kind"), py::arg("window"),
      py::arg("alpha"), py::arg("refit_stride") = 1,
      "Per-step refitted quantile intervals over a trailing window.");

  m.def(
      "run_conformal_stream",
      [](const std::vector<double>& y, const std::vector<double>& lower,
         const std::vector<double>& upper, const std::vector<double>& center,
         const std::vector<int>& groups, const std::string& method,
         double alpha, double gamma, const std::string& weights, double sigma,
         double lambda_decay, double grid_step, std::size_t score_capacity,
         std::size_t warmup) {
        ConformalStreamConfig cc;
        if (method == "none") {
          cc.method = ConformalMethod::None;
        } else if (method == "aci") {
          cc.method = ConformalMethod::Aci;
        } else if (method == "waci") {
          cc.method = ConformalMethod::Waci;
        } else {
          throw std::invalid_argument("method must be none, aci or waci");
        }
        cc.alpha_star = alpha;
        cc.gamma = gamma;
        cc.weight_kind = weight_kind_from(weights);
        cc.sigma = sigma;
        cc.lambda_decay = lambda_decay;
        cc.grid_delta = grid_step;
        cc.score_capacity = score_capacity;
        cc.warmup = warmup;
        const ConformalStreamResult res =
            run_conformal_stream(stream_from(y, lower, upper, center, groups), cc);
        py::dict d;
        std::vector<double> clo;
        std::vector<double> chi;
        std::vector<int> err;
        std::vector<double> alpha_used;
        std::vector<std::string> kinds;
        for (const StreamStepRecord& rec : res.records) {
          clo.push_back(rec.conformalized.lower);
          chi.push_back(rec.conformalized.upper);
          err.push_back(rec.err);
          alpha_used.push_back(rec.alpha_used);
          kinds.push_back(rec.conformalized.kind == IntervalKind::Finite
                              ? "finite"
                              : (rec.conformalized.kind == IntervalKind::Infinite
                                     ? "infinite"
                                     : "empty"));
        }
        d["lower"] = clo;
        d["upper"] = chi;
        d["err"] = err;
        d["alpha_used"] = alpha_used;
        d["kind"] = kinds;
        d["replacement"] =
            py::make_tuple(res.replacement_lower, res.replacement_upper);
        return d;
      },
      py::arg("y"), py::arg("lower"), py::arg("upper"),
      py::arg("center") = std::vector<double>{},
      py::arg("groups") = std::vector<int>{}, py::arg("method") = "waci",
      py::arg("alpha") = 0.2, py::arg("gamma") = 0.01,
      py::arg("weights") = "gaussian", py::arg("sigma") = 1.0,
      py::arg("lambda_decay") = 0.5, py::arg("grid_step") = 0.25,
      py::arg("score_capacity") = 500, py::arg("warmup") = 0,
      "Adaptive conformal calibration over an interval stream.");

  m.def(
      "evaluate_metrics",
      [](const std::vector<double>& y, const std::vector<double>& base_lower,
         const std::vector<double>& base_upper,
         const std::vector<double>& conf_lower,
         const std::vector<double>& conf_upper,
         const std::vector<double>& center, double alpha,
         double replacement_lower, double replacement_upper) {
        const std::size_t n = y.size();
        if (base_lower.size() != n || base_upper.size() != n ||
            conf_lower.size() != n || conf_upper.size() != n) {
          throw std::invalid_argument("evaluate_metrics: length mismatch");
        }
        std::vector<EvaluationRecord> records(n);
        for (std::size_t i = 0; i < n; ++i) {
          records[i].y = y[i];
          records[i].center = center.empty() ? y[i] : center[i];
          records[i].base = Interval::finite(base_lower[i], base_upper[i]);
          records[i].conformalized =
              conf_lower[i] <= conf_upper[i]
                  ? Interval::finite(conf_lower[i], conf_upper[i])
                  : Interval::empty(conf_lower[i], conf_upper[i]);
        }
        return report_dict(evaluate(
            records, alpha, ReplacementInterval{replacement_lower,
                                                replacement_upper}));
      },
      py::arg("y"), py::arg("base_lower"), py::arg("base_upper"),
      py::arg("conf_lower"), py::arg("conf_upper"),
      py::arg("center") = std::vector<double>{}, py::arg("alpha") = 0.2,
      py::arg("replacement_lower") = 0.0, py::arg("replacement_upper") = 0.0);

  m.def(
      "generate_run",
      [](std::size_t length, double alpha, std::uint64_t seed) {
        SyntheticConfig sc;
        sc.length = length;
        sc.alpha = alpha;
        const SyntheticRun run = generate_run(sc, seed);
        py::dict d;
        d["y"] = run.y;
        d["sigma_hat"] = run.sigma_hat;
        d["state"] = run.state;
        std::vector<double> lo;
        std::vector<double> hi;
        for (const Interval& iv : run.stream.intervals) {
          lo.push_back(iv.lower);
          hi.push_back(iv.upper);
        }
        d["lower"] = lo;
        d["upper"] = hi;
        return d;
      },
      py::arg("length") = 10000, py::arg("alpha") = 0.2, py::arg("seed") = 42,
      "One regime-switching benchmark trajectory.");

  m.def(
      "run_experiment",
      [](std::size_t n_runs, std::size_t length, double alpha,
         std::uint64_t seed) {
        SyntheticConfig sc;
        sc.n_runs = n_runs;
        sc.length = length;
        sc.alpha = alpha;
        sc.seed = seed;
        const ExperimentTables tables = run_experiment(sc);
        const char* subset_names[3] = {"high", "low", "overall"};
        const char* method_names[3] = {"initial", "aci", "waci"};
        py::dict d;
        for (std::size_t s = 0; s < 3; ++s) {
          py::dict ds;
          for (std::size_t mth = 0; mth < 3; ++mth) {
            py::dict cell;
            cell["mean"] = report_dict(tables.cells[s][mth].mean);
            cell["std"] = report_dict(tables.cells[s][mth].stddev);
            ds[method_names[mth]] = cell;
          }
          d[subset_names[s]] = ds;
        }
        return d;
      },
      py::arg("n_runs") = 5, py::arg("length") = 2000, py::arg("alpha") = 0.2,
      py::arg("seed") = 42,
      "Benchmark tables keyed by state subset and method.");
}
