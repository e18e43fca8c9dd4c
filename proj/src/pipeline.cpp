#include "hqrwaci/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "hqrwaci/conformal.hpp"
#include "hqrwaci/csv_io.hpp"
#include "hqrwaci/distributions.hpp"
#include "hqrwaci/errors.hpp"
#include "hqrwaci/metrics.hpp"
#include "hqrwaci/quantile_regression.hpp"
#include "hqrwaci/synthetic.hpp"

namespace hqrwaci {

namespace {

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end == value.c_str() || *end != '\0') {
    throw UsageError("config: key '" + key + "' needs a number, got '" +
                     value + "'");
  }
  return v;
}

std::size_t to_size(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (v < 0 || v != std::floor(v)) {
    throw UsageError("config: key '" + key + "' needs a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw UsageError("config: key '" + key + "' needs true/false");
}

WeightKind parse_weights(const std::string& value) {
  if (value == "gaussian") return WeightKind::Gaussian;
  if (value == "geometric") return WeightKind::Geometric;
  throw UsageError("weights must be 'gaussian' or 'geometric', got '" + value +
                   "'");
}

ModelKind parse_model(const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "qra") return ModelKind::QRA;
  if (v == "hqr") return ModelKind::HQR;
  if (v == "hqr_w" || v == "hqr-w" || v == "hqrw") return ModelKind::HQR_W;
  throw UsageError("model must be qra, hqr or hqr_w, got '" + value + "'");
}

std::vector<double> parse_levels(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(to_double("levels", item));
  }
  if (out.empty()) {
    throw UsageError("levels: need at least one alpha");
  }
  for (const double a : out) {
    if (!(a > 0.0 && a < 1.0)) {
      throw UsageError("levels: alphas must be in (0, 1)");
    }
  }
  return out;
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) {
    throw DataError("cannot create output directory '" + out + "': " +
                    ec.message());
  }
}

std::string cell_or_dashes(bool dashes, double value) {
  return dashes ? "--" : format_number(value);
}

// mean/std pair rendering: plain mode emits two columns, publication mode
// one "mean (std)" column at two decimals.
void push_pair(std::vector<std::string>& row, bool paper, bool with_std,
               double mean, double stddev, bool dashes = false) {
  if (paper) {
    if (dashes) {
      row.push_back("--");
    } else if (with_std) {
      row.push_back(format_fixed2(mean) + " (" + format_fixed2(stddev) + ")");
    } else {
      row.push_back(format_fixed2(mean));
    }
    return;
  }
  row.push_back(cell_or_dashes(dashes, mean));
  if (with_std) row.push_back(dashes ? "--" : format_number(stddev));
}

void write_table(const OutputTable& table, const std::string& path, bool json) {
  write_csv(table, path);
  if (json) {
    std::string jpath = path;
    const auto dot = jpath.rfind('.');
    if (dot != std::string::npos) jpath = jpath.substr(0, dot);
    write_json(table, jpath + ".json");
  }
}

SyntheticConfig synth_config(const RunConfig& config) {
  SyntheticConfig sc;
  sc.alpha = config.alpha.value_or(0.2);
  sc.gamma = config.gamma.value_or(0.01);
  sc.waci_sigma = config.sigma.value_or(1.0);
  sc.grid_delta = config.grid_step.value_or(0.25);
  sc.n_runs = config.runs;
  sc.length = config.length;
  sc.warmup = config.warmup;
  sc.score_capacity = config.score_capacity;
  sc.weight_kind = parse_weights(config.weights);
  sc.lambda_decay = config.lambda_decay;
  sc.seed = config.seed;
  return sc;
}

const char* kMethodNames[3] = {"Initial", "ACI", "WACI"};

OutputTable synth_table(const ExperimentTables& tables, std::size_t subset,
                        bool paper, bool with_std) {
  OutputTable t;
  t.header = {"method"};
  const char* metric_names[6] = {"coverage", "avg_length", "winkler",
                                 "pearson",  "ils_0.10",   "mcd_5"};
  for (const char* name : metric_names) {
    t.header.push_back(name);
    if (!paper && with_std) t.header.push_back(std::string(name) + "_std");
  }
  for (std::size_t m = 0; m < 3; ++m) {
    const MetricMoments& cell = tables.cells[subset][m];
    std::vector<std::string> row{kMethodNames[m]};
    push_pair(row, paper, with_std, cell.mean.coverage, cell.stddev.coverage);
    push_pair(row, paper, with_std, cell.mean.mean_length,
              cell.stddev.mean_length);
    push_pair(row, paper, with_std, cell.mean.winkler, cell.stddev.winkler);
    push_pair(row, paper, with_std, cell.mean.pearson, cell.stddev.pearson);
    push_pair(row, paper, with_std, cell.mean.ils, cell.stddev.ils,
              /*dashes=*/m == kMethodNone);
    push_pair(row, paper, with_std, cell.mean.mcd_value, cell.stddev.mcd_value);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

void apply_config_map(RunConfig& config,
                      const std::map<std::string, std::string>& entries) {
  for (const auto& [key, value] : entries) {
    if (key == "out") {
      config.out = value;
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(to_size(key, value));
    } else if (key == "alpha") {
      config.alpha = to_double(key, value);
    } else if (key == "gamma") {
      config.gamma = to_double(key, value);
    } else if (key == "sigma") {
      config.sigma = to_double(key, value);
    } else if (key == "grid_step") {
      config.grid_step = to_double(key, value);
    } else if (key == "window_days") {
      config.window_days = static_cast<int>(to_size(key, value));
    } else if (key == "json") {
      config.json = to_bool(key, value);
    } else if (key == "paper_style") {
      config.paper_style = to_bool(key, value);
    } else if (key == "runs") {
      config.runs = to_size(key, value);
    } else if (key == "length") {
      config.length = to_size(key, value);
    } else if (key == "warmup") {
      config.warmup = to_size(key, value);
    } else if (key == "score_capacity") {
      config.score_capacity = to_size(key, value);
    } else if (key == "weights") {
      config.weights = value;
    } else if (key == "lambda_decay") {
      config.lambda_decay = to_double(key, value);
    } else if (key == "input") {
      config.input = value;
    } else if (key == "test_start") {
      config.test_start = value;
    } else if (key == "refit_stride") {
      config.refit_stride = to_size(key, value);
    } else if (key == "panel_score_capacity") {
      config.panel_score_capacity = to_size(key, value);
    } else if (key == "bootstrap") {
      config.bootstrap = to_bool(key, value);
    } else if (key == "bootstrap_samples") {
      config.bootstrap_samples = to_size(key, value);
    } else if (key == "bootstrap_size") {
      config.bootstrap_size = to_size(key, value);
    } else if (key == "block_length") {
      config.block_length = to_double(key, value);
    } else if (key == "sigma_min") {
      config.sigma_min = to_double(key, value);
    } else if (key == "sigma_max") {
      config.sigma_max = to_double(key, value);
    } else if (key == "sigma_step") {
      config.sigma_step = to_double(key, value);
    } else if (key == "sweep_runs") {
      config.sweep_runs = to_size(key, value);
    } else if (key == "model") {
      config.model = value;
    } else if (key == "levels") {
      config.levels = value;
    } else if (key == "window_rows") {
      config.window_rows = to_size(key, value);
    } else {
      throw UsageError("config: unknown key '" + key + "'");
    }
  }
}

int cmd_synth(const RunConfig& config) {
  const SyntheticConfig sc = synth_config(config);
  const ExperimentTables tables = run_experiment(sc);
  ensure_out_dir(config.out);
  const bool with_std = sc.n_runs > 1;
  const char* names[3] = {"table1.csv", "table2.csv", "table3.csv"};
  const std::size_t subsets[3] = {kSubsetHigh, kSubsetLow, kSubsetOverall};
  for (int i = 0; i < 3; ++i) {
    const OutputTable t =
        synth_table(tables, subsets[i], config.paper_style, with_std);
    write_table(t, config.out + "/" + names[i], config.json);
  }
  return 0;
}

namespace {

struct PanelMethodRow {
  std::string name;
  MetricsReport report;
  BootstrapStds stds;
  bool conformalized = false;
  bool with_stds = false;
};

OutputTable panel_table(const std::vector<PanelMethodRow>& rows, bool paper) {
  OutputTable t;
  t.header = {"method"};
  const char* metric_names[8] = {"coverage", "avg_length", "winkler",
                                 "pearson",  "ils_0.10",   "spearman",
                                 "length_std", "mcd_5"};
  const bool any_stds =
      std::any_of(rows.begin(), rows.end(),
                  [](const PanelMethodRow& r) { return r.with_stds; });
  for (const char* name : metric_names) {
    t.header.push_back(name);
    if (!paper && any_stds) t.header.push_back(std::string(name) + "_std");
  }
  for (const PanelMethodRow& r : rows) {
    std::vector<std::string> row{r.name};
    push_pair(row, paper, any_stds, r.report.coverage, r.stds.coverage);
    push_pair(row, paper, any_stds, r.report.mean_length, r.stds.mean_length);
    push_pair(row, paper, any_stds, r.report.winkler, r.stds.winkler);
    push_pair(row, paper, any_stds, r.report.pearson, r.stds.pearson);
    push_pair(row, paper, any_stds, r.report.ils, r.stds.ils,
              /*dashes=*/!r.conformalized);
    push_pair(row, paper, any_stds, r.report.spearman, r.stds.spearman);
    push_pair(row, paper, any_stds, r.report.length_std, r.stds.length_std);
    push_pair(row, paper, any_stds, r.report.mcd_value, r.stds.mcd_value);
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string alpha_table_name(double alpha) {
  if (std::fabs(alpha - 0.2) < 1e-12) return "table4.csv";
  if (std::fabs(alpha - 0.1) < 1e-12) return "table5.csv";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "epf_alpha%g.csv", alpha);
  return buf;
}

}  // namespace

int cmd_epf(const RunConfig& config) {
  if (config.input.empty()) {
    throw UsageError("epf: --input CSV is required");
  }
  const ForecastPanel panel =
      ingest_panel(config.input, /*derive_hour_groups=*/true);
  if (config.window_days <= 0) {
    throw UsageError("epf: window_days must be positive");
  }
  const std::size_t window =
      static_cast<std::size_t>(config.window_days) * 24;

  std::vector<double> alphas;
  if (config.alpha) {
    alphas.push_back(*config.alpha);
  } else {
    alphas = {0.2, 0.1};
  }

  ensure_out_dir(config.out);
  const std::array<ModelKind, 3> kinds = {ModelKind::QRA, ModelKind::HQR,
                                          ModelKind::HQR_W};
  const char* kind_names[3] = {"QRA", "HQR", "HQR-W"};
  const std::array<ConformalMethod, 3> methods = {
      ConformalMethod::None, ConformalMethod::Aci, ConformalMethod::Waci};
  const char* method_suffix[3] = {"", " (ACI)", " (WACI)"};

  for (const double alpha : alphas) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw UsageError("epf: alpha must be in (0, 1)");
    }
    std::vector<PanelMethodRow> rows;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
        RollingConfig rc;
        rc.window = window;
        rc.alpha = alpha;
        rc.refit_stride = config.refit_stride;
        const RollingResult rolled = rolling_intervals(panel, kinds[ki], rc);

        // Warmup per hour group: records before test_start, or a third of
        // the emitted span (capped by the score capacity) when unset.
        std::size_t warmup = 0;
        const std::size_t emitted_per_group = rolled.stream.size() / 24;
        if (!config.test_start.empty()) {
          const std::int64_t split = parse_timestamp(config.test_start);
          std::map<int, std::size_t> counts;
          for (std::size_t i = 0; i < rolled.stream.size(); ++i) {
            if (rolled.stream.timestamps[i] < split) {
              ++counts[rolled.stream.group_keys[i]];
            }
          }
          std::size_t lo = emitted_per_group;
          std::size_t hi = 0;
          for (int h = 0; h < 24; ++h) {
            lo = std::min(lo, counts[h]);
            hi = std::max(hi, counts[h]);
          }
          if (lo != hi) {
            throw DataError(
                "epf: test_start splits hour groups unevenly; align it to "
                "midnight of a full day");
          }
          warmup = lo;
        } else {
          warmup = std::min(config.panel_score_capacity, emitted_per_group / 3);
        }
        if (warmup == 0 || emitted_per_group <= warmup) {
          throw DataError("epf: not enough emitted steps per hour for warmup");
        }

        ConformalStreamConfig cc;
        cc.method = methods[mi];
        cc.alpha_star = alpha;
        cc.gamma = config.gamma.value_or(0.02);
        cc.weight_kind = parse_weights(config.weights);
        cc.sigma = config.sigma.value_or(3.0);
        cc.lambda_decay = config.lambda_decay;
        cc.grid_delta = config.grid_step.value_or(0.1);
        cc.score_capacity = config.panel_score_capacity;
        cc.warmup = warmup;
        const ConformalStreamResult res =
            run_conformal_stream(rolled.stream, cc);
        const ReplacementInterval repl{res.replacement_lower,
                                       res.replacement_upper};
        std::vector<EvaluationRecord> records;
        records.reserve(res.records.size());
        for (const StreamStepRecord& rec : res.records) {
          records.push_back(
              EvaluationRecord{rec.y, rec.center, rec.base, rec.conformalized});
        }

        PanelMethodRow row;
        row.name = std::string(kind_names[ki]) + method_suffix[mi];
        row.report = evaluate(records, alpha, repl);
        row.conformalized = methods[mi] != ConformalMethod::None;
        if (config.bootstrap) {
          BootstrapConfig bc;
          bc.n_samples = config.bootstrap_samples;
          bc.sample_size = config.bootstrap_size;
          bc.mean_block_length =
              config.block_length > 0.0 ? config.block_length : 24.0;
          bc.seed = config.seed;
          row.stds = bootstrap_report_stds(records, alpha, repl, bc);
          row.with_stds = true;
        }
        rows.push_back(std::move(row));
      }
    }
    const OutputTable t = panel_table(rows, config.paper_style);
    write_table(t, config.out + "/" + alpha_table_name(alpha), config.json);
  }
  return 0;
}

int cmd_sigma_sweep(const RunConfig& config) {
  if (!(config.sigma_step > 0.0) || !(config.sigma_max >= config.sigma_min) ||
      !(config.sigma_min > 0.0)) {
    throw UsageError("sigma-sweep: need 0 < sigma_min <= sigma_max, step > 0");
  }
  SyntheticConfig sc = synth_config(config);
  sc.n_runs = config.sweep_runs;

  OutputTable t;
  t.header = {"sigma",   "coverage", "avg_length", "winkler",
              "pearson", "ils_0.10", "mcd_5"};
  const auto n_steps = static_cast<std::size_t>(
      std::floor((config.sigma_max - config.sigma_min) / config.sigma_step +
                 1e-9));
  MetricMoments aci_reference;
  for (std::size_t i = 0; i <= n_steps; ++i) {
    sc.waci_sigma =
        config.sigma_min + static_cast<double>(i) * config.sigma_step;
    const ExperimentTables tables = run_experiment(sc);
    const MetricMoments& cell = tables.cells[kSubsetOverall][kMethodWaci];
    t.rows.push_back({format_number(sc.waci_sigma),
                      format_number(cell.mean.coverage),
                      format_number(cell.mean.mean_length),
                      format_number(cell.mean.winkler),
                      format_number(cell.mean.pearson),
                      format_number(cell.mean.ils),
                      format_number(cell.mean.mcd_value)});
    aci_reference = tables.cells[kSubsetOverall][kMethodAci];
  }
  // The scalar controller ignores length information, making it the
  // infinite-kernel-width limit.
  t.rows.push_back({"inf", format_number(aci_reference.mean.coverage),
                    format_number(aci_reference.mean.mean_length),
                    format_number(aci_reference.mean.winkler),
                    format_number(aci_reference.mean.pearson),
                    format_number(aci_reference.mean.ils),
                    format_number(aci_reference.mean.mcd_value)});
  ensure_out_dir(config.out);
  write_table(t, config.out + "/sigma_sweep.csv", config.json);
  return 0;
}

int cmd_coef_trace(const RunConfig& config) {
  ForecastPanel panel;
  bool hourly = false;
  if (!config.input.empty()) {
    panel = ingest_panel(config.input, /*derive_hour_groups=*/true);
    hourly = true;
  } else {
    panel = make_heteroscedastic_panel(1200, 5, config.seed);
  }
  const ModelKind kind = parse_model(config.model);
  RollingConfig rc;
  if (config.window_rows > 0) {
    rc.window = config.window_rows;
  } else if (hourly) {
    rc.window = static_cast<std::size_t>(config.window_days) * 24;
  } else {
    rc.window = 300;
  }
  rc.alpha = config.alpha.value_or(0.2);
  rc.refit_stride = config.refit_stride > 0 ? config.refit_stride : 1;
  const std::vector<double> levels = parse_levels(config.levels);
  const std::vector<CoefficientTraceRow> rows =
      coefficient_trace(panel, kind, rc, levels);

  OutputTable t;
  t.header = {"t",          "timestamp",    "alpha",
              "lambda_low", "lambda_high", "degenerate"};
  for (const CoefficientTraceRow& r : rows) {
    t.rows.push_back({std::to_string(r.t),
                      format_timestamp(panel.timestamps[r.t]),
                      format_number(r.alpha), format_number(r.lambda_lower),
                      format_number(r.lambda_upper),
                      r.degenerate ? "1" : "0"});
  }
  ensure_out_dir(config.out);
  write_table(t, config.out + "/coef_trace.csv", config.json);
  return 0;
}

ForecastPanel make_toy_epf_panel(std::size_t days, std::size_t m,
                                 std::uint64_t seed) {
  if (days == 0 || m == 0) {
    throw std::invalid_argument("toy panel: days and m must be positive");
  }
  UniformStream rng(seed);
  const std::size_t n = days * 24;
  ForecastPanel panel;
  panel.timestamps.reserve(n);
  panel.y.reserve(n);
  panel.forecasts.resize(static_cast<Eigen::Index>(n),
                         static_cast<Eigen::Index>(m));
  const std::int64_t start = parse_timestamp("2024-01-01T00:00:00");
  constexpr double kTau = 6.283185307179586;
  for (std::size_t i = 0; i < n; ++i) {
    const double hour = static_cast<double>(i % 24);
    const double day = std::floor(static_cast<double>(i) / 24.0);
    const double base = 50.0 + 15.0 * std::sin(kTau * (hour - 8.0) / 24.0) +
                        5.0 * std::sin(kTau * day / 7.0) + 0.01 * day;
    // Evening hours are the volatile ones; disagreement tracks volatility.
    const double vol =
        2.0 + 3.0 * std::exp(-0.5 * std::pow((hour - 18.0) / 3.0, 2.0)) +
        1.5 * std::exp(-0.5 * std::pow((hour - 8.0) / 2.5, 2.0));
    panel.timestamps.push_back(start + static_cast<std::int64_t>(i) * 3600);
    for (std::size_t j = 0; j < m; ++j) {
      const double bias =
          0.8 * (static_cast<double>(j) - 0.5 * static_cast<double>(m - 1));
      panel.forecasts(static_cast<Eigen::Index>(i),
                      static_cast<Eigen::Index>(j)) =
          base + bias + vol * rng.next_normal();
    }
    panel.y.push_back(base + 1.2 * vol * rng.next_normal());
  }
  panel.validate();
  return panel;
}

ForecastPanel make_heteroscedastic_panel(std::size_t length, std::size_t m,
                                         std::uint64_t seed) {
  if (length == 0 || m == 0) {
    throw std::invalid_argument("hetero panel: length and m must be positive");
  }
  UniformStream rng(seed);
  ForecastPanel panel;
  panel.timestamps.reserve(length);
  panel.y.reserve(length);
  panel.forecasts.resize(static_cast<Eigen::Index>(length),
                         static_cast<Eigen::Index>(m));
  constexpr double kTau = 6.283185307179586;
  for (std::size_t t = 0; t < length; ++t) {
    const double td = static_cast<double>(t);
    const double base = 50.0 + 10.0 * std::sin(kTau * td / 200.0) + 0.01 * td;
    const double spread = 1.5 + 1.25 * std::sin(kTau * td / 137.0 + 1.0);
    panel.timestamps.push_back(static_cast<std::int64_t>(t) * 3600);
    for (std::size_t j = 0; j < m; ++j) {
      panel.forecasts(static_cast<Eigen::Index>(t),
                      static_cast<Eigen::Index>(j)) =
          base + spread * rng.next_normal();
    }
    panel.y.push_back(base + 1.5 * spread * rng.next_normal());
  }
  panel.validate();
  return panel;
}

}  // namespace hqrwaci
