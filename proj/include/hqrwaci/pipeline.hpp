#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "hqrwaci/series.hpp"

namespace hqrwaci {

/// Flat knob set shared by every subcommand. Optionals fall back to
/// per-command defaults; a config file fills fields first and command-line
/// flags override it.
struct RunConfig {
  std::string out = "out";
  std::uint64_t seed = 42;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<double> sigma;
  std::optional<double> grid_step;
  int window_days = 180;
  bool json = false;
  bool paper_style = false;

  // regime-switching benchmark
  std::size_t runs = 100;
  std::size_t length = 10000;
  std::size_t warmup = 500;
  std::size_t score_capacity = 1000;
  std::string weights = "gaussian";
  double lambda_decay = 0.5;

  // panel backtest
  std::string input;
  std::string test_start;
  std::size_t refit_stride = 24;
  std::size_t panel_score_capacity = 200;
  bool bootstrap = true;
  std::size_t bootstrap_samples = 1000;
  std::size_t bootstrap_size = 1000;
  double block_length = 0.0;  // 0 = per-command default

  // kernel-width sweep
  double sigma_min = 0.5;
  double sigma_max = 5.0;
  double sigma_step = 0.5;
  std::size_t sweep_runs = 10;

  // coefficient trace
  std::string model = "hqr";
  std::string levels = "0.1,0.2,0.5";
  std::size_t window_rows = 0;  // 0 = derive from input kind
};

/// Applies `key = value` pairs (as parsed from a config file) onto a
/// RunConfig. Unknown keys or unparseable values raise UsageError.
void apply_config_map(RunConfig& config,
                      const std::map<std::string, std::string>& entries);

/// Regime-switching benchmark: three method rows per state table
/// (table1 = high state, table2 = low state, table3 = overall).
int cmd_synth(const RunConfig& config);

/// Hourly panel backtest: three model kinds, raw and with both adaptive
/// methods, conformalized per hour of day. Writes one table per alpha.
int cmd_epf(const RunConfig& config);

/// Width-kernel sweep on the benchmark, with the scalar controller as the
/// sigma = infinity reference row.
int cmd_sigma_sweep(const RunConfig& config);

/// Per-window fitted coefficients of the ensemble-spread feature across
/// quantile levels.
int cmd_coef_trace(const RunConfig& config);

/// Deterministic hourly toy panel (days x 24 rows, m forecasters) with an
/// hour-of-day volatility profile; forecaster disagreement scales with the
/// true noise so spread-aware models have signal.
[[nodiscard]] ForecastPanel make_toy_epf_panel(std::size_t days, std::size_t m,
                                               std::uint64_t seed);

/// Deterministic heteroscedastic demo panel: ensemble spread oscillates and
/// the realization noise is proportional to it.
[[nodiscard]] ForecastPanel make_heteroscedastic_panel(std::size_t length,
                                                       std::size_t m,
                                                       std::uint64_t seed);

}  // namespace hqrwaci
