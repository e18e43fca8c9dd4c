#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <string>

#include "hqrwaci/csv_io.hpp"
#include "hqrwaci/errors.hpp"
#include "hqrwaci/pipeline.hpp"

namespace {

struct CliState {
  hqrwaci::RunConfig config;
  std::string config_path;
  // Raw flag values; only applied when the user actually passed them so the
  // precedence stays: defaults < config file < command line.
  std::map<std::string, std::string> overrides;
};

void add_override_option(CLI::App* cmd, CliState& state, const std::string& flag,
                         const std::string& key, const std::string& help) {
  cmd->add_option_function<std::string>(
      flag,
      [&state, key](const std::string& value) { state.overrides[key] = value; },
      help);
}

void add_override_flag(CLI::App* cmd, CliState& state, const std::string& flag,
                       const std::string& key, const std::string& help) {
  cmd->add_flag_callback(
      flag, [&state, key]() { state.overrides[key] = "true"; }, help);
}

void add_common(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path,
                  "flat key = value config file");
  add_override_option(cmd, state, "--seed", "seed", "master RNG seed");
  add_override_option(cmd, state, "--alpha", "alpha",
                      "target miss level alpha");
  add_override_option(cmd, state, "--gamma", "gamma",
                      "controller learning rate");
  add_override_option(cmd, state, "--sigma", "sigma",
                      "Gaussian weight kernel width");
  add_override_option(cmd, state, "--grid-step", "grid_step",
                      "length grid spacing");
  add_override_option(cmd, state, "--window-days", "window_days",
                      "rolling window length in days");
  add_override_option(cmd, state, "--out", "out", "output directory");
  add_override_flag(cmd, state, "--json", "json",
                    "mirror each CSV as a JSON array");
  add_override_flag(cmd, state, "--paper-style", "paper_style",
                    "two-decimal 'mean (std)' table cells");
}

int dispatch(CliState& state,
             const std::function<int(const hqrwaci::RunConfig&)>& command) {
  if (!state.config_path.empty()) {
    hqrwaci::apply_config_map(state.config,
                              hqrwaci::parse_config_file(state.config_path));
  }
  hqrwaci::apply_config_map(state.config, state.overrides);
  return command(state.config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Prediction-interval toolkit: ensemble quantile regression with "
      "width-adaptive conformal calibration"};
  app.require_subcommand(1);
  CliState state;
  int rc = 0;

  CLI::App* synth = app.add_subcommand(
      "synth", "regime-switching benchmark; writes table1..3.csv");
  add_common(synth, state);
  add_override_option(synth, state, "--runs", "runs", "independent runs");
  add_override_option(synth, state, "--length", "length", "steps per run");
  add_override_option(synth, state, "--warmup", "warmup",
                      "calibration warmup steps");
  add_override_option(synth, state, "--score-capacity", "score_capacity",
                      "sliding score window size");
  add_override_option(synth, state, "--weights", "weights",
                      "gaussian or geometric");
  add_override_option(synth, state, "--lambda-decay", "lambda_decay",
                      "geometric weight decay");
  synth->callback([&] { rc = dispatch(state, hqrwaci::cmd_synth); });

  CLI::App* epf = app.add_subcommand(
      "epf", "hourly panel backtest; writes one table per alpha");
  add_common(epf, state);
  add_override_option(epf, state, "--input", "input", "panel CSV path");
  add_override_option(epf, state, "--test-start", "test_start",
                      "conformal evaluation start (date, midnight-aligned)");
  add_override_option(epf, state, "--refit-stride", "refit_stride",
                      "steps between refits (24 = daily)");
  add_override_option(epf, state, "--score-capacity", "panel_score_capacity",
                      "per-hour sliding score window");
  add_override_option(epf, state, "--bootstrap", "bootstrap",
                      "true/false: bootstrap std columns");
  add_override_option(epf, state, "--bootstrap-samples", "bootstrap_samples",
                      "bootstrap replicates");
  add_override_option(epf, state, "--bootstrap-size", "bootstrap_size",
                      "records per replicate");
  add_override_option(epf, state, "--block-length", "block_length",
                      "mean bootstrap block length");
  add_override_option(epf, state, "--weights", "weights",
                      "gaussian or geometric");
  epf->callback([&] { rc = dispatch(state, hqrwaci::cmd_epf); });

  CLI::App* sweep = app.add_subcommand(
      "sigma-sweep", "kernel width sweep; writes sigma_sweep.csv");
  add_common(sweep, state);
  add_override_option(sweep, state, "--sigma-min", "sigma_min", "sweep start");
  add_override_option(sweep, state, "--sigma-max", "sigma_max", "sweep end");
  add_override_option(sweep, state, "--sigma-step", "sigma_step", "sweep step");
  add_override_option(sweep, state, "--runs", "sweep_runs", "runs per sigma");
  add_override_option(sweep, state, "--length", "length", "steps per run");
  sweep->callback([&] { rc = dispatch(state, hqrwaci::cmd_sigma_sweep); });

  CLI::App* trace = app.add_subcommand(
      "coef-trace", "spread-coefficient trace; writes coef_trace.csv");
  add_common(trace, state);
  add_override_option(trace, state, "--input", "input",
                      "panel CSV (omit for the built-in demo panel)");
  add_override_option(trace, state, "--model", "model", "qra, hqr or hqr_w");
  add_override_option(trace, state, "--levels", "levels",
                      "comma-separated alpha levels");
  add_override_option(trace, state, "--window-rows", "window_rows",
                      "rolling window in rows (overrides --window-days)");
  add_override_option(trace, state, "--refit-stride", "refit_stride",
                      "steps between refits");
  trace->callback([&] { rc = dispatch(state, hqrwaci::cmd_coef_trace); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const hqrwaci::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const hqrwaci::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const hqrwaci::SolverError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
  return rc;
}
