#include "hqrwaci/synthetic.hpp"

#include <cmath>
#include <stdexcept>

#include "hqrwaci/distributions.hpp"

namespace hqrwaci {

SyntheticRun generate_run(const SyntheticConfig& config,
                          std::uint64_t run_seed) {
  if (config.length == 0) {
    throw std::invalid_argument("generate_run: length must be positive");
  }
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
    throw std::invalid_argument("generate_run: alpha must be in (0, 1)");
  }
  const double t_crit = t_critical(1.0 - config.alpha / 2.0, config.dof);
  const double widen = std::sqrt(config.width_inflation);

  UniformStream rng(run_seed);
  SyntheticRun run;
  run.y.reserve(config.length);
  run.sigma_hat.reserve(config.length);
  run.state.reserve(config.length);
  run.stream.timestamps.reserve(config.length);
  run.stream.y.reserve(config.length);
  run.stream.intervals.reserve(config.length);
  run.stream.center.reserve(config.length);

  int state = 0;  // 0 = high volatility, runs start high
  double p_switch = 0.0;
  for (std::size_t t = 0; t < config.length; ++t) {
    const double u = rng.next();
    if (u < p_switch) {
      state ^= 1;
      p_switch = 0.0;
    } else {
      p_switch += config.transition_increment;
    }
    const double sigma = state == 0 ? config.sigma_high : config.sigma_low;
    const double td = static_cast<double>(t);
    const double sigma_hat = state == 0
                                 ? config.sigma_high + 2.0 * std::sin(0.001 * td)
                                 : config.sigma_low + std::cos(0.005 * td);
    const double y = config.mu + sigma * rng.next_normal();
    const double half = t_crit * sigma_hat * widen;

    run.y.push_back(y);
    run.sigma_hat.push_back(sigma_hat);
    run.state.push_back(state);
    run.stream.timestamps.push_back(static_cast<std::int64_t>(t));
    run.stream.y.push_back(y);
    run.stream.intervals.push_back(
        Interval::finite(config.mu - half, config.mu + half));
    run.stream.center.push_back(config.mu);
  }
  return run;
}

namespace {

ConformalStreamConfig stream_config(const SyntheticConfig& config,
                                    ConformalMethod method) {
  ConformalStreamConfig sc;
  sc.method = method;
  sc.alpha_star = config.alpha;
  sc.gamma = config.gamma;
  sc.weight_kind = config.weight_kind;
  sc.sigma = config.waci_sigma;
  sc.lambda_decay = config.lambda_decay;
  sc.grid_delta = config.grid_delta;
  sc.grid_widen_frac = config.grid_widen_frac;
  sc.score_capacity = config.score_capacity;
  sc.warmup = config.warmup;
  return sc;
}

struct Accumulator {
  std::vector<std::vector<double>> values;  // [field][run]
  std::size_t n_fields = 8;
  bool any_pearson_degenerate = false;
  bool any_spearman_degenerate = false;
  std::vector<std::size_t> n_records;
  std::size_t n_empty = 0;
  std::size_t n_infinite = 0;

  Accumulator() : values(8) {}

  void add(const MetricsReport& rep) {
    values[0].push_back(rep.coverage);
    values[1].push_back(rep.mean_length);
    values[2].push_back(rep.winkler);
    values[3].push_back(rep.pearson);
    values[4].push_back(rep.ils);
    values[5].push_back(rep.spearman);
    values[6].push_back(rep.length_std);
    values[7].push_back(rep.mcd_value);
    any_pearson_degenerate |= rep.pearson_degenerate;
    any_spearman_degenerate |= rep.spearman_degenerate;
    n_records.push_back(rep.n);
    n_empty += rep.n_empty;
    n_infinite += rep.n_infinite;
  }

  [[nodiscard]] MetricMoments moments() const {
    MetricMoments m;
    m.n_runs = values[0].size();
    const auto stat = [](const std::vector<double>& v, bool want_std) {
      double mean = 0.0;
      for (const double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      if (!want_std) return mean;
      double acc = 0.0;
      for (const double x : v) acc += (x - mean) * (x - mean);
      return std::sqrt(acc / static_cast<double>(v.size()));
    };
    const auto fill = [&](MetricsReport& rep, bool want_std) {
      rep.coverage = stat(values[0], want_std);
      rep.mean_length = stat(values[1], want_std);
      rep.winkler = stat(values[2], want_std);
      rep.pearson = stat(values[3], want_std);
      rep.ils = stat(values[4], want_std);
      rep.spearman = stat(values[5], want_std);
      rep.length_std = stat(values[6], want_std);
      rep.mcd_value = stat(values[7], want_std);
    };
    fill(m.mean, false);
    fill(m.stddev, true);
    std::size_t total_records = 0;
    for (const std::size_t n : n_records) total_records += n;
    m.mean.n = m.n_runs == 0 ? 0 : total_records / m.n_runs;
    m.mean.pearson_degenerate = any_pearson_degenerate;
    m.mean.spearman_degenerate = any_spearman_degenerate;
    m.mean.n_empty = n_empty;
    m.mean.n_infinite = n_infinite;
    return m;
  }
};

}  // namespace

ExperimentTables run_experiment(const SyntheticConfig& config) {
  if (config.n_runs == 0) {
    throw std::invalid_argument("run_experiment: n_runs must be positive");
  }
  if (config.length <= config.warmup) {
    throw std::invalid_argument("run_experiment: length must exceed warmup");
  }

  std::array<std::array<Accumulator, 3>, 3> acc;
  ExperimentTables tables;
  tables.aci_err_mean.reserve(config.n_runs);
  tables.eval_steps = config.length - config.warmup;

  const std::array<ConformalMethod, 3> methods = {
      ConformalMethod::None, ConformalMethod::Aci, ConformalMethod::Waci};

  for (std::size_t r = 0; r < config.n_runs; ++r) {
    const SyntheticRun run = generate_run(config, derive_seed(config.seed, r));
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const ConformalStreamResult res =
          run_conformal_stream(run.stream, stream_config(config, methods[m]));
      const ReplacementInterval repl{res.replacement_lower,
                                     res.replacement_upper};

      std::array<std::vector<EvaluationRecord>, 3> subsets;
      subsets[kSubsetOverall].reserve(res.records.size());
      for (const StreamStepRecord& rec : res.records) {
        EvaluationRecord er{rec.y, rec.center, rec.base, rec.conformalized};
        const int st = run.state[static_cast<std::size_t>(rec.timestamp)];
        subsets[st == 0 ? kSubsetHigh : kSubsetLow].push_back(er);
        subsets[kSubsetOverall].push_back(er);
      }
      for (std::size_t s = 0; s < 3; ++s) {
        if (subsets[s].empty()) continue;
        acc[s][m].add(evaluate(subsets[s], config.alpha, repl));
      }
      if (methods[m] == ConformalMethod::Aci) {
        double err_sum = 0.0;
        for (const StreamStepRecord& rec : res.records) err_sum += rec.err;
        tables.aci_err_mean.push_back(err_sum /
                                      static_cast<double>(res.records.size()));
      }
    }
  }

  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t m = 0; m < 3; ++m) {
      tables.cells[s][m] = acc[s][m].moments();
    }
  }
  return tables;
}

}  // namespace hqrwaci
