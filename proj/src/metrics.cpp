#include "hqrwaci/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "hqrwaci/distributions.hpp"

namespace hqrwaci {

namespace {

void require_nonempty(std::span<const EvaluationRecord> records) {
  if (records.empty()) {
    throw std::invalid_argument("metrics: empty record span");
  }
}

std::vector<double> effective_lengths(std::span<const EvaluationRecord> records,
                                      const ReplacementInterval& replacement) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(effective_length(r.conformalized, replacement));
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) /
         static_cast<double>(v.size());
}

CorrelationResult pearson_of(const std::vector<double>& x,
                             const std::vector<double>& z) {
  const double mx = mean_of(x);
  const double mz = mean_of(z);
  double sxz = 0.0;
  double sxx = 0.0;
  double szz = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dz = z[i] - mz;
    sxz += dx * dz;
    sxx += dx * dx;
    szz += dz * dz;
  }
  if (sxx <= 0.0 || szz <= 0.0) {
    return {0.0, true};
  }
  return {sxz / std::sqrt(sxx * szz), false};
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

// Type-1 empirical quantile: k-th smallest with k = ceil(p n - 1e-9)
// clamped to [1, n]; expects sorted ascending input.
double sorted_quantile(const std::vector<double>& sorted, double p) {
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<long long>(std::ceil(p * n - 1e-9));
  k = std::max<long long>(1, std::min<long long>(k, sorted.size()));
  return sorted[static_cast<std::size_t>(k - 1)];
}

}  // namespace

double effective_length(const Interval& interval,
                        const ReplacementInterval& replacement) {
  switch (interval.kind) {
    case IntervalKind::Empty:
      return 0.0;
    case IntervalKind::Infinite:
      return replacement.length();
    case IntervalKind::Finite:
      break;
  }
  return interval.upper - interval.lower;
}

double empirical_coverage(std::span<const EvaluationRecord> records) {
  require_nonempty(records);
  std::size_t hits = 0;
  for (const auto& r : records) {
    if (r.conformalized.covers(r.y)) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(records.size());
}

double mean_interval_length(std::span<const EvaluationRecord> records,
                            const ReplacementInterval& replacement) {
  require_nonempty(records);
  return mean_of(effective_lengths(records, replacement));
}

double winkler_score(std::span<const EvaluationRecord> records, double alpha,
                     const ReplacementInterval& replacement) {
  require_nonempty(records);
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("winkler_score: alpha must be in (0, 1)");
  }
  const double slope = 2.0 / alpha;
  double total = 0.0;
  for (const auto& r : records) {
    const Interval& c = r.conformalized;
    double w = 0.0;
    switch (c.kind) {
      case IntervalKind::Empty: {
        const double m = c.midpoint();
        w = slope * std::fabs(r.y - m);
        break;
      }
      case IntervalKind::Infinite:
        w = replacement.length();
        break;
      case IntervalKind::Finite: {
        w = c.upper - c.lower;
        if (r.y < c.lower) w += slope * (c.lower - r.y);
        if (r.y > c.upper) w += slope * (r.y - c.upper);
        break;
      }
    }
    total += w;
  }
  return total / static_cast<double>(records.size());
}

CorrelationResult pearson_length_coverage(
    std::span<const EvaluationRecord> records,
    const ReplacementInterval& replacement) {
  require_nonempty(records);
  const std::vector<double> lengths = effective_lengths(records, replacement);
  std::vector<double> cover(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    cover[i] = records[i].conformalized.covers(records[i].y) ? 1.0 : 0.0;
  }
  return pearson_of(lengths, cover);
}

double ils_lambda_coverage(std::span<const EvaluationRecord> records,
                           double lambda, double alpha,
                           const ReplacementInterval& replacement) {
  require_nonempty(records);
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("ils: lambda must be in (0, 1]");
  }
  const std::size_t n = records.size();
  std::vector<double> delta(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double conf_len =
        effective_length(records[i].conformalized, replacement);
    const double base_len = effective_length(records[i].base, replacement);
    delta[i] = std::fabs(conf_len - base_len);
  }
  // Threshold at the (1 - lambda) quantile so about lambda * n records with
  // the largest shifts are selected; lambda = 1 selects everything.
  std::vector<double> sorted = delta;
  std::sort(sorted.begin(), sorted.end());
  auto k = static_cast<long long>(
               std::floor((1.0 - lambda) * static_cast<double>(n) + 1e-9)) +
           1;
  k = std::max<long long>(1, std::min<long long>(k, n));
  const double threshold = sorted[static_cast<std::size_t>(k - 1)];

  std::size_t selected = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (delta[i] >= threshold) {
      ++selected;
      if (records[i].conformalized.covers(records[i].y)) ++hits;
    }
  }
  const double cov = static_cast<double>(hits) / static_cast<double>(selected);
  return 100.0 * std::fabs(cov - (1.0 - alpha));
}

CorrelationResult spearman_error_length(
    std::span<const EvaluationRecord> records,
    const ReplacementInterval& replacement) {
  require_nonempty(records);
  std::vector<double> err(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    err[i] = std::fabs(records[i].y - records[i].center);
  }
  const std::vector<double> lengths = effective_lengths(records, replacement);
  return pearson_of(average_ranks(err), average_ranks(lengths));
}

double interval_length_std(std::span<const EvaluationRecord> records,
                           const ReplacementInterval& replacement) {
  require_nonempty(records);
  const std::vector<double> lengths = effective_lengths(records, replacement);
  const double m = mean_of(lengths);
  double acc = 0.0;
  for (const double v : lengths) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(lengths.size()));
}

double mcd(std::span<const EvaluationRecord> records, double lambda,
           double alpha, const ReplacementInterval& replacement) {
  require_nonempty(records);
  if (!(lambda > 0.0 && lambda <= 100.0)) {
    throw std::invalid_argument("mcd: lambda must be in (0, 100] percent");
  }
  const auto k_bins = static_cast<std::size_t>(
      std::max(1.0, std::round(100.0 / lambda)));
  const std::vector<double> lengths = effective_lengths(records, replacement);
  std::vector<double> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> edges;  // interior edges q_{k/K}, k = 1..K-1
  edges.reserve(k_bins - 1);
  for (std::size_t k = 1; k < k_bins; ++k) {
    edges.push_back(sorted_quantile(
        sorted, static_cast<double>(k) / static_cast<double>(k_bins)));
  }

  std::vector<std::size_t> count(k_bins, 0);
  std::vector<std::size_t> hits(k_bins, 0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    // First bin whose upper edge exceeds the length; the top bin absorbs the
    // rest, closing it above.
    std::size_t bin = k_bins - 1;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (lengths[i] < edges[k]) {
        bin = k;
        break;
      }
    }
    ++count[bin];
    if (records[i].conformalized.covers(records[i].y)) ++hits[bin];
  }

  double acc = 0.0;
  std::size_t nonempty = 0;
  for (std::size_t k = 0; k < k_bins; ++k) {
    if (count[k] == 0) continue;
    const double cov =
        static_cast<double>(hits[k]) / static_cast<double>(count[k]);
    acc += std::fabs(cov - (1.0 - alpha));
    ++nonempty;
  }
  return 100.0 * acc / static_cast<double>(nonempty);
}

MetricsReport evaluate(std::span<const EvaluationRecord> records, double alpha,
                       const ReplacementInterval& replacement,
                       double ils_lambda, double mcd_lambda) {
  require_nonempty(records);
  MetricsReport rep;
  rep.n = records.size();
  rep.coverage = empirical_coverage(records);
  rep.mean_length = mean_interval_length(records, replacement);
  rep.winkler = winkler_score(records, alpha, replacement);
  const CorrelationResult pc = pearson_length_coverage(records, replacement);
  rep.pearson = pc.value;
  rep.pearson_degenerate = pc.degenerate;
  rep.ils = ils_lambda_coverage(records, ils_lambda, alpha, replacement);
  const CorrelationResult sc = spearman_error_length(records, replacement);
  rep.spearman = sc.value;
  rep.spearman_degenerate = sc.degenerate;
  rep.length_std = interval_length_std(records, replacement);
  rep.mcd_value = mcd(records, mcd_lambda, alpha, replacement);
  for (const auto& r : records) {
    if (r.conformalized.kind == IntervalKind::Empty) ++rep.n_empty;
    if (r.conformalized.kind == IntervalKind::Infinite) ++rep.n_infinite;
  }
  return rep;
}

namespace {

std::vector<std::size_t> bootstrap_indices(std::size_t n,
                                           std::size_t sample_size,
                                           double mean_block_length,
                                           std::uint64_t seed) {
  UniformStream rng(seed);
  const double restart = 1.0 / mean_block_length;
  std::vector<std::size_t> idx(sample_size);
  std::size_t cur = 0;
  for (std::size_t i = 0; i < sample_size; ++i) {
    if (i == 0 || rng.next() < restart) {
      cur = std::min<std::size_t>(
          static_cast<std::size_t>(rng.next() * static_cast<double>(n)), n - 1);
    } else {
      cur = (cur + 1) % n;
    }
    idx[i] = cur;
  }
  return idx;
}

double std_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (const double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

double stationary_bootstrap_std(
    const std::function<double(std::span<const EvaluationRecord>)>& metric,
    std::span<const EvaluationRecord> records, const BootstrapConfig& config) {
  require_nonempty(records);
  if (!(config.mean_block_length >= 1.0)) {
    throw std::invalid_argument("bootstrap: mean block length must be >= 1");
  }
  if (config.n_samples < 2 || config.sample_size == 0) {
    throw std::invalid_argument("bootstrap: need >= 2 samples of size >= 1");
  }
  std::vector<double> values(config.n_samples);
  std::vector<EvaluationRecord> resampled(config.sample_size);
  for (std::size_t s = 0; s < config.n_samples; ++s) {
    const auto idx =
        bootstrap_indices(records.size(), config.sample_size,
                          config.mean_block_length, derive_seed(config.seed, s));
    for (std::size_t i = 0; i < idx.size(); ++i) resampled[i] = records[idx[i]];
    values[s] = metric(resampled);
  }
  return std_of(values);
}

BootstrapStds bootstrap_report_stds(std::span<const EvaluationRecord> records,
                                    double alpha,
                                    const ReplacementInterval& replacement,
                                    const BootstrapConfig& config,
                                    double ils_lambda, double mcd_lambda) {
  require_nonempty(records);
  if (config.n_samples < 2 || config.sample_size == 0) {
    throw std::invalid_argument("bootstrap: need >= 2 samples of size >= 1");
  }
  std::vector<double> cov(config.n_samples);
  std::vector<double> len(config.n_samples);
  std::vector<double> win(config.n_samples);
  std::vector<double> pear(config.n_samples);
  std::vector<double> ils(config.n_samples);
  std::vector<double> spear(config.n_samples);
  std::vector<double> lstd(config.n_samples);
  std::vector<double> mcdv(config.n_samples);
  std::vector<EvaluationRecord> resampled(config.sample_size);
  for (std::size_t s = 0; s < config.n_samples; ++s) {
    const auto idx =
        bootstrap_indices(records.size(), config.sample_size,
                          config.mean_block_length, derive_seed(config.seed, s));
    for (std::size_t i = 0; i < idx.size(); ++i) resampled[i] = records[idx[i]];
    const MetricsReport rep =
        evaluate(resampled, alpha, replacement, ils_lambda, mcd_lambda);
    cov[s] = rep.coverage;
    len[s] = rep.mean_length;
    win[s] = rep.winkler;
    pear[s] = rep.pearson;
    ils[s] = rep.ils;
    spear[s] = rep.spearman;
    lstd[s] = rep.length_std;
    mcdv[s] = rep.mcd_value;
  }
  BootstrapStds out;
  out.coverage = std_of(cov);
  out.mean_length = std_of(len);
  out.winkler = std_of(win);
  out.pearson = std_of(pear);
  out.ils = std_of(ils);
  out.spearman = std_of(spear);
  out.length_std = std_of(lstd);
  out.mcd_value = std_of(mcdv);
  return out;
}

}  // namespace hqrwaci
