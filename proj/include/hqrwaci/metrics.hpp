#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hqrwaci/series.hpp"

namespace hqrwaci {

/// One evaluated step: realization, point prediction, the raw model interval
/// and its conformalized version.
struct EvaluationRecord {
  double y = 0.0;
  double center = 0.0;
  Interval base;
  Interval conformalized;
};

/// Stand-in bounds for infinite intervals: the envelope [min lower,
/// max upper] of the base model over the calibration warmup.
struct ReplacementInterval {
  double lower = 0.0;
  double upper = 0.0;
  [[nodiscard]] double length() const { return upper - lower; }
};

/// Interval length with the degenerate kinds resolved: finite keeps its own
/// length, infinite borrows the replacement envelope, empty contributes 0.
[[nodiscard]] double effective_length(const Interval& interval,
                                      const ReplacementInterval& replacement);

/// Share of records whose conformalized interval covers y, in percent.
[[nodiscard]] double empirical_coverage(std::span<const EvaluationRecord> records);

/// Mean effective length of the conformalized intervals.
[[nodiscard]] double mean_interval_length(std::span<const EvaluationRecord> records,
                                          const ReplacementInterval& replacement);

/// Mean Winkler (interval) score at miss penalty slope 2/alpha. Infinite
/// intervals cover by construction and contribute the replacement length;
/// empty intervals contribute zero length plus the penalty measured against
/// the midpoint of their collapsed bounds.
[[nodiscard]] double winkler_score(std::span<const EvaluationRecord> records,
                                   double alpha,
                                   const ReplacementInterval& replacement);

/// Correlation value plus a flag for degenerate inputs (zero variance on
/// either side), in which case the value is 0.
struct CorrelationResult {
  double value = 0.0;
  bool degenerate = false;
};

/// Pearson correlation between effective conformalized length and the
/// coverage indicator.
[[nodiscard]] CorrelationResult pearson_length_coverage(
    std::span<const EvaluationRecord> records,
    const ReplacementInterval& replacement);

/// Coverage deviation (percentage points) on the share lambda of records
/// whose conformalization changed interval length the most: selects records
/// with |effective conf length - base length| at or above the (1 - lambda)
/// empirical quantile and returns 100 * |coverage there - (1 - alpha)|.
[[nodiscard]] double ils_lambda_coverage(std::span<const EvaluationRecord> records,
                                         double lambda, double alpha,
                                         const ReplacementInterval& replacement);

/// Spearman rank correlation (average ranks on ties) between the absolute
/// prediction error |y - center| and the effective conformalized length.
[[nodiscard]] CorrelationResult spearman_error_length(
    std::span<const EvaluationRecord> records,
    const ReplacementInterval& replacement);

/// Population standard deviation of effective conformalized lengths.
[[nodiscard]] double interval_length_std(std::span<const EvaluationRecord> records,
                                         const ReplacementInterval& replacement);

/// Mean coverage deviation across K = 100/lambda equal-frequency length bins
/// (lambda in percent): bins are [q_{(k-1)/K}, q_{k/K}) of effective length
/// with the top bin closed; returns 100 * mean_k |coverage_k - (1 - alpha)|
/// over non-empty bins. Tied length plateaus may empty a bin; such bins are
/// skipped so the value stays permutation-invariant.
[[nodiscard]] double mcd(std::span<const EvaluationRecord> records, double lambda,
                         double alpha, const ReplacementInterval& replacement);

/// The full per-stream metric set in reporting units (percent where
/// applicable), with degeneracy flags and degenerate-interval counts.
struct MetricsReport {
  std::size_t n = 0;
  double coverage = 0.0;
  double mean_length = 0.0;
  double winkler = 0.0;
  double pearson = 0.0;
  bool pearson_degenerate = false;
  double ils = 0.0;
  double spearman = 0.0;
  bool spearman_degenerate = false;
  double length_std = 0.0;
  double mcd_value = 0.0;
  std::size_t n_empty = 0;
  std::size_t n_infinite = 0;
};

/// Evaluates all metrics on one record span. ils_lambda is a fraction
/// (0.10 = top decile), mcd_lambda a bin share in percent (5 = 20 bins).
[[nodiscard]] MetricsReport evaluate(std::span<const EvaluationRecord> records,
                                     double alpha,
                                     const ReplacementInterval& replacement,
                                     double ils_lambda = 0.10,
                                     double mcd_lambda = 5.0);

/// Stationary-bootstrap configuration (geometric block lengths, wrap-around
/// indexing, restart probability 1/mean_block_length).
struct BootstrapConfig {
  std::size_t n_samples = 1000;
  std::size_t sample_size = 1000;
  double mean_block_length = 50.0;
  std::uint64_t seed = 0;
};

/// Standard deviation of a scalar metric across stationary-bootstrap
/// resamples of the record sequence.
[[nodiscard]] double stationary_bootstrap_std(
    const std::function<double(std::span<const EvaluationRecord>)>& metric,
    std::span<const EvaluationRecord> records, const BootstrapConfig& config);

/// Bootstrap standard deviations for every metric in MetricsReport, sharing
/// one index stream across metrics per replicate.
struct BootstrapStds {
  double coverage = 0.0;
  double mean_length = 0.0;
  double winkler = 0.0;
  double pearson = 0.0;
  double ils = 0.0;
  double spearman = 0.0;
  double length_std = 0.0;
  double mcd_value = 0.0;
};

[[nodiscard]] BootstrapStds bootstrap_report_stds(
    std::span<const EvaluationRecord> records, double alpha,
    const ReplacementInterval& replacement, const BootstrapConfig& config,
    double ils_lambda = 0.10, double mcd_lambda = 5.0);

}  // namespace hqrwaci
