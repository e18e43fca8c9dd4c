#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hqrwaci/series.hpp"

namespace hqrwaci {

/// Sliding calibration window: keeps the most recent `capacity` scores in
/// insertion order and answers order-statistic queries in O(1) via a parallel
/// sorted array (inserts are O(capacity), fine for the capacities used here).
class ScoreSet {
 public:
  explicit ScoreSet(std::size_t capacity);

  void push(double score);
  [[nodiscard]] std::size_t size() const { return fifo_.size(); }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  /// k-th smallest score, 1-based; throws std::out_of_range outside [1, size].
  [[nodiscard]] double kth_smallest(std::size_t k) const;
  [[nodiscard]] const std::deque<double>& insertion_order() const {
    return fifo_;
  }
  [[nodiscard]] const std::vector<double>& sorted() const { return sorted_; }

 private:
  std::size_t capacity_;
  std::vector<double> sorted_;
  std::deque<double> fifo_;
};

/// p-quantile of scores augmented with +inf: with n stored scores the index
/// is k = ceil(p * (n + 1) - 1e-9) (the epsilon absorbs FP round-up). k > n
/// yields +inf, k <= 0 yields -inf, otherwise the k-th smallest score.
[[nodiscard]] double augmented_quantile(const ScoreSet& scores, double p);
/// Same on an already-sorted ascending span.
[[nodiscard]] double augmented_quantile(std::span<const double> sorted_scores,
                                        double p);

/// Conformity score of y against a finite two-sided interval [l, u]:
/// max{y - u, l - y}. Negative inside, positive outside. Throws
/// std::invalid_argument for empty or infinite intervals.
[[nodiscard]] double cqr_score(double y, const Interval& interval);

/// Widens (q > 0) or shrinks (q < 0) a finite base interval to
/// [l - q, u + q]. Over-shrinking collapses to the empty interval (collapsed
/// bounds retained); q = +inf gives the infinite interval; q = -inf gives the
/// empty interval centered on the base midpoint.
[[nodiscard]] Interval cqr_conformalize(const Interval& base, double q);

/// Split-conformal state for symmetric intervals around a point forecast.
struct ScpState {
  double alpha;
  ScoreSet scores;
  ScpState(double alpha_level, std::size_t capacity)
      : alpha(alpha_level), scores(capacity) {}
};

/// Emits mu_hat +/- Q_{1-alpha}(|residual| scores U {+inf}), then absorbs the
/// realized absolute residual |y - mu_hat| into the score window.
[[nodiscard]] Interval scp_step(ScpState& state, double mu_hat, double y);

/// Uniform grid of interval lengths. Built with >= 2 points; the single()
/// factory exists only for the degenerate mode where width-adaptive tracking
/// collapses to the scalar controller.
struct LengthGrid {
  std::vector<double> points;

  static LengthGrid uniform(double l_min, double l_max, double delta);
  static LengthGrid single(double point);
  /// Grid spanning the warmup lengths widened by widen_frac of their range on
  /// each side. A degenerate range (all lengths equal) expands by one delta
  /// each side.
  static LengthGrid from_warmup(std::span<const double> lengths, double delta,
                                double widen_frac = 0.10);

  [[nodiscard]] std::size_t size() const { return points.size(); }
  /// Index of the grid point nearest to `length` in absolute difference;
  /// ties resolve to the lower index, out-of-range lengths clamp to the
  /// nearest endpoint.
  [[nodiscard]] std::size_t nearest(double length) const;
};

/// Scalar adaptive controller: alpha_{t+1} = alpha_t + gamma (alpha* - err_t).
struct AciState {
  double alpha_star;
  double gamma;
  double alpha_t;
  ScoreSet scores;
  std::vector<int> err_history;

  AciState(double alpha_star_level, double gamma_rate, std::size_t capacity)
      : alpha_star(alpha_star_level),
        gamma(gamma_rate),
        alpha_t(alpha_star_level),
        scores(capacity) {}
};

/// One controller step: calibrate with Q_{1 - alpha_t}, conformalize, record
/// the miss indicator from the conformalized interval, update alpha_t, then
/// absorb the realized score of the unconformalized interval.
[[nodiscard]] Interval aci_step(AciState& state, const Interval& base, double y);

enum class WeightKind { Gaussian, Geometric };

/// Width-adaptive controller: one alpha per grid point, updated with
/// distance-based weights so nearby lengths share feedback.
struct WaciState {
  double alpha_star;
  double gamma;
  WeightKind weight_kind = WeightKind::Gaussian;
  double sigma = 1.0;         // Gaussian kernel width (grid units of length)
  double lambda_decay = 0.5;  // geometric decay per grid step
  LengthGrid grid;
  std::vector<double> alpha_vec;
  ScoreSet scores;
  std::vector<int> err_history;

  WaciState(double alpha_star_level, double gamma_rate, LengthGrid g,
            std::size_t capacity)
      : alpha_star(alpha_star_level),
        gamma(gamma_rate),
        grid(std::move(g)),
        alpha_vec(grid.size(), alpha_star_level),
        scores(capacity) {}
};

/// Diagnostic trace of a single width-adaptive step.
struct WaciStepTrace {
  std::size_t grid_index = 0;
  double alpha_used = 0.0;
  double q_used = 0.0;
  int err = 0;
};

/// One width-adaptive step, in order: locate the nearest grid point to the
/// incoming unconformalized length, read its alpha, calibrate with
/// Q_{1 - alpha}, conformalize, record the miss indicator from the
/// conformalized interval, update the whole alpha vector with
/// gamma * w * (alpha* - err) where w is the distance weight profile
/// (Gaussian normalized to 1 at its max, or geometric lambda^|i - j|), then
/// absorb the realized score of the unconformalized interval.
[[nodiscard]] Interval waci_step(WaciState& state, const Interval& base,
                                 double y, WaciStepTrace* trace = nullptr);

enum class ConformalMethod { None, Aci, Waci };

/// Stream-runner configuration. warmup steps per group only seed the score
/// window (and the length grid for the width-adaptive method) and are not
/// emitted. explicit_grid overrides the warmup-built grid when present.
struct ConformalStreamConfig {
  ConformalMethod method = ConformalMethod::None;
  double alpha_star = 0.2;
  double gamma = 0.01;
  WeightKind weight_kind = WeightKind::Gaussian;
  double sigma = 1.0;
  double lambda_decay = 0.5;
  double grid_delta = 0.25;
  double grid_widen_frac = 0.10;
  std::size_t score_capacity = 500;
  std::size_t warmup = 0;
  std::optional<LengthGrid> explicit_grid;
};

/// One emitted stream step with its conformalization diagnostics.
struct StreamStepRecord {
  std::int64_t timestamp = 0;
  int group = 0;
  double y = 0.0;
  double center = 0.0;
  Interval base;
  Interval conformalized;
  double alpha_used = 0.0;
  double q_used = 0.0;
  int err = 0;
  std::size_t grid_index = static_cast<std::size_t>(-1);
};

/// Stream-runner output. Records are the post-warmup steps in input order;
/// replacement_lower/upper span the warmup base intervals pooled over groups
/// (used by the metrics layer to stand in for infinite intervals). Final
/// controller states are keyed by group.
struct ConformalStreamResult {
  std::vector<StreamStepRecord> records;
  double replacement_lower = 0.0;
  double replacement_upper = 0.0;
  std::map<int, AciState> aci_states;
  std::map<int, WaciState> waci_states;
};

/// Runs one conformal method over a stream, independently per group key
/// (records with the same key share a score window and controller state;
/// groups never interact). Throws DataError when any group has fewer than
/// warmup + 1 records.
[[nodiscard]] ConformalStreamResult run_conformal_stream(
    const IntervalStream& stream, const ConformalStreamConfig& config);

}  // namespace hqrwaci
