#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace hqrwaci {

enum class IntervalKind { Finite, Infinite, Empty };

/// Closed prediction interval. Three kinds:
///  - Finite:   [lower, upper] with lower <= upper;
///  - Infinite: the whole real line (produced when a calibration quantile
///              saturates at +inf);
///  - Empty:    the empty set. The collapsed bounds (lower > upper) that
///              produced it are retained so scoring rules can penalize
///              against their midpoint.
struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  IntervalKind kind = IntervalKind::Finite;

  /// Builds a finite interval; throws std::invalid_argument when lower > upper
  /// or either bound is not a finite number.
  static Interval finite(double lower, double upper);
  /// The whole real line.
  static Interval infinite();
  /// The empty set, remembering the collapsed bounds that produced it.
  static Interval empty(double collapsed_lower, double collapsed_upper);

  /// Membership test: finite checks lower <= y <= upper, infinite always
  /// covers, empty never does.
  [[nodiscard]] bool covers(double y) const;
  /// upper - lower for finite, +inf for infinite, 0 for empty.
  [[nodiscard]] double length() const;
  /// Midpoint of the stored bounds (for empty: of the collapsed bounds).
  [[nodiscard]] double midpoint() const;

  bool operator==(const Interval&) const = default;
};

/// Free-function form of Interval::covers.
[[nodiscard]] bool covers(const Interval& interval, double y);

/// Aligned history of realized values and point forecasts from M forecasters.
/// Rows are time steps; timestamps are epoch seconds, strictly increasing.
/// group_keys is either empty or one key per row (e.g. hour-of-day for hourly
/// panels conformalized per hour).
struct ForecastPanel {
  std::vector<std::int64_t> timestamps;
  std::vector<double> y;
  Eigen::MatrixXd forecasts;  // rows() == y.size(), cols() == M
  std::vector<int> group_keys;

  [[nodiscard]] std::size_t size() const { return y.size(); }
  [[nodiscard]] std::size_t n_forecasters() const {
    return static_cast<std::size_t>(forecasts.cols());
  }
  /// Shape/order checks; throws DataError naming the first offending row.
  void validate() const;
};

/// Ensemble mean of row t.
[[nodiscard]] double mean_forecast(const ForecastPanel& panel, std::size_t t);
/// Ensemble standard deviation of row t, population divisor M.
[[nodiscard]] double forecast_std(const ForecastPanel& panel, std::size_t t);

/// Time-indexed intervals with aligned realizations. center carries the
/// ensemble mean forecast (or another point prediction) for diagnostics that
/// need absolute errors. group_keys is empty or aligned.
struct IntervalStream {
  std::vector<std::int64_t> timestamps;
  std::vector<double> y;
  std::vector<Interval> intervals;
  std::vector<double> center;
  std::vector<int> group_keys;

  [[nodiscard]] std::size_t size() const { return intervals.size(); }
  /// Alignment checks; throws DataError on mismatch.
  void validate() const;
};

}  // namespace hqrwaci
