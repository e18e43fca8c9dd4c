#include "hqrwaci/series.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "hqrwaci/errors.hpp"

namespace hqrwaci {

Interval Interval::finite(double lower, double upper) {
  if (!std::isfinite(lower) || !std::isfinite(upper)) {
    throw std::invalid_argument("Interval::finite: bounds must be finite");
  }
  if (lower > upper) {
    throw std::invalid_argument("Interval::finite: lower > upper");
  }
  return Interval{lower, upper, IntervalKind::Finite};
}

Interval Interval::infinite() {
  return Interval{-std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity(),
                  IntervalKind::Infinite};
}

Interval Interval::empty(double collapsed_lower, double collapsed_upper) {
  return Interval{collapsed_lower, collapsed_upper, IntervalKind::Empty};
}

bool Interval::covers(double y) const {
  switch (kind) {
    case IntervalKind::Infinite:
      return true;
    case IntervalKind::Empty:
      return false;
    case IntervalKind::Finite:
      break;
  }
  return lower <= y && y <= upper;
}

double Interval::length() const {
  switch (kind) {
    case IntervalKind::Infinite:
      return std::numeric_limits<double>::infinity();
    case IntervalKind::Empty:
      return 0.0;
    case IntervalKind::Finite:
      break;
  }
  return upper - lower;
}

double Interval::midpoint() const { return 0.5 * (lower + upper); }

bool covers(const Interval& interval, double y) { return interval.covers(y); }

void ForecastPanel::validate() const {
  const auto n = y.size();
  if (timestamps.size() != n) {
    throw DataError("panel: timestamps and y differ in length");
  }
  if (static_cast<std::size_t>(forecasts.rows()) != n) {
    throw DataError("panel: forecast rows do not match y length");
  }
  if (forecasts.cols() < 1) {
    throw DataError("panel: at least one forecaster column required");
  }
  if (!group_keys.empty() && group_keys.size() != n) {
    throw DataError("panel: group keys do not match y length");
  }
  for (std::size_t t = 1; t < n; ++t) {
    if (timestamps[t] <= timestamps[t - 1]) {
      throw DataError("panel: timestamps not strictly increasing at row " +
                      std::to_string(t));
    }
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (!std::isfinite(y[t])) {
      throw DataError("panel: non-finite y at row " + std::to_string(t));
    }
    for (Eigen::Index j = 0; j < forecasts.cols(); ++j) {
      if (!std::isfinite(forecasts(static_cast<Eigen::Index>(t), j))) {
        throw DataError("panel: non-finite forecast at row " +
                        std::to_string(t));
      }
    }
  }
}

double mean_forecast(const ForecastPanel& panel, std::size_t t) {
  return panel.forecasts.row(static_cast<Eigen::Index>(t)).mean();
}

double forecast_std(const ForecastPanel& panel, std::size_t t) {
  const auto row = panel.forecasts.row(static_cast<Eigen::Index>(t));
  const double mean = row.mean();
  const double var = (row.array() - mean).square().sum() /
                     static_cast<double>(row.cols());
  return std::sqrt(var);
}

void IntervalStream::validate() const {
  const auto n = intervals.size();
  if (timestamps.size() != n || y.size() != n || center.size() != n) {
    throw DataError("interval stream: misaligned columns");
  }
  if (!group_keys.empty() && group_keys.size() != n) {
    throw DataError("interval stream: group keys misaligned");
  }
}

}  // namespace hqrwaci
