#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "hqrwaci/series.hpp"

namespace hqrwaci {

/// Pinball (quantile) loss at level beta in (0, 1):
/// beta * (y - y_hat) when y >= y_hat, (1 - beta) * (y_hat - y) otherwise.
[[nodiscard]] double pinball_loss(double beta, double y, double y_hat);

/// Feature map used by the linear quantile models:
///  - QRA:   the M individual forecasts;
///  - HQR:   (ensemble mean, ensemble std), population divisor M;
///  - HQR_W: the M forecasts plus the ensemble std.
/// An intercept is appended by the fitting routine, not by the feature map.
enum class ModelKind { QRA, HQR, HQR_W };

/// Feature row for one time step.
[[nodiscard]] Eigen::RowVectorXd build_features(ModelKind kind,
                                                const Eigen::RowVectorXd& forecasts);

/// Feature matrix for panel rows [first, last).
[[nodiscard]] Eigen::MatrixXd build_feature_matrix(ModelKind kind,
                                                   const ForecastPanel& panel,
                                                   std::size_t first,
                                                   std::size_t last);

/// Result of one exact pinball fit. coefficients has length
/// n_features + 1 with the intercept first; entries for dropped collinear
/// columns are zero and their indices are listed in dropped.
struct QrFit {
  Eigen::VectorXd coefficients;
  std::vector<int> dropped;
  int iterations = 0;
  double objective = 0.0;
  [[nodiscard]] bool degenerate() const { return !dropped.empty(); }
};

/// Fits the linear beta-quantile by minimizing total pinball loss exactly
/// (specialized primal simplex walking residual-interpolation vertices).
/// X holds raw features (no intercept column). Collinear columns are dropped
/// deterministically left to right before solving. Throws
/// std::invalid_argument for bad beta or shapes, SolverError if the iteration
/// cap is hit.
[[nodiscard]] QrFit fit_quantile(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, double beta);

/// Applies a fit to one feature row (same layout as passed to fit_quantile).
[[nodiscard]] double predict_quantile(const QrFit& fit,
                                      const Eigen::RowVectorXd& features);

/// Rolling backtest configuration. Emission for step t uses models fitted on
/// the window of rows immediately before the most recent refit point; refits
/// happen every refit_stride emitted steps. start defaults to window (first
/// step with a full window behind it); an explicit earlier start is allowed
/// down to the minimum fit size, in which case all available rows are used.
struct RollingConfig {
  std::size_t window = 0;
  double alpha = 0.2;
  static constexpr std::size_t kAuto = static_cast<std::size_t>(-1);
  std::size_t start = kAuto;
  std::size_t refit_stride = 1;
  std::size_t min_fit = 0;  // 0: n_features + 2
};

/// Rolling backtest output. crossings counts steps where the fitted lower
/// quantile exceeded the upper one before reordering.
struct RollingResult {
  IntervalStream stream;
  std::size_t crossings = 0;
};

/// Walks the panel, refitting lower (alpha/2) and upper (1 - alpha/2)
/// quantile models and emitting one interval per step from config.start to
/// the end. Quantile crossings are repaired by swapping bounds. Throws
/// DataError naming the first predictable index when the panel is too short.
[[nodiscard]] RollingResult rolling_intervals(const ForecastPanel& panel,
                                              ModelKind kind,
                                              const RollingConfig& config);

/// One fitted coefficient pair for the ensemble-spread feature: value at
/// level alpha/2 (lower) and 1 - alpha/2 (upper) for the window ending just
/// before panel row t. degenerate is set when the spread column was dropped
/// as collinear in either fit.
struct CoefficientTraceRow {
  std::size_t t = 0;
  double alpha = 0.0;
  double lambda_lower = 0.0;
  double lambda_upper = 0.0;
  bool degenerate = false;
};

/// Per-window trace of the spread coefficient across the given alpha levels.
/// Only HQR and HQR_W carry a spread feature; QRA raises
/// std::invalid_argument with a diagnostic.
[[nodiscard]] std::vector<CoefficientTraceRow> coefficient_trace(
    const ForecastPanel& panel, ModelKind kind, const RollingConfig& config,
    const std::vector<double>& alphas);

}  // namespace hqrwaci
