#include "hqrwaci/quantile_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "hqrwaci/errors.hpp"

namespace hqrwaci {

double pinball_loss(double beta, double y, double y_hat) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("pinball_loss: beta must be in (0, 1)");
  }
  const double diff = y - y_hat;
  return diff >= 0.0 ? beta * diff : (beta - 1.0) * diff;
}

Eigen::RowVectorXd build_features(ModelKind kind,
                                  const Eigen::RowVectorXd& forecasts) {
  const auto m = forecasts.cols();
  if (m < 1) {
    throw std::invalid_argument("build_features: empty forecast row");
  }
  const double mean = forecasts.mean();
  const double sd = std::sqrt((forecasts.array() - mean).square().sum() /
                              static_cast<double>(m));
  switch (kind) {
    case ModelKind::QRA:
      return forecasts;
    case ModelKind::HQR: {
      Eigen::RowVectorXd f(2);
      f << mean, sd;
      return f;
    }
    case ModelKind::HQR_W: {
      Eigen::RowVectorXd f(m + 1);
      f.head(m) = forecasts;
      f(m) = sd;
      return f;
    }
  }
  throw std::invalid_argument("build_features: unknown model kind");
}

Eigen::MatrixXd build_feature_matrix(ModelKind kind, const ForecastPanel& panel,
                                     std::size_t first, std::size_t last) {
  if (last < first || last > panel.size()) {
    throw std::invalid_argument("build_feature_matrix: bad row range");
  }
  const auto n = static_cast<Eigen::Index>(last - first);
  if (n == 0) return Eigen::MatrixXd(0, 0);
  Eigen::RowVectorXd probe = build_features(
      kind, panel.forecasts.row(static_cast<Eigen::Index>(first)));
  Eigen::MatrixXd X(n, probe.cols());
  X.row(0) = probe;
  for (Eigen::Index i = 1; i < n; ++i) {
    X.row(i) = build_features(
        kind, panel.forecasts.row(static_cast<Eigen::Index>(first) + i));
  }
  return X;
}

namespace {

// Greedy left-to-right column selection by modified Gram-Schmidt; returns the
// kept column indices of [1 | X]. The intercept is column 0 and always kept.
std::vector<int> select_columns(const Eigen::MatrixXd& design, double tol) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  std::vector<int> kept;
  Eigen::MatrixXd basis(n, p);
  Eigen::Index rank = 0;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd v = design.col(j);
    const double orig = v.norm();
    for (Eigen::Index q = 0; q < rank; ++q) {
      v -= basis.col(q).dot(v) * basis.col(q);
    }
    // Second pass stabilizes near-dependent columns.
    for (Eigen::Index q = 0; q < rank; ++q) {
      v -= basis.col(q).dot(v) * basis.col(q);
    }
    if (v.norm() > tol * std::max(1.0, orig)) {
      basis.col(rank) = v / v.norm();
      ++rank;
      kept.push_back(static_cast<int>(j));
    }
  }
  return kept;
}

// First p linearly independent rows of X, scanned in order.
std::vector<int> initial_basis(const Eigen::MatrixXd& X, double tol) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  std::vector<int> rows;
  Eigen::MatrixXd basis(p, p);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < n && rank < p; ++i) {
    Eigen::VectorXd v = X.row(i).transpose();
    const double orig = v.norm();
    for (Eigen::Index q = 0; q < rank; ++q) {
      v -= basis.col(q).dot(v) * basis.col(q);
    }
    for (Eigen::Index q = 0; q < rank; ++q) {
      v -= basis.col(q).dot(v) * basis.col(q);
    }
    if (v.norm() > tol * std::max(1.0, orig)) {
      basis.col(rank) = v / v.norm();
      ++rank;
      rows.push_back(static_cast<int>(i));
    }
  }
  return rows;
}

struct SimplexResult {
  Eigen::VectorXd lambda;
  int iterations = 0;
  double objective = 0.0;
};

// Exact minimization of sum_i pinball(beta, y_i - x_i' lambda) by walking
// vertices where p residuals vanish. At each vertex h, for every basis row k
// the two one-sided directional derivatives along g = column of inv(X_h) are
//   D+ = (1-beta) - sum_{i not in h} c_i psi_i   (r_k moving negative)
//   D- = beta     + sum_{i not in h} c_i psi_i   (r_k moving positive)
// with c_i = x_i' g and psi_i = beta for r_i > 0, beta - 1 for r_i < 0; rows
// with r_i = 0 off the basis contribute their exact one-sided slopes. The
// line search walks residual crossings t_i = r_i / c_i in ascending order,
// adding |c_i| to the slope per crossing, and stops at the first crossing
// where the cumulative slope becomes >= 0. That tie-break lands on the
// smallest optimal vertex, so flat optima resolve deterministically.
SimplexResult solve_pinball(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            double beta) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  const double y_scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  const double tol_rank = 1e-9;
  const double tol_zero = 1e-9 * y_scale;
  const double tol_opt = 1e-9;

  std::vector<int> h = initial_basis(X, tol_rank);
  if (static_cast<Eigen::Index>(h.size()) < p) {
    throw SolverError("pinball simplex: design lost rank after selection", 0);
  }

  const int max_iter = static_cast<int>(1000 + 50 * (n + p));
  Eigen::MatrixXd Xh(p, p);
  SimplexResult out;

  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  for (int iter = 0;; ++iter) {
    if (iter >= max_iter) {
      throw SolverError(
          "pinball simplex: iteration cap reached after " +
              std::to_string(iter) + " pivots (n=" + std::to_string(n) +
              ", p=" + std::to_string(p) + ")",
          iter);
    }
    for (Eigen::Index j = 0; j < p; ++j) Xh.row(j) = X.row(h[j]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Xh);
    Eigen::VectorXd yh(p);
    for (Eigen::Index j = 0; j < p; ++j) yh(j) = y(h[j]);
    Eigen::VectorXd lambda = lu.solve(yh);
    Eigen::MatrixXd inv = lu.inverse();
    Eigen::MatrixXd C = X * inv;  // C(i, j) = x_i' g_j
    Eigen::VectorXd r = y - X * lambda;

    std::fill(in_basis.begin(), in_basis.end(), 0);
    for (int idx : h) in_basis[static_cast<std::size_t>(idx)] = 1;
    for (int idx : h) r(idx) = 0.0;

    // Directional derivatives for every basis slot and both directions.
    double best_d = std::numeric_limits<double>::infinity();
    Eigen::Index best_j = -1;
    int best_dir = +1;
    for (Eigen::Index j = 0; j < p; ++j) {
      double s = 0.0;       // sum of c_i psi_i over signed residuals
      double z_pos = 0.0;   // exact slopes of zero residuals, + direction
      double z_neg = 0.0;   // and - direction
      for (Eigen::Index i = 0; i < n; ++i) {
        if (in_basis[static_cast<std::size_t>(i)]) continue;
        const double c = C(i, j);
        if (r(i) > tol_zero) {
          s += c * beta;
        } else if (r(i) < -tol_zero) {
          s += c * (beta - 1.0);
        } else {
          z_pos += c > 0.0 ? (1.0 - beta) * c : -beta * c;
          z_neg += c < 0.0 ? -(1.0 - beta) * c : beta * c;
        }
      }
      const double d_plus = (1.0 - beta) - s + z_pos;
      const double d_minus = beta + s + z_neg;
      if (d_plus < best_d) {
        best_d = d_plus;
        best_j = j;
        best_dir = +1;
      }
      if (d_minus < best_d) {
        best_d = d_minus;
        best_j = j;
        best_dir = -1;
      }
    }

    if (best_d >= -tol_opt) {
      out.lambda = lambda;
      out.iterations = iter;
      double obj = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double ri = r(i);
        obj += ri >= 0.0 ? beta * ri : (beta - 1.0) * ri;
      }
      out.objective = obj;
      return out;
    }

    // Weighted-median line search along dir * g_{best_j}.
    std::vector<std::pair<double, Eigen::Index>> crossings;
    crossings.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)]) continue;
      if (std::fabs(r(i)) <= tol_zero) continue;
      const double c = best_dir * C(i, best_j);
      if (c == 0.0) continue;
      const double t = r(i) / c;
      if (t > 0.0) crossings.emplace_back(t, i);
    }
    if (crossings.empty()) {
      throw SolverError("pinball simplex: descent ray has no crossings (iter " +
                            std::to_string(iter) + ")",
                        iter);
    }
    std::sort(crossings.begin(), crossings.end());
    double slope = best_d;
    Eigen::Index enter = crossings.back().second;
    for (const auto& [t, i] : crossings) {
      slope += std::fabs(best_dir * C(i, best_j));
      if (slope >= 0.0) {
        enter = i;
        break;
      }
    }
    h[static_cast<std::size_t>(best_j)] = static_cast<int>(enter);
  }
}

int spread_coefficient_index(ModelKind kind, std::size_t n_forecasters) {
  switch (kind) {
    case ModelKind::HQR:
      return 2;
    case ModelKind::HQR_W:
      return static_cast<int>(n_forecasters) + 1;
    case ModelKind::QRA:
      break;
  }
  throw std::invalid_argument(
      "coefficient_trace: QRA carries no ensemble-spread feature; use HQR or "
      "HQR_W");
}

}  // namespace

QrFit fit_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("fit_quantile: beta must be in (0, 1)");
  }
  if (X.rows() != y.size()) {
    throw std::invalid_argument("fit_quantile: X rows and y length differ");
  }
  if (X.rows() == 0) {
    throw std::invalid_argument("fit_quantile: empty design");
  }

  const Eigen::Index n = X.rows();
  const Eigen::Index p_full = X.cols() + 1;
  Eigen::MatrixXd design(n, p_full);
  design.col(0).setOnes();
  design.rightCols(X.cols()) = X;

  const std::vector<int> kept = select_columns(design, 1e-9);
  Eigen::MatrixXd reduced(n, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    reduced.col(static_cast<Eigen::Index>(j)) = design.col(kept[j]);
  }

  const SimplexResult sol = solve_pinball(reduced, y, beta);

  QrFit fit;
  fit.coefficients = Eigen::VectorXd::Zero(p_full);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    fit.coefficients(kept[j]) = sol.lambda(static_cast<Eigen::Index>(j));
  }
  std::vector<char> is_kept(static_cast<std::size_t>(p_full), 0);
  for (int j : kept) is_kept[static_cast<std::size_t>(j)] = 1;
  for (Eigen::Index j = 0; j < p_full; ++j) {
    if (!is_kept[static_cast<std::size_t>(j)]) {
      fit.dropped.push_back(static_cast<int>(j));
    }
  }
  fit.iterations = sol.iterations;
  fit.objective = sol.objective;
  return fit;
}

double predict_quantile(const QrFit& fit, const Eigen::RowVectorXd& features) {
  if (features.cols() + 1 != fit.coefficients.size()) {
    throw std::invalid_argument("predict_quantile: feature width mismatch");
  }
  return fit.coefficients(0) +
         features.dot(fit.coefficients.tail(features.cols()).transpose());
}

namespace {

struct RollingPlan {
  std::size_t start = 0;
  std::size_t min_fit = 0;
};

RollingPlan plan_rolling(const ForecastPanel& panel, ModelKind kind,
                         const RollingConfig& config) {
  panel.validate();
  if (config.window == 0) {
    throw std::invalid_argument("rolling: window must be positive");
  }
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
    throw std::invalid_argument("rolling: alpha must be in (0, 1)");
  }
  if (config.refit_stride == 0) {
    throw std::invalid_argument("rolling: refit_stride must be positive");
  }
  const std::size_t m = panel.n_forecasters();
  std::size_t n_features = 0;
  switch (kind) {
    case ModelKind::QRA:
      n_features = m;
      break;
    case ModelKind::HQR:
      n_features = 2;
      break;
    case ModelKind::HQR_W:
      n_features = m + 1;
      break;
  }
  RollingPlan plan;
  plan.min_fit = config.min_fit != 0 ? config.min_fit : n_features + 2;
  if (config.window < plan.min_fit) {
    throw DataError("rolling: window smaller than minimum fit size " +
                    std::to_string(plan.min_fit));
  }
  plan.start =
      config.start == RollingConfig::kAuto ? config.window : config.start;
  if (plan.start < plan.min_fit) {
    throw DataError("rolling: start before first predictable index " +
                    std::to_string(plan.min_fit));
  }
  if (panel.size() <= plan.start) {
    throw DataError("rolling: panel too short; first predictable index is " +
                    std::to_string(plan.start) + " but panel has " +
                    std::to_string(panel.size()) + " rows");
  }
  return plan;
}

}  // namespace

RollingResult rolling_intervals(const ForecastPanel& panel, ModelKind kind,
                                const RollingConfig& config) {
  const RollingPlan plan = plan_rolling(panel, kind, config);
  const std::size_t n = panel.size();

  RollingResult result;
  QrFit fit_lo;
  QrFit fit_hi;
  for (std::size_t t = plan.start; t < n; ++t) {
    if ((t - plan.start) % config.refit_stride == 0) {
      const std::size_t base = t;
      const std::size_t first = base > config.window ? base - config.window : 0;
      const Eigen::MatrixXd X = build_feature_matrix(kind, panel, first, base);
      Eigen::VectorXd yv(static_cast<Eigen::Index>(base - first));
      for (std::size_t i = first; i < base; ++i) {
        yv(static_cast<Eigen::Index>(i - first)) = panel.y[i];
      }
      fit_lo = fit_quantile(X, yv, config.alpha / 2.0);
      fit_hi = fit_quantile(X, yv, 1.0 - config.alpha / 2.0);
    }
    const Eigen::RowVectorXd feat = build_features(
        kind, panel.forecasts.row(static_cast<Eigen::Index>(t)));
    double lo = predict_quantile(fit_lo, feat);
    double hi = predict_quantile(fit_hi, feat);
    if (lo > hi) {
      std::swap(lo, hi);
      ++result.crossings;
    }
    result.stream.timestamps.push_back(panel.timestamps[t]);
    result.stream.y.push_back(panel.y[t]);
    result.stream.intervals.push_back(Interval::finite(lo, hi));
    result.stream.center.push_back(mean_forecast(panel, t));
    if (!panel.group_keys.empty()) {
      result.stream.group_keys.push_back(panel.group_keys[t]);
    }
  }
  return result;
}

std::vector<CoefficientTraceRow> coefficient_trace(
    const ForecastPanel& panel, ModelKind kind, const RollingConfig& config,
    const std::vector<double>& alphas) {
  const int spread_idx = spread_coefficient_index(kind, panel.n_forecasters());
  const RollingPlan plan = plan_rolling(panel, kind, config);
  const std::size_t n = panel.size();

  std::vector<CoefficientTraceRow> rows;
  for (std::size_t t = plan.start; t < n; t += config.refit_stride) {
    const std::size_t first = t > config.window ? t - config.window : 0;
    const Eigen::MatrixXd X = build_feature_matrix(kind, panel, first, t);
    Eigen::VectorXd yv(static_cast<Eigen::Index>(t - first));
    for (std::size_t i = first; i < t; ++i) {
      yv(static_cast<Eigen::Index>(i - first)) = panel.y[i];
    }
    for (const double alpha : alphas) {
      if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("coefficient_trace: alpha must be in (0, 1)");
      }
      const QrFit lo = fit_quantile(X, yv, alpha / 2.0);
      const QrFit hi = fit_quantile(X, yv, 1.0 - alpha / 2.0);
      CoefficientTraceRow row;
      row.t = t;
      row.alpha = alpha;
      row.lambda_lower = lo.coefficients(spread_idx);
      row.lambda_upper = hi.coefficients(spread_idx);
      const auto hit = [spread_idx](const QrFit& f) {
        return std::find(f.dropped.begin(), f.dropped.end(), spread_idx) !=
               f.dropped.end();
      };
      row.degenerate = hit(lo) || hit(hi);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace hqrwaci
