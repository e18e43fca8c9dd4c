#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hqrwaci/distributions.hpp"
#include "hqrwaci/errors.hpp"
#include "hqrwaci/pipeline.hpp"
#include "hqrwaci/quantile_regression.hpp"
#include "oracles.hpp"

using namespace hqrwaci;

TEST_CASE("pinball loss hand values") {
  CHECK(pinball_loss(0.9, 10.0, 8.0) == doctest::Approx(1.8));
  CHECK(pinball_loss(0.5, 2.0, 2.0) == doctest::Approx(0.0));
  CHECK(pinball_loss(0.1, 0.0, 4.0) == doctest::Approx(3.6));
}

TEST_CASE("pinball loss is nonnegative and zero only at the target") {
  UniformStream rng(77);
  for (int i = 0; i < 500; ++i) {
    const double beta = 0.02 + 0.96 * rng.next();
    const double y = 10.0 * rng.next() - 5.0;
    const double y_hat = 10.0 * rng.next() - 5.0;
    const double loss = pinball_loss(beta, y, y_hat);
    CHECK(loss >= 0.0);
    if (y != y_hat) CHECK(loss > 0.0);
    CHECK(pinball_loss(beta, y, y) == 0.0);
  }
}

TEST_CASE("feature maps") {
  Eigen::RowVectorXd f(2);
  f << 4.0, 6.0;

  const Eigen::RowVectorXd qra = build_features(ModelKind::QRA, f);
  REQUIRE(qra.size() == 2);
  CHECK(qra(0) == 4.0);
  CHECK(qra(1) == 6.0);

  // mean 5, population std of (4, 6) is 1
  const Eigen::RowVectorXd hqr = build_features(ModelKind::HQR, f);
  REQUIRE(hqr.size() == 2);
  CHECK(hqr(0) == doctest::Approx(5.0));
  CHECK(hqr(1) == doctest::Approx(1.0));

  const Eigen::RowVectorXd hqrw = build_features(ModelKind::HQR_W, f);
  REQUIRE(hqrw.size() == 3);
  CHECK(hqrw(0) == 4.0);
  CHECK(hqrw(1) == 6.0);
  CHECK(hqrw(2) == doctest::Approx(1.0));
}

TEST_CASE("intercept-only fits pick deterministic order statistics") {
  Eigen::MatrixXd X(5, 0);
  Eigen::VectorXd y(5);
  y << 0.0, 1.0, 2.0, 3.0, 4.0;

  // At level 0.8 every value in [3, 4] is optimal; the solver must return the
  // smallest optimal vertex.
  const QrFit fit = fit_quantile(X, y, 0.8);
  CHECK(fit.coefficients(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(fit.dropped.empty());

  Eigen::MatrixXd X3(3, 0);
  Eigen::VectorXd y3(3);
  y3 << 1.0, 100.0, 2.0;
  const QrFit med = fit_quantile(X3, y3, 0.5);
  CHECK(med.coefficients(0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("interpolation-sized problems fit exactly") {
  UniformStream rng(123);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::MatrixXd X(3, 2);
    Eigen::VectorXd y(3);
    for (int i = 0; i < 3; ++i) {
      X(i, 0) = rng.next_normal();
      X(i, 1) = rng.next_normal();
      y(i) = rng.next_normal();
    }
    const QrFit fit = fit_quantile(X, y, 0.3);
    if (!fit.dropped.empty()) continue;  // nearly singular draw
    for (int i = 0; i < 3; ++i) {
      const double pred = predict_quantile(fit, X.row(i));
      CHECK(pred == doctest::Approx(y(i)).epsilon(1e-7));
    }
    CHECK(fit.objective == doctest::Approx(0.0).epsilon(1e-9));
  }
}

namespace {

struct RandomInstance {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

RandomInstance draw_instance(UniformStream& rng, int n, int m, bool tie_heavy) {
  RandomInstance inst;
  inst.X.resize(n, m);
  inst.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) inst.X(i, j) = 3.0 * rng.next_normal();
    double v = inst.X.row(i).sum() + rng.next_normal();
    if (tie_heavy) v = std::round(v);  // forces tied and zero residuals
    inst.y(i) = v;
  }
  return inst;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd design(X.rows(), X.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(X.cols()) = X;
  return design;
}

}  // namespace

TEST_CASE("solver matches exhaustive vertex enumeration on small instances") {
  UniformStream rng(2024);
  const double betas[] = {0.1, 0.3, 0.5, 0.8, 0.95};
  int checked = 0;
  for (int rep = 0; rep < 60; ++rep) {
    const int n = 5 + static_cast<int>(rng.next() * 8.0);   // 5..12
    const int m = 1 + static_cast<int>(rng.next() * 2.0);   // 1..2
    const bool ties = (rep % 3 == 0);
    const RandomInstance inst = draw_instance(rng, n, m, ties);
    const double beta = betas[rep % 5];

    const QrFit fit = fit_quantile(inst.X, inst.y, beta);
    if (!fit.dropped.empty()) continue;
    const double exact =
        oracles::enumerate_pinball_optimum(with_intercept(inst.X), inst.y, beta);
    CHECK(fit.objective ==
          doctest::Approx(exact).epsilon(1e-9).scale(1.0 + std::abs(exact)));

    // The reported objective must equal the objective of the reported
    // coefficients.
    double recomputed = 0.0;
    for (int i = 0; i < n; ++i) {
      recomputed += pinball_loss(beta, inst.y(i), predict_quantile(fit, inst.X.row(i)));
    }
    CHECK(fit.objective == doctest::Approx(recomputed).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked >= 50);
}

TEST_CASE("solver beats a subgradient-descent bound and satisfies sign counts") {
  UniformStream rng(555);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 10 + static_cast<int>(rng.next() * 31.0);  // 10..40
    const int m = 1 + static_cast<int>(rng.next() * 3.0);    // 1..3
    const RandomInstance inst = draw_instance(rng, n, m, rep % 4 == 0);
    const double beta = (rep % 2 == 0) ? 0.1 : 0.9;

    const QrFit fit = fit_quantile(inst.X, inst.y, beta);
    const Eigen::MatrixXd design = with_intercept(inst.X);
    const double bound =
        oracles::subgradient_pinball_best(design, inst.y, beta, 4000);
    CHECK(fit.objective <= bound * (1.0 + 1e-6) + 1e-9);

    if (fit.dropped.empty()) {
      const double scale = std::max(1.0, inst.y.cwiseAbs().maxCoeff());
      const oracles::SignCounts sc = oracles::residual_signs(
          design, inst.y, fit.coefficients, 1e-7 * scale);
      CHECK(static_cast<double>(sc.positive) <=
            (1.0 - beta) * static_cast<double>(n) + 1e-9);
      CHECK(static_cast<double>(sc.negative) <=
            beta * static_cast<double>(n) + 1e-9);
    }
  }
}

TEST_CASE("fit is deterministic") {
  UniformStream rng(9);
  const RandomInstance inst = draw_instance(rng, 25, 2, false);
  const QrFit a = fit_quantile(inst.X, inst.y, 0.25);
  const QrFit b = fit_quantile(inst.X, inst.y, 0.25);
  REQUIRE(a.coefficients.size() == b.coefficients.size());
  for (Eigen::Index j = 0; j < a.coefficients.size(); ++j) {
    CHECK(a.coefficients(j) == b.coefficients(j));
  }
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("collinear columns are dropped deterministically") {
  UniformStream rng(31);
  Eigen::MatrixXd X(20, 3);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    X(i, 0) = rng.next_normal();
    X(i, 1) = 2.0 * X(i, 0);        // exact duplicate direction
    X(i, 2) = rng.next_normal();
    y(i) = X(i, 0) + 0.5 * X(i, 2) + 0.1 * rng.next_normal();
  }
  const QrFit fit = fit_quantile(X, y, 0.5);
  CHECK(fit.degenerate());
  // Full-design indices: 0 intercept, 1..3 features. Column 2 (the duplicate)
  // must be the one dropped, and its coefficient pinned to zero.
  REQUIRE(fit.dropped.size() == 1);
  CHECK(fit.dropped[0] == 2);
  CHECK(fit.coefficients(2) == 0.0);

  // Same span as the reduced design, so the fit must match it exactly.
  Eigen::MatrixXd Xr(20, 2);
  Xr.col(0) = X.col(0);
  Xr.col(1) = X.col(2);
  const QrFit reduced = fit_quantile(Xr, y, 0.5);
  CHECK(fit.objective == doctest::Approx(reduced.objective).epsilon(1e-9));
  for (int i = 0; i < 20; ++i) {
    CHECK(predict_quantile(fit, X.row(i)) ==
          doctest::Approx(predict_quantile(reduced, Xr.row(i))).epsilon(1e-7));
  }
}

TEST_CASE("single-forecaster ensemble collapses HQR onto QRA") {
  // With one forecaster the ensemble std is identically zero, so the spread
  // column is dropped and the two models span the same space.
  ForecastPanel panel;
  const int n = 40;
  panel.timestamps.resize(n);
  panel.y.resize(n);
  panel.forecasts.resize(n, 1);
  UniformStream rng(404);
  for (int i = 0; i < n; ++i) {
    panel.timestamps[i] = i;
    panel.forecasts(i, 0) = 10.0 + rng.next_normal();
    panel.y[i] = panel.forecasts(i, 0) + 0.3 * rng.next_normal();
  }
  const Eigen::MatrixXd xq = build_feature_matrix(ModelKind::QRA, panel, 0, n);
  const Eigen::MatrixXd xh = build_feature_matrix(ModelKind::HQR, panel, 0, n);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(panel.y.data(), n);
  const QrFit fq = fit_quantile(xq, y, 0.75);
  const QrFit fh = fit_quantile(xh, y, 0.75);
  CHECK(fh.degenerate());
  for (int i = 0; i < n; ++i) {
    CHECK(predict_quantile(fq, xq.row(i)) ==
          doctest::Approx(predict_quantile(fh, xh.row(i))).epsilon(1e-9));
  }
}

namespace {

ForecastPanel noisy_panel(int n, int m, std::uint64_t seed) {
  ForecastPanel panel;
  panel.timestamps.resize(static_cast<std::size_t>(n));
  panel.y.resize(static_cast<std::size_t>(n));
  panel.forecasts.resize(n, m);
  UniformStream rng(seed);
  for (int i = 0; i < n; ++i) {
    panel.timestamps[static_cast<std::size_t>(i)] = 100 + i;
    const double level = 50.0 + 5.0 * std::sin(0.1 * i);
    for (int j = 0; j < m; ++j) {
      panel.forecasts(i, j) = level + rng.next_normal();
    }
    panel.y[static_cast<std::size_t>(i)] = level + 1.5 * rng.next_normal();
  }
  return panel;
}

}  // namespace

TEST_CASE("rolling emits one interval per step from start to the end") {
  const ForecastPanel panel = noisy_panel(6, 2, 7);
  RollingConfig config;
  config.window = 5;
  config.alpha = 0.2;
  const RollingResult res = rolling_intervals(panel, ModelKind::HQR, config);
  REQUIRE(res.stream.size() == 1);
  CHECK(res.stream.timestamps[0] == panel.timestamps[5]);
  CHECK(res.stream.y[0] == panel.y[5]);

  // The emitted bounds must equal direct fits on rows [0, 5).
  const Eigen::MatrixXd xw = build_feature_matrix(ModelKind::HQR, panel, 0, 5);
  Eigen::VectorXd yw(5);
  for (int i = 0; i < 5; ++i) yw(i) = panel.y[static_cast<std::size_t>(i)];
  const QrFit lo = fit_quantile(xw, yw, 0.1);
  const QrFit hi = fit_quantile(xw, yw, 0.9);
  const Eigen::MatrixXd xt = build_feature_matrix(ModelKind::HQR, panel, 5, 6);
  double l = predict_quantile(lo, xt.row(0));
  double u = predict_quantile(hi, xt.row(0));
  if (l > u) std::swap(l, u);
  CHECK(res.stream.intervals[0].lower == doctest::Approx(l).epsilon(1e-10));
  CHECK(res.stream.intervals[0].upper == doctest::Approx(u).epsilon(1e-10));
}

TEST_CASE("rolling count, stride and crossing repair") {
  const ForecastPanel panel = noisy_panel(60, 3, 11);
  RollingConfig config;
  config.window = 30;
  config.alpha = 0.2;
  config.refit_stride = 7;
  const RollingResult res = rolling_intervals(panel, ModelKind::QRA, config);
  CHECK(res.stream.size() == 30);
  for (std::size_t i = 0; i < res.stream.size(); ++i) {
    const Interval& iv = res.stream.intervals[i];
    CHECK(iv.lower <= iv.upper);
    CHECK(std::isfinite(iv.lower));
    CHECK(std::isfinite(iv.upper));
  }

  // Re-derive every emission from the documented refit rule: the model is
  // refit at start, start+7, ... on the 30 rows before the refit point.
  std::size_t crossings = 0;
  QrFit lo_fit;
  QrFit hi_fit;
  for (std::size_t t = 30; t < 60; ++t) {
    if ((t - 30) % 7 == 0) {
      const Eigen::MatrixXd xw =
          build_feature_matrix(ModelKind::QRA, panel, t - 30, t);
      Eigen::VectorXd yw(30);
      for (std::size_t i = 0; i < 30; ++i) {
        yw(static_cast<Eigen::Index>(i)) = panel.y[t - 30 + i];
      }
      lo_fit = fit_quantile(xw, yw, 0.1);
      hi_fit = fit_quantile(xw, yw, 0.9);
    }
    const Eigen::MatrixXd xt =
        build_feature_matrix(ModelKind::QRA, panel, t, t + 1);
    double l = predict_quantile(lo_fit, xt.row(0));
    double u = predict_quantile(hi_fit, xt.row(0));
    if (l > u) {
      std::swap(l, u);
      ++crossings;
    }
    const Interval& iv = res.stream.intervals[t - 30];
    CHECK(iv.lower == doctest::Approx(l).epsilon(1e-10));
    CHECK(iv.upper == doctest::Approx(u).epsilon(1e-10));
  }
  CHECK(res.crossings == crossings);
}

TEST_CASE("rolling never looks ahead") {
  ForecastPanel panel = noisy_panel(40, 2, 19);
  RollingConfig config;
  config.window = 25;
  const RollingResult base = rolling_intervals(panel, ModelKind::HQR, config);

  ForecastPanel tampered = panel;
  tampered.y.back() += 1000.0;
  tampered.forecasts(39, 0) -= 500.0;
  const RollingResult alt = rolling_intervals(tampered, ModelKind::HQR, config);

  REQUIRE(base.stream.size() == alt.stream.size());
  for (std::size_t i = 0; i + 1 < base.stream.size(); ++i) {
    CHECK(base.stream.intervals[i].lower == alt.stream.intervals[i].lower);
    CHECK(base.stream.intervals[i].upper == alt.stream.intervals[i].upper);
  }
}

TEST_CASE("rolling rejects panels with nothing to predict") {
  const ForecastPanel panel = noisy_panel(5, 2, 3);
  RollingConfig config;
  config.window = 5;
  bool threw = false;
  try {
    (void)rolling_intervals(panel, ModelKind::HQR, config);
  } catch (const DataError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("5") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("explicit early start uses all available history") {
  const ForecastPanel panel = noisy_panel(30, 2, 23);
  RollingConfig config;
  config.window = 25;
  config.start = 10;
  const RollingResult res = rolling_intervals(panel, ModelKind::HQR, config);
  CHECK(res.stream.size() == 20);
  // First emission trains on rows [0, 10): check against a direct fit.
  const Eigen::MatrixXd xw = build_feature_matrix(ModelKind::HQR, panel, 0, 10);
  Eigen::VectorXd yw(10);
  for (int i = 0; i < 10; ++i) yw(i) = panel.y[static_cast<std::size_t>(i)];
  const QrFit lo = fit_quantile(xw, yw, 0.1);
  const QrFit hi = fit_quantile(xw, yw, 0.9);
  const Eigen::MatrixXd xt =
      build_feature_matrix(ModelKind::HQR, panel, 10, 11);
  double l = predict_quantile(lo, xt.row(0));
  double u = predict_quantile(hi, xt.row(0));
  if (l > u) std::swap(l, u);
  CHECK(res.stream.intervals[0].lower == doctest::Approx(l).epsilon(1e-10));
  CHECK(res.stream.intervals[0].upper == doctest::Approx(u).epsilon(1e-10));
}

TEST_CASE("interval length tracks ensemble spread on heteroscedastic data") {
  const ForecastPanel panel = make_heteroscedastic_panel(700, 5, 99);
  RollingConfig config;
  config.window = 300;
  config.alpha = 0.2;
  config.refit_stride = 10;
  const RollingResult res = rolling_intervals(panel, ModelKind::HQR, config);
  std::vector<double> lengths;
  std::vector<double> spreads;
  for (std::size_t i = 0; i < res.stream.size(); ++i) {
    lengths.push_back(res.stream.intervals[i].length());
    spreads.push_back(forecast_std(panel, 300 + i));
  }
  CHECK(oracles::spearman(lengths, spreads) > 0.5);
}

TEST_CASE("coefficient trace exposes the spread coefficients") {
  const ForecastPanel panel = make_heteroscedastic_panel(450, 4, 17);
  RollingConfig config;
  config.window = 300;
  config.refit_stride = 25;

  CHECK_THROWS_AS(
      (void)coefficient_trace(panel, ModelKind::QRA, config, {0.2}),
      std::invalid_argument);

  const std::vector<CoefficientTraceRow> trace =
      coefficient_trace(panel, ModelKind::HQR, config, {0.1, 0.2});
  // Windows at t = 300, 325, ..., 425 -> 6 refit points x 2 levels.
  CHECK(trace.size() == 12);
  int positive_upper = 0;
  int negative_lower = 0;
  for (const CoefficientTraceRow& row : trace) {
    CHECK((row.alpha == 0.1 || row.alpha == 0.2));
    CHECK_FALSE(row.degenerate);
    if (row.lambda_upper > 0.0) ++positive_upper;
    if (row.lambda_lower < 0.0) ++negative_lower;
  }
  // Data is built with noise proportional to spread, so the spread picks up
  // positive weight at high quantiles and negative at low ones.
  CHECK(positive_upper >= 10);
  CHECK(negative_lower >= 10);
}

TEST_CASE("fit rejects malformed input") {
  Eigen::MatrixXd X(4, 1);
  X << 1, 2, 3, 4;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  CHECK_THROWS_AS((void)fit_quantile(X, y, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)fit_quantile(X, y, 1.0), std::invalid_argument);
  Eigen::VectorXd y3(3);
  y3 << 1, 2, 3;
  CHECK_THROWS_AS((void)fit_quantile(X, y3, 0.5), std::invalid_argument);

  const QrFit fit = fit_quantile(X, y, 0.5);
  Eigen::RowVectorXd wide(2);
  wide << 1.0, 2.0;
  CHECK_THROWS_AS((void)predict_quantile(fit, wide), std::invalid_argument);
}
