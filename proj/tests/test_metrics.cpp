#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "hqrwaci/distributions.hpp"
#include "hqrwaci/metrics.hpp"
#include "oracles.hpp"

using namespace hqrwaci;

namespace {

EvaluationRecord rec(double y, const Interval& conf) {
  EvaluationRecord r;
  r.y = y;
  r.center = conf.kind == IntervalKind::Finite ? conf.midpoint() : 0.0;
  r.base = conf;
  r.conformalized = conf;
  return r;
}

const ReplacementInterval kRepl{0.0, 100.0};

}  // namespace

TEST_CASE("effective length resolves the degenerate kinds") {
  CHECK(effective_length(Interval::finite(2.0, 5.0), kRepl) == 3.0);
  CHECK(effective_length(Interval::infinite(), kRepl) == 100.0);
  CHECK(effective_length(Interval::empty(8.0, 6.0), kRepl) == 0.0);
}

TEST_CASE("coverage, mean length and their degenerate inputs") {
  std::vector<EvaluationRecord> records{
      rec(5.0, Interval::finite(0.0, 1.0)),   // out, length 1
      rec(5.0, Interval::finite(0.0, 2.0)),   // out, length 2
      rec(1.5, Interval::finite(0.0, 3.0)),   // in,  length 3
      rec(2.0, Interval::finite(0.0, 4.0)),   // in,  length 4
  };
  CHECK(empirical_coverage(records) == doctest::Approx(50.0));
  CHECK(mean_interval_length(records, kRepl) == doctest::Approx(2.5));

  const CorrelationResult p = pearson_length_coverage(records, kRepl);
  CHECK_FALSE(p.degenerate);
  CHECK(p.value == doctest::Approx(0.8944271909999159).epsilon(1e-12));

  std::vector<EvaluationRecord> mixed{
      rec(0.5, Interval::finite(0.0, 10.0)),
      rec(0.5, Interval::infinite()),
  };
  CHECK(mean_interval_length(mixed, kRepl) == doctest::Approx(55.0));
  mixed[1].conformalized = Interval::empty(3.0, 1.0);
  CHECK(mean_interval_length(mixed, kRepl) == doctest::Approx(5.0));

  CHECK_THROWS_AS((void)empirical_coverage({}), std::invalid_argument);
  CHECK_THROWS_AS((void)mean_interval_length({}, kRepl),
                  std::invalid_argument);
}

TEST_CASE("interval score hand values") {
  {
    std::vector<EvaluationRecord> one{rec(25.0, Interval::finite(10.0, 20.0))};
    CHECK(winkler_score(one, 0.2, kRepl) == doctest::Approx(60.0));
    CHECK(winkler_score(one, 0.1, kRepl) ==
          doctest::Approx(10.0 + 20.0 * 5.0));
  }
  {
    std::vector<EvaluationRecord> one{rec(8.0, Interval::finite(10.0, 20.0))};
    CHECK(winkler_score(one, 0.1, kRepl) == doctest::Approx(50.0));
  }
  {
    std::vector<EvaluationRecord> one{rec(15.0, Interval::finite(10.0, 20.0))};
    CHECK(winkler_score(one, 0.2, kRepl) == doctest::Approx(10.0));
  }
  {
    // Empty interval: no length, penalty against the collapsed midpoint 15.
    std::vector<EvaluationRecord> one{rec(25.0, Interval::empty(16.0, 14.0))};
    CHECK(winkler_score(one, 0.2, kRepl) == doctest::Approx(100.0));
  }
  {
    // Infinite interval: replacement length only, never a penalty.
    std::vector<EvaluationRecord> one{rec(1e9, Interval::infinite())};
    CHECK(winkler_score(one, 0.2, kRepl) == doctest::Approx(100.0));
  }
  {
    std::vector<EvaluationRecord> two{
        rec(25.0, Interval::finite(10.0, 20.0)),
        rec(15.0, Interval::finite(10.0, 20.0)),
    };
    CHECK(winkler_score(two, 0.2, kRepl) == doctest::Approx(35.0));
  }
  std::vector<EvaluationRecord> one{rec(0.0, Interval::finite(0.0, 1.0))};
  CHECK_THROWS_AS((void)winkler_score(one, 0.0, kRepl), std::invalid_argument);
  CHECK_THROWS_AS((void)winkler_score(one, 1.0, kRepl), std::invalid_argument);
}

TEST_CASE("length-shift subset coverage deviation") {
  std::vector<EvaluationRecord> records;
  const auto add = [&](double base_hi, double conf_hi, double y) {
    EvaluationRecord r;
    r.y = y;
    r.center = conf_hi / 2.0;
    r.base = Interval::finite(0.0, base_hi);
    r.conformalized = Interval::finite(0.0, conf_hi);
    records.push_back(r);
  };
  add(1.0, 1.0, 0.5);  // shift 0, covered
  add(2.0, 3.0, 5.0);  // shift 1, missed
  add(3.0, 5.0, 2.0);  // shift 2, covered
  add(4.0, 8.0, 9.0);  // shift 3, missed

  // lambda = 0.5 keeps the two largest shifts (records 2 and 3): coverage
  // 1/2 against nominal 0.8.
  CHECK(ils_lambda_coverage(records, 0.5, 0.2, kRepl) ==
        doctest::Approx(30.0));
  // lambda = 1 selects everything; nominal 0.5 matches the observed rate.
  CHECK(ils_lambda_coverage(records, 1.0, 0.5, kRepl) ==
        doctest::Approx(0.0));
  // No conformalization shift anywhere: the subset is the whole sample.
  std::vector<EvaluationRecord> flat{
      rec(0.5, Interval::finite(0.0, 1.0)),
      rec(5.0, Interval::finite(0.0, 2.0)),
  };
  CHECK(ils_lambda_coverage(flat, 0.10, 0.2, kRepl) ==
        doctest::Approx(100.0 * std::fabs(0.5 - 0.8)));

  CHECK_THROWS_AS((void)ils_lambda_coverage(records, 0.0, 0.2, kRepl),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)ils_lambda_coverage(records, 1.5, 0.2, kRepl),
                  std::invalid_argument);
}

TEST_CASE("rank correlation between error and length") {
  std::vector<EvaluationRecord> records;
  const double errs[3] = {1.0, 2.0, 3.0};
  const double lens[3] = {30.0, 10.0, 20.0};
  for (int i = 0; i < 3; ++i) {
    EvaluationRecord r;
    r.center = 0.0;
    r.y = errs[i];
    r.base = Interval::finite(0.0, lens[i]);
    r.conformalized = r.base;
    records.push_back(r);
  }
  const CorrelationResult s = spearman_error_length(records, kRepl);
  CHECK_FALSE(s.degenerate);
  CHECK(s.value == doctest::Approx(-0.5).epsilon(1e-12));

  // Cross-check against the independent rank implementation on noisy data.
  UniformStream rng(42);
  std::vector<EvaluationRecord> noisy;
  std::vector<double> err_v;
  std::vector<double> len_v;
  for (int i = 0; i < 60; ++i) {
    EvaluationRecord r;
    r.center = 0.0;
    r.y = rng.next_normal();
    const double len = 1.0 + 4.0 * rng.next();
    r.base = Interval::finite(-len / 2.0, len / 2.0);
    r.conformalized = r.base;
    noisy.push_back(r);
    err_v.push_back(std::fabs(r.y));
    len_v.push_back(len);
  }
  const CorrelationResult got = spearman_error_length(noisy, kRepl);
  CHECK(got.value ==
        doctest::Approx(oracles::spearman(err_v, len_v)).epsilon(1e-12));
}

TEST_CASE("length dispersion") {
  std::vector<EvaluationRecord> records{
      rec(0.0, Interval::finite(0.0, 2.0)),
      rec(0.0, Interval::finite(0.0, 4.0)),
      rec(0.0, Interval::finite(0.0, 6.0)),
      rec(0.0, Interval::finite(0.0, 8.0)),
  };
  CHECK(interval_length_std(records, kRepl) ==
        doctest::Approx(2.23606797749979).epsilon(1e-12));
  std::vector<EvaluationRecord> flat{
      rec(0.0, Interval::finite(0.0, 3.0)),
      rec(0.0, Interval::finite(1.0, 4.0)),
  };
  CHECK(interval_length_std(flat, kRepl) == doctest::Approx(0.0));
}

TEST_CASE("equal-frequency coverage deviation by length bins") {
  // 20 distinct lengths 1..20; the two-bin split puts lengths 1..9 below the
  // median edge (10) and 10..20 at or above it.
  std::vector<EvaluationRecord> records;
  for (int i = 1; i <= 20; ++i) {
    const double len = static_cast<double>(i);
    const bool cover = (i <= 9) || (i <= 17);  // low bin 9/9, high bin 8/11
    EvaluationRecord r;
    r.y = cover ? 0.0 : 1e6;
    r.center = 0.0;
    r.base = Interval::finite(-len / 2.0, len / 2.0);
    r.conformalized = r.base;
    records.push_back(r);
  }
  const double expected = 100.0 * (0.2 + (0.8 - 8.0 / 11.0)) / 2.0;
  CHECK(mcd(records, 50.0, 0.2, kRepl) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(150.0 / 11.0).epsilon(1e-12));

  // Permutation invariance, including with a tied plateau that empties the
  // lower bin entirely.
  std::vector<EvaluationRecord> tied;
  for (int i = 0; i < 20; ++i) {
    const double len = i < 10 ? 1.0 : 5.0;
    const bool cover = i < 10 ? (i != 0) : (i < 17);  // 9 + 7 of 20 covered
    EvaluationRecord r;
    r.y = cover ? 0.0 : 1e6;
    r.center = 0.0;
    r.base = Interval::finite(-len / 2.0, len / 2.0);
    r.conformalized = r.base;
    tied.push_back(r);
  }
  // Median edge is the plateau value 1, so every record lands in the top bin
  // and the empty low bin is skipped: coverage 16/20 against nominal 0.8.
  CHECK(mcd(tied, 50.0, 0.2, kRepl) == doctest::Approx(0.0));

  std::mt19937_64 shuffler(7);
  for (int pass = 0; pass < 5; ++pass) {
    std::shuffle(records.begin(), records.end(), shuffler);
    std::shuffle(tied.begin(), tied.end(), shuffler);
    CHECK(mcd(records, 50.0, 0.2, kRepl) ==
          doctest::Approx(150.0 / 11.0).epsilon(1e-12));
    CHECK(mcd(tied, 50.0, 0.2, kRepl) == doctest::Approx(0.0));
  }

  CHECK_THROWS_AS((void)mcd(records, 0.0, 0.2, kRepl), std::invalid_argument);
  CHECK_THROWS_AS((void)mcd(records, 150.0, 0.2, kRepl),
                  std::invalid_argument);
}

TEST_CASE("degenerate correlations are flagged, not NaN") {
  std::vector<EvaluationRecord> always_covered{
      rec(0.5, Interval::finite(0.0, 1.0)),
      rec(0.5, Interval::finite(0.0, 2.0)),
  };
  const CorrelationResult p = pearson_length_coverage(always_covered, kRepl);
  CHECK(p.degenerate);
  CHECK(p.value == 0.0);

  std::vector<EvaluationRecord> same_err{
      rec(0.5, Interval::finite(0.0, 1.0)),
      rec(0.5, Interval::finite(0.0, 2.0)),
  };
  for (auto& r : same_err) r.center = r.y - 1.0;  // constant |error|
  const CorrelationResult s = spearman_error_length(same_err, kRepl);
  CHECK(s.degenerate);
  CHECK(s.value == 0.0);
}

TEST_CASE("aggregate report matches the individual metrics") {
  UniformStream rng(1234);
  std::vector<EvaluationRecord> records;
  for (int i = 0; i < 200; ++i) {
    const double c = 5.0 * rng.next_normal();
    const double w = 2.0 + 6.0 * rng.next();
    EvaluationRecord r;
    r.center = c;
    r.y = c + 2.0 * rng.next_normal();
    r.base = Interval::finite(c - w / 2.0, c + w / 2.0);
    r.conformalized = Interval::finite(c - w / 2.0 - 0.3, c + w / 2.0 + 0.3);
    records.push_back(r);
  }
  records[7].conformalized = Interval::infinite();
  records[11].conformalized = Interval::empty(1.0, -1.0);

  const MetricsReport rep = evaluate(records, 0.2, kRepl, 0.10, 5.0);
  CHECK(rep.n == 200);
  CHECK(rep.coverage == doctest::Approx(empirical_coverage(records)));
  CHECK(rep.mean_length ==
        doctest::Approx(mean_interval_length(records, kRepl)));
  CHECK(rep.winkler == doctest::Approx(winkler_score(records, 0.2, kRepl)));
  CHECK(rep.pearson ==
        doctest::Approx(pearson_length_coverage(records, kRepl).value));
  CHECK(rep.ils ==
        doctest::Approx(ils_lambda_coverage(records, 0.10, 0.2, kRepl)));
  CHECK(rep.spearman ==
        doctest::Approx(spearman_error_length(records, kRepl).value));
  CHECK(rep.length_std ==
        doctest::Approx(interval_length_std(records, kRepl)));
  CHECK(rep.mcd_value == doctest::Approx(mcd(records, 5.0, 0.2, kRepl)));
  CHECK(rep.n_empty == 1);
  CHECK(rep.n_infinite == 1);
}

namespace {

std::vector<EvaluationRecord> bernoulli_records(int n, int covered,
                                                std::uint64_t seed) {
  // Coverage indicators with an exact hit count; lengths mildly varied.
  std::vector<EvaluationRecord> records;
  UniformStream rng(seed);
  for (int i = 0; i < n; ++i) {
    const double w = 2.0 + rng.next();
    EvaluationRecord r;
    r.center = 0.0;
    r.y = i < covered ? 0.0 : 1e6;
    r.base = Interval::finite(-w, w);
    r.conformalized = r.base;
    records.push_back(r);
  }
  std::mt19937_64 shuffler(seed + 1);
  std::shuffle(records.begin(), records.end(), shuffler);
  return records;
}

}  // namespace

TEST_CASE("iid bootstrap of the coverage rate matches the binomial formula") {
  // With mean block length 1 each draw restarts, so the resamples are iid
  // with replacement: the std of the resampled coverage (in percent) must
  // approach 100 sqrt(p (1 - p) / m) with p = 0.8, m = 400 -> 2.0.
  const std::vector<EvaluationRecord> records = bernoulli_records(1000, 800, 5);
  BootstrapConfig config;
  config.n_samples = 800;
  config.sample_size = 400;
  config.mean_block_length = 1.0;
  config.seed = 99;
  const double got = stationary_bootstrap_std(
      [](std::span<const EvaluationRecord> r) { return empirical_coverage(r); },
      records, config);
  CHECK(got > 1.6);
  CHECK(got < 2.4);

  const double again = stationary_bootstrap_std(
      [](std::span<const EvaluationRecord> r) { return empirical_coverage(r); },
      records, config);
  CHECK(got == again);  // deterministic for a fixed seed
}

TEST_CASE("bootstrap draws contiguous wrapped blocks") {
  // Mark each record with its position, then inspect the resample the metric
  // callback receives.
  std::vector<EvaluationRecord> records;
  for (int i = 0; i < 50; ++i) {
    records.push_back(rec(0.0, Interval::finite(0.0, 1.0)));
    records.back().y = static_cast<double>(i);
  }
  const auto consecutive_fraction = [](std::span<const EvaluationRecord> r) {
    int consecutive = 0;
    for (std::size_t i = 1; i < r.size(); ++i) {
      const int prev = static_cast<int>(r[i - 1].y);
      const int cur = static_cast<int>(r[i].y);
      if (cur == (prev + 1) % 50) ++consecutive;
    }
    return static_cast<double>(consecutive) / static_cast<double>(r.size() - 1);
  };

  std::vector<double> fractions;
  BootstrapConfig config;
  config.n_samples = 50;
  config.sample_size = 200;
  config.mean_block_length = 1e12;  // effectively never restarts
  config.seed = 3;
  (void)stationary_bootstrap_std(
      [&](std::span<const EvaluationRecord> r) {
        fractions.push_back(consecutive_fraction(r));
        return fractions.back();
      },
      records, config);
  for (const double f : fractions) CHECK(f == doctest::Approx(1.0));

  fractions.clear();
  config.mean_block_length = 50.0;
  (void)stationary_bootstrap_std(
      [&](std::span<const EvaluationRecord> r) {
        fractions.push_back(consecutive_fraction(r));
        return fractions.back();
      },
      records, config);
  double mean = 0.0;
  for (const double f : fractions) mean += f;
  mean /= static_cast<double>(fractions.size());
  CHECK(mean > 0.95);  // restarts only ~1 in 50 steps
  CHECK(mean < 0.995);
}

TEST_CASE("per-metric bootstrap stds share the index streams") {
  const std::vector<EvaluationRecord> records = bernoulli_records(300, 240, 21);
  BootstrapConfig config;
  config.n_samples = 60;
  config.sample_size = 150;
  config.mean_block_length = 10.0;
  config.seed = 7;
  const BootstrapStds stds =
      bootstrap_report_stds(records, 0.2, kRepl, config, 0.10, 25.0);
  const double cov_only = stationary_bootstrap_std(
      [](std::span<const EvaluationRecord> r) { return empirical_coverage(r); },
      records, config);
  CHECK(stds.coverage == cov_only);  // same seeds, same index streams
  CHECK(stds.mean_length > 0.0);
  CHECK(stds.winkler > 0.0);

  BootstrapConfig bad = config;
  bad.mean_block_length = 0.5;
  CHECK_THROWS_AS((void)stationary_bootstrap_std(
                      [](std::span<const EvaluationRecord> r) {
                        return empirical_coverage(r);
                      },
                      records, bad),
                  std::invalid_argument);
  bad = config;
  bad.n_samples = 1;
  CHECK_THROWS_AS(
      (void)bootstrap_report_stds(records, 0.2, kRepl, bad, 0.10, 25.0),
      std::invalid_argument);
}
