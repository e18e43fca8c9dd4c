#include "hqrwaci/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hqrwaci/errors.hpp"

namespace hqrwaci {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ScoreSet::ScoreSet(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) {
    throw std::invalid_argument("ScoreSet: capacity must be positive");
  }
  sorted_.reserve(capacity);
}

void ScoreSet::push(double score) {
  if (fifo_.size() == capacity_) {
    const double oldest = fifo_.front();
    fifo_.pop_front();
    const auto it = std::lower_bound(sorted_.begin(), sorted_.end(), oldest);
    sorted_.erase(it);
  }
  fifo_.push_back(score);
  sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), score),
                 score);
}

double ScoreSet::kth_smallest(std::size_t k) const {
  if (k < 1 || k > sorted_.size()) {
    throw std::out_of_range("ScoreSet::kth_smallest: k outside [1, size]");
  }
  return sorted_[k - 1];
}

namespace {

double augmented_quantile_impl(const std::vector<double>& sorted, double p) {
  const auto n = sorted.size();
  const double raw = p * static_cast<double>(n + 1);
  const auto k = static_cast<long long>(std::ceil(raw - 1e-9));
  if (k <= 0) return -kInf;
  if (k > static_cast<long long>(n)) return kInf;
  return sorted[static_cast<std::size_t>(k - 1)];
}

}  // namespace

double augmented_quantile(const ScoreSet& scores, double p) {
  return augmented_quantile_impl(scores.sorted(), p);
}

double augmented_quantile(std::span<const double> sorted_scores, double p) {
  std::vector<double> copy(sorted_scores.begin(), sorted_scores.end());
  return augmented_quantile_impl(copy, p);
}

double cqr_score(double y, const Interval& interval) {
  if (interval.kind != IntervalKind::Finite) {
    throw std::invalid_argument(
        "cqr_score: conformity scores need a finite interval");
  }
  return std::max(y - interval.upper, interval.lower - y);
}

Interval cqr_conformalize(const Interval& base, double q) {
  if (base.kind != IntervalKind::Finite) {
    throw std::invalid_argument("cqr_conformalize: base must be finite");
  }
  if (q == kInf) return Interval::infinite();
  if (q == -kInf) return Interval::empty(base.midpoint(), base.midpoint());
  const double lo = base.lower - q;
  const double hi = base.upper + q;
  if (lo > hi) return Interval::empty(lo, hi);
  return Interval::finite(lo, hi);
}

Interval scp_step(ScpState& state, double mu_hat, double y) {
  const double q = augmented_quantile(state.scores, 1.0 - state.alpha);
  Interval out;
  if (q == kInf) {
    out = Interval::infinite();
  } else if (q < 0.0) {
    // Negative radius cannot happen with |residual| scores unless q = -inf
    // (empty score set with tiny 1 - alpha); treat as collapsed.
    out = Interval::empty(mu_hat - q, mu_hat + q);
  } else {
    out = Interval::finite(mu_hat - q, mu_hat + q);
  }
  state.scores.push(std::fabs(y - mu_hat));
  return out;
}

LengthGrid LengthGrid::uniform(double l_min, double l_max, double delta) {
  if (!(delta > 0.0)) {
    throw std::invalid_argument("LengthGrid: delta must be positive");
  }
  if (!(l_max > l_min)) {
    throw std::invalid_argument("LengthGrid: need l_max > l_min");
  }
  LengthGrid grid;
  const auto n = static_cast<std::size_t>(
                     std::floor((l_max - l_min) / delta + 1e-9)) +
                 1;
  grid.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid.points.push_back(l_min + static_cast<double>(i) * delta);
  }
  if (grid.points.size() < 2) grid.points.push_back(l_min + delta);
  return grid;
}

LengthGrid LengthGrid::single(double point) {
  LengthGrid grid;
  grid.points.push_back(point);
  return grid;
}

LengthGrid LengthGrid::from_warmup(std::span<const double> lengths,
                                   double delta, double widen_frac) {
  if (lengths.empty()) {
    throw std::invalid_argument("LengthGrid: no warmup lengths");
  }
  double lo = kInf;
  double hi = -kInf;
  for (const double v : lengths) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo) {
    const double pad = widen_frac * (hi - lo);
    return uniform(lo - pad, hi + pad, delta);
  }
  return uniform(lo - delta, hi + delta, delta);
}

std::size_t LengthGrid::nearest(double length) const {
  if (points.empty()) {
    throw std::logic_error("LengthGrid: empty grid");
  }
  std::size_t best = 0;
  double best_dist = std::fabs(length - points[0]);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d = std::fabs(length - points[i]);
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  return best;
}

Interval aci_step(AciState& state, const Interval& base, double y) {
  const double q = augmented_quantile(state.scores, 1.0 - state.alpha_t);
  const Interval conf = cqr_conformalize(base, q);
  const int err = conf.covers(y) ? 0 : 1;
  state.alpha_t += state.gamma * (state.alpha_star - err);
  state.err_history.push_back(err);
  state.scores.push(cqr_score(y, base));
  return conf;
}

Interval waci_step(WaciState& state, const Interval& base, double y,
                   WaciStepTrace* trace) {
  const double len = base.length();
  const std::size_t idx = state.grid.nearest(len);
  const double alpha_tilde = state.alpha_vec[idx];
  const double q = augmented_quantile(state.scores, 1.0 - alpha_tilde);
  const Interval conf = cqr_conformalize(base, q);
  const int err = conf.covers(y) ? 0 : 1;

  const double push = state.gamma * (state.alpha_star - err);
  const std::size_t g = state.grid.size();
  if (state.weight_kind == WeightKind::Gaussian) {
    // Weights use the raw incoming length, normalized so the nearest grid
    // point carries weight exactly 1. Normalizing inside the exponent keeps
    // far-off lengths from underflowing the whole profile to 0/0.
    const double d0 = len - state.grid.points[idx];
    const double denom = 2.0 * state.sigma * state.sigma;
    for (std::size_t j = 0; j < g; ++j) {
      const double d = len - state.grid.points[j];
      state.alpha_vec[j] += push * std::exp(-(d * d - d0 * d0) / denom);
    }
  } else {
    for (std::size_t j = 0; j < g; ++j) {
      const auto dist = idx > j ? idx - j : j - idx;
      state.alpha_vec[j] +=
          push * std::pow(state.lambda_decay, static_cast<double>(dist));
    }
  }

  state.err_history.push_back(err);
  state.scores.push(cqr_score(y, base));
  if (trace != nullptr) {
    trace->grid_index = idx;
    trace->alpha_used = alpha_tilde;
    trace->q_used = q;
    trace->err = err;
  }
  return conf;
}

namespace {

struct GroupRun {
  std::vector<std::size_t> rows;  // stream indices in time order
};

}  // namespace

ConformalStreamResult run_conformal_stream(const IntervalStream& stream,
                                           const ConformalStreamConfig& config) {
  stream.validate();
  if (!(config.alpha_star > 0.0 && config.alpha_star < 1.0)) {
    throw std::invalid_argument("stream: alpha_star must be in (0, 1)");
  }
  const std::size_t n = stream.size();
  std::map<int, GroupRun> groups;
  for (std::size_t i = 0; i < n; ++i) {
    const int key = stream.group_keys.empty() ? 0 : stream.group_keys[i];
    groups[key].rows.push_back(i);
  }
  for (const auto& [key, run] : groups) {
    if (run.rows.size() <= config.warmup) {
      throw DataError("stream: group " + std::to_string(key) + " has " +
                      std::to_string(run.rows.size()) +
                      " records but warmup needs more than " +
                      std::to_string(config.warmup));
    }
  }

  ConformalStreamResult result;
  double repl_lo = kInf;
  double repl_hi = -kInf;
  bool any_warm = false;

  std::map<int, std::vector<StreamStepRecord>> out_by_group;
  for (auto& [key, run] : groups) {
    std::optional<AciState> aci;
    std::optional<WaciState> waci;
    ScoreSet seed(config.score_capacity);
    std::vector<double> warm_lengths;
    warm_lengths.reserve(config.warmup);

    auto& out = out_by_group[key];
    out.reserve(run.rows.size() - config.warmup);
    std::size_t seen = 0;
    for (const std::size_t row : run.rows) {
      const Interval& base = stream.intervals[row];
      const double y = stream.y[row];
      if (seen < config.warmup) {
        if (base.kind != IntervalKind::Finite) {
          throw DataError("stream: warmup interval not finite at row " +
                          std::to_string(row));
        }
        seed.push(cqr_score(y, base));
        warm_lengths.push_back(base.length());
        repl_lo = std::min(repl_lo, base.lower);
        repl_hi = std::max(repl_hi, base.upper);
        any_warm = true;
        ++seen;
        continue;
      }
      if (seen == config.warmup && config.method != ConformalMethod::None &&
          !aci && !waci) {
        if (config.method == ConformalMethod::Aci) {
          aci.emplace(config.alpha_star, config.gamma, config.score_capacity);
          aci->scores = seed;
        } else {
          LengthGrid grid =
              config.explicit_grid
                  ? *config.explicit_grid
                  : LengthGrid::from_warmup(warm_lengths, config.grid_delta,
                                            config.grid_widen_frac);
          waci.emplace(config.alpha_star, config.gamma, std::move(grid),
                       config.score_capacity);
          waci->weight_kind = config.weight_kind;
          waci->sigma = config.sigma;
          waci->lambda_decay = config.lambda_decay;
          waci->scores = seed;
        }
      }
      ++seen;

      StreamStepRecord rec;
      rec.timestamp = stream.timestamps[row];
      rec.group = key;
      rec.y = y;
      rec.center = stream.center[row];
      rec.base = base;
      switch (config.method) {
        case ConformalMethod::None:
          rec.conformalized = base;
          rec.alpha_used = config.alpha_star;
          rec.q_used = 0.0;
          rec.err = base.covers(y) ? 0 : 1;
          break;
        case ConformalMethod::Aci: {
          rec.alpha_used = aci->alpha_t;
          rec.conformalized = aci_step(*aci, base, y);
          rec.err = aci->err_history.back();
          rec.q_used = rec.conformalized.kind == IntervalKind::Finite
                           ? rec.conformalized.upper - base.upper
                           : (rec.conformalized.kind == IntervalKind::Infinite
                                  ? kInf
                                  : -kInf);
          break;
        }
        case ConformalMethod::Waci: {
          WaciStepTrace trace;
          rec.conformalized = waci_step(*waci, base, y, &trace);
          rec.alpha_used = trace.alpha_used;
          rec.q_used = trace.q_used;
          rec.err = trace.err;
          rec.grid_index = trace.grid_index;
          break;
        }
      }
      out.push_back(rec);
    }
    if (aci) result.aci_states.emplace(key, std::move(*aci));
    if (waci) result.waci_states.emplace(key, std::move(*waci));
  }

  if (any_warm) {
    result.replacement_lower = repl_lo;
    result.replacement_upper = repl_hi;
  }

  // Re-interleave groups into input time order; the first warmup rows of
  // each group are consumed without emission.
  std::map<int, std::size_t> cursor;
  result.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int key = stream.group_keys.empty() ? 0 : stream.group_keys[i];
    std::size_t& pos = cursor[key];
    if (pos >= config.warmup) {
      result.records.push_back(out_by_group[key][pos - config.warmup]);
    }
    ++pos;
  }
  return result;
}

}  // namespace hqrwaci
