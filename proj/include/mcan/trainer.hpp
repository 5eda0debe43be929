#pragma once

#include "mcan/features.hpp"
#include "mcan/metrics.hpp"
#include "mcan/model.hpp"
#include "mcan/normalize.hpp"
#include "mcan/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double dropout = 0.5;
  double alpha = 0.2;
  double beta = 0.2;
  int folds = 5;
  int fold = -1;  // test fold; -1 selects the last (most recent) block
  bool shuffle_folds = false;
  int train_stride = 1;  // keep every n-th training sample
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1 || batch_size < 1 || train_stride < 1) {
      throw std::invalid_argument("train config: epochs, batch_size and train_stride must be positive");
    }
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning_rate must be positive");
    if (!(dropout >= 0.0) || dropout >= 1.0) throw std::invalid_argument("train config: dropout must lie in [0, 1)");
    if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("train config: alpha and beta must be >= 0");
    if (folds < 2) throw std::invalid_argument("train config: folds must be >= 2");
    if (fold < -1 || fold >= folds) throw std::invalid_argument("train config: fold must lie in [-1, folds)");
  }

  int test_fold() const { return fold < 0 ? folds - 1 : fold; }
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Cross-validation

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// k partitions of [0, n). By default each test block is a contiguous run of
/// the time-ordered samples; with `shuffled` the blocks are cut from a
/// seeded permutation instead.
inline std::vector<Fold> kfold_split(std::size_t n, int k, std::uint64_t seed, bool shuffled = false) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  if (static_cast<std::size_t>(k) > n) {
    throw std::invalid_argument("kfold_split: k=" + std::to_string(k) + " exceeds the " + std::to_string(n) +
                                " eligible samples");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffled) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  const auto kk = static_cast<std::size_t>(k);
  for (std::size_t f = 0; f < kk; ++f) {
    const std::size_t lo = f * n / kk;
    const std::size_t hi = (f + 1) * n / kk;
    auto& fold = folds[f];
    fold.test.assign(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
    fold.train.reserve(n - (hi - lo));
    fold.train.insert(fold.train.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(lo));
    fold.train.insert(fold.train.end(), order.begin() + static_cast<std::ptrdiff_t>(hi), order.end());
    std::sort(fold.test.begin(), fold.test.end());
    std::sort(fold.train.begin(), fold.train.end());
  }
  return folds;
}

/// Scaler with mean 0, std 1 and a zero daily profile; used where only
/// sample geometry matters.
inline Scaler identity_scaler(const Dataset& ds) {
  std::vector<RoadStats> roads;
  for (std::size_t i = 0; i < ds.num_roads(); ++i) {
    RoadStats s;
    s.daily_average.assign(static_cast<std::size_t>(ds.road(static_cast<int>(i)).slots_per_day()), 0.0);
    roads.push_back(std::move(s));
  }
  return Scaler(std::move(roads));
}

/// Training and test samples of one fold plus statistics fitted without any
/// test observation.
struct FoldPlan {
  Scaler scaler;
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::int64_t test_first_minute = 0;
  std::int64_t test_last_minute = 0;
  std::size_t purged = 0;
};

inline FoldPlan prepare_fold(const Dataset& ds, const ModelConfig& mc, const TrainConfig& tc) {
  tc.validate();
  const Scaler ident = identity_scaler(ds);
  const FeatureSource geometry(ds, ident, mc);
  const auto samples = geometry.eligible_samples();
  const auto folds = kfold_split(samples.size(), tc.folds, tc.seed, tc.shuffle_folds);
  const auto& fold = folds[static_cast<std::size_t>(tc.test_fold())];

  FoldPlan plan;
  for (auto i : fold.test) plan.test.push_back(samples[i]);
  plan.test_first_minute = std::numeric_limits<std::int64_t>::max();
  plan.test_last_minute = std::numeric_limits<std::int64_t>::min();
  for (const auto& s : plan.test) {
    const int iv = ds.road(s.road).interval_minutes;
    plan.test_first_minute = std::min(plan.test_first_minute, s.t * iv);
    plan.test_last_minute = std::max(plan.test_last_minute, (s.t + mc.horizon - 1) * iv);
  }
  auto in_test_range = [&](std::int64_t minute) {
    return minute >= plan.test_first_minute && minute <= plan.test_last_minute;
  };

  // Statistics: contiguous folds use whole days clear of the test range;
  // shuffled folds exclude the test targets themselves.
  std::vector<RoadStats> stats;
  for (std::size_t r = 0; r < ds.num_roads(); ++r) {
    const auto& road = ds.road(static_cast<int>(r));
    const auto& values = ds.series[r].values;
    std::vector<char> use(values.size(), 1);
    if (tc.shuffle_folds) {
      for (const auto& s : plan.test) {
        if (s.road != static_cast<int>(r)) continue;
        for (int k = 0; k < mc.horizon; ++k) use[static_cast<std::size_t>(s.t + k)] = 0;
      }
    } else {
      const std::int64_t spd = road.slots_per_day();
      for (std::size_t s = 0; s < values.size(); ++s) {
        const std::int64_t day = static_cast<std::int64_t>(s) / spd;
        const std::int64_t lo = day * kMinutesPerDay;
        const std::int64_t hi = lo + kMinutesPerDay - 1;
        const bool whole_day = static_cast<std::int64_t>(values.size()) >= (day + 1) * spd;
        const bool clash = whole_day ? !(hi < plan.test_first_minute || lo > plan.test_last_minute)
                                     : in_test_range(static_cast<std::int64_t>(s) * road.interval_minutes);
        use[s] = clash ? 0 : 1;
      }
    }
    try {
      stats.push_back(fit_road_stats(values, road.slots_per_day(), use));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("fold " + std::to_string(tc.test_fold()) + " leaves road " + std::to_string(r) +
                                  " without training observations");
    }
  }
  plan.scaler = Scaler(std::move(stats));

  std::vector<Sample> train;
  for (auto i : fold.train) {
    const auto& s = samples[i];
    if (!tc.shuffle_folds) {
      const int iv = ds.road(s.road).interval_minutes;
      bool leaks = false;
      if ((s.t + mc.horizon - 1) * iv >= plan.test_first_minute) {
        for (auto m : geometry.footprint_minutes(s)) {
          if (in_test_range(m)) {
            leaks = true;
            break;
          }
        }
      }
      if (leaks) {
        ++plan.purged;
        continue;
      }
    }
    train.push_back(s);
  }
  for (std::size_t i = 0; i < train.size(); i += static_cast<std::size_t>(tc.train_stride)) plan.train.push_back(train[i]);
  if (plan.train.empty()) throw std::invalid_argument("fold leaves no training samples");
  return plan;
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  McanModel model;
  FoldPlan plan;
  std::vector<double> history;  // mean per-sample training loss of each epoch
  double initial_loss = 0.0;    // mean per-sample loss before the first update
  std::int64_t adam_steps = 0;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Mean per-sample loss over `samples` in evaluation mode.
inline double mean_loss(const McanModel& model, const FeatureSource& src, const std::vector<Sample>& samples,
                        double alpha, double beta) {
  double total = 0.0;
  for (const auto& s : samples) {
    Tape tape;
    ForwardContext ctx{tape, model.params()};
    auto b = mcan_forward(ctx, model, src.inputs(s));
    total += mcan_loss(b, src.targets(s), alpha, beta).scalar();
  }
  return samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
}

/// Mini-batch Adam on the summed loss of each batch.
inline std::pair<std::vector<double>, std::int64_t> fit(McanModel& model, const FeatureSource& src,
                                                        const std::vector<Sample>& samples, const TrainConfig& tc,
                                                        const EpochCallback& on_epoch = {}) {
  tc.validate();
  if (samples.empty()) throw std::invalid_argument("fit: no training samples");
  ad::Adam adam(ad::AdamConfig{tc.learning_rate});
  std::mt19937_64 rng(tc.seed ^ 0x5eed5eed5eed5eedULL);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> history;
  ad::Gradients grads(model.params());
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      grads.zero();
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = samples[order[k]];
        Tape tape;
        ForwardContext ctx{tape, model.params(), true, tc.dropout, &rng};
        auto bundle = mcan_forward(ctx, model, src.inputs(s));
        Var loss = mcan_loss(bundle, src.targets(s), tc.alpha, tc.beta);
        if (!std::isfinite(loss.scalar())) {
          const int bad = tape.first_non_finite();
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", sample (road " +
                               std::to_string(s.road) + ", t=" + std::to_string(s.t) + "); first non-finite tensor: " +
                               (bad >= 0 ? std::string(tape.op_name(bad)) : std::string("loss")));
        }
        tape.backward(loss);
        tape.accumulate_into(grads);
        total += loss.scalar();
      }
      adam.step(model.params(), grads);
    }
    history.push_back(total / static_cast<double>(samples.size()));
    if (on_epoch) on_epoch(epoch + 1, history.back());
  }
  return {std::move(history), adam.step_count()};
}

inline TrainResult train(const Dataset& ds, const ModelConfig& mc, const TrainConfig& tc,
                         const EpochCallback& on_epoch = {}) {
  FoldPlan plan = prepare_fold(ds, mc, tc);
  McanModel model(mc, tc.seed);
  const FeatureSource src(ds, plan.scaler, mc);
  const double initial = mean_loss(model, src, plan.train, tc.alpha, tc.beta);
  auto [history, steps] = fit(model, src, plan.train, tc, on_epoch);
  return TrainResult{std::move(model), std::move(plan), std::move(history), initial, steps};
}

// ---------------------------------------------------------------------------
// Evaluation

struct PredictionRow {
  int road = 0;
  std::int64_t t = 0;
  int step = 0;  // 1-based horizon step
  double speed_kmh = 0.0;
};

/// Speed forecasts in km/h, in evaluation mode.
inline std::vector<double> predict_kmh(const McanModel& model, const FeatureSource& src, const Sample& s) {
  Tape tape;
  ForwardContext ctx{tape, model.params()};
  auto b = mcan_forward(ctx, model, src.inputs(s));
  return src.scaler().invert(s.road, ad::to_vector(b.speed.value()));
}

inline std::vector<double> truth_kmh(const Dataset& ds, const Sample& s, int horizon) {
  const auto& v = ds.series[static_cast<std::size_t>(s.road)].values;
  return {v.begin() + s.t, v.begin() + s.t + horizon};
}

inline MetricsReport evaluate(const McanModel& model, const Scaler& scaler, const Dataset& ds,
                              const std::vector<Sample>& split) {
  if (split.empty()) throw std::invalid_argument("evaluate: empty split");
  const FeatureSource src(ds, scaler, model.config());
  MetricsAccumulator acc(model.config().horizon);
  for (const auto& s : split) acc.add(truth_kmh(ds, s, model.config().horizon), predict_kmh(model, src, s));
  return acc.report();
}

inline std::vector<PredictionRow> predict(const McanModel& model, const Scaler& scaler, const Dataset& ds,
                                          const std::vector<Sample>& samples) {
  const FeatureSource src(ds, scaler, model.config());
  std::vector<PredictionRow> rows;
  for (const auto& s : samples) {
    const auto p = predict_kmh(model, src, s);
    for (std::size_t k = 0; k < p.size(); ++k) rows.push_back({s.road, s.t, static_cast<int>(k + 1), p[k]});
  }
  return rows;
}

/// Forecasts the fitted daily-average speed of each target slot.
inline MetricsReport historical_average_baseline(const Dataset& ds, const Scaler& scaler,
                                                 const std::vector<Sample>& split, int horizon) {
  if (split.empty()) throw std::invalid_argument("historical_average_baseline: empty split");
  MetricsAccumulator acc(horizon);
  for (const auto& s : split) {
    const auto& avg = scaler.road(s.road).daily_average;
    std::vector<double> pred;
    for (int k = 0; k < horizon; ++k) pred.push_back(avg[static_cast<std::size_t>(s.t + k) % avg.size()]);
    acc.add(truth_kmh(ds, s, horizon), pred);
  }
  return acc.report();
}

}  // namespace mcan
