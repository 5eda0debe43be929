#pragma once

// Same-slot Pearson correlations between two roads under the speed, trend
// and deviation measurements.

#include "mcan/dataset.hpp"
#include "mcan/graph.hpp"
#include "mcan/hsc.hpp"
#include "mcan/series.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

/// Values at t, t - spd, ..., t - d*spd.
inline std::vector<double> same_slot_series(std::span<const double> values, int slots_per_day, std::int64_t t, int d) {
  if (d < 0 || slots_per_day < 1) throw std::invalid_argument("same_slot_series: d must be >= 0, spd >= 1");
  if (t < 0 || t >= static_cast<std::int64_t>(values.size())) {
    throw std::out_of_range("same_slot_series: t=" + std::to_string(t) + " outside the series");
  }
  if (static_cast<std::int64_t>(d) * slots_per_day > t) {
    throw InsufficientHistory("same_slot_series: " + std::to_string(d) + " previous days unavailable at t=" +
                              std::to_string(t));
  }
  std::vector<double> out;
  for (int k = 0; k <= d; ++k) out.push_back(values[static_cast<std::size_t>(t - static_cast<std::int64_t>(k) * slots_per_day)]);
  return out;
}

/// Sample Pearson coefficient; NaN when either vector is constant.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("pearson: need at least 2 values");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

struct CorrelationSeries {
  int road_a = 0;
  int road_b = 0;
  Channel measurement = Channel::Speed;
  int days = 0;                     // d
  std::vector<std::int64_t> slots;  // common-grid slot index
  std::vector<double> values;       // NaN where undefined
};

struct CorrelationRequest {
  int road_a = 0;
  int road_b = 1;
  std::vector<Channel> measurements{Channel::Speed, Channel::Trend, Channel::Deviation};
  int days = 7;
  std::int64_t slot_begin = 0;   // common-grid slots, half-open
  std::int64_t slot_end = -1;    // -1: through the last common slot
};

/// Per-slot mean over every whole or partial day of the series.
inline std::vector<double> slot_means(std::span<const double> values, int slots_per_day) {
  std::vector<double> sum(static_cast<std::size_t>(slots_per_day), 0.0);
  std::vector<double> cnt(static_cast<std::size_t>(slots_per_day), 0.0);
  for (std::size_t s = 0; s < values.size(); ++s) {
    sum[s % sum.size()] += values[s];
    cnt[s % sum.size()] += 1.0;
  }
  for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = cnt[k] > 0 ? sum[k] / cnt[k] : 0.0;
  return sum;
}

/// Speed, trend (index-aligned, 0 at the first index) and deviation from
/// the per-slot mean.
inline std::array<std::vector<double>, 3> measurement_series(std::span<const double> values, int slots_per_day) {
  std::array<std::vector<double>, 3> out;
  out[0].assign(values.begin(), values.end());
  out[1].assign(values.size(), 0.0);
  for (std::size_t t = 1; t < values.size(); ++t) out[1][t] = values[t] - values[t - 1];
  out[2] = compute_deviation(values, slot_means(values, slots_per_day));
  return out;
}

/// Correlations are taken only at wall-clock times both roads observe; the
/// common grid has step lcm(T_a, T_b) minutes.
inline std::vector<CorrelationSeries> multifold_correlation_report(const Dataset& ds, const CorrelationRequest& req) {
  if (req.measurements.empty()) throw std::invalid_argument("correlate: no measurements requested");
  if (req.days < 1) throw std::invalid_argument("correlate: d must be >= 1");
  const auto& ra = ds.road(req.road_a);
  const auto& rb = ds.road(req.road_b);
  const int step = std::lcm(ra.interval_minutes, rb.interval_minutes);
  if (kMinutesPerDay % step != 0) throw std::invalid_argument("correlate: the roads share no daily slot grid");
  const std::int64_t per_day = kMinutesPerDay / step;
  const auto& va = ds.series[static_cast<std::size_t>(req.road_a)].values;
  const auto& vb = ds.series[static_cast<std::size_t>(req.road_b)].values;
  const std::int64_t total = std::min(static_cast<std::int64_t>(va.size()) * ra.interval_minutes,
                                      static_cast<std::int64_t>(vb.size()) * rb.interval_minutes) /
                             step;
  // The first usable slot needs d previous days and one earlier step for the trend.
  const std::int64_t first = std::max<std::int64_t>(req.slot_begin, req.days * per_day + 1);
  const std::int64_t last = req.slot_end < 0 ? total : std::min(req.slot_end, total);
  if (first >= last) throw std::invalid_argument("correlate: no overlapping slots with enough history");

  const auto a_in = measurement_series(va, ra.slots_per_day());
  const auto b_in = measurement_series(vb, rb.slots_per_day());

  std::vector<CorrelationSeries> out;
  for (Channel m : req.measurements) {
    CorrelationSeries cs;
    cs.road_a = req.road_a;
    cs.road_b = req.road_b;
    cs.measurement = m;
    cs.days = req.days;
    const auto& sa = a_in[static_cast<std::size_t>(m)];
    const auto& sb = b_in[static_cast<std::size_t>(m)];
    for (std::int64_t g = first; g < last; ++g) {
      const std::int64_t ia = g * step / ra.interval_minutes;
      const std::int64_t ib = g * step / rb.interval_minutes;
      cs.slots.push_back(g);
      cs.values.push_back(pearson(same_slot_series(sa, ra.slots_per_day(), ia, req.days),
                                  same_slot_series(sb, rb.slots_per_day(), ib, req.days)));
    }
    out.push_back(std::move(cs));
  }
  return out;
}

/// Rows of `time_slot,measurement,correlation`; undefined values are empty.
inline void write_correlation_csv(std::ostream& out, const std::vector<CorrelationSeries>& report) {
  out << "time_slot,measurement,correlation\n";
  for (const auto& cs : report) {
    for (std::size_t i = 0; i < cs.slots.size(); ++i) {
      out << cs.slots[i] << ',' << channel_name(cs.measurement) << ',';
      if (std::isfinite(cs.values[i])) out << format_double(cs.values[i]);
      out << '\n';
    }
  }
}

/// Fraction of slots at which `m` attains the largest |correlation| among
/// the report's measurements (ties count for every tied measurement).
inline double dominance_fraction(const std::vector<CorrelationSeries>& report, Channel m) {
  if (report.empty()) return 0.0;
  const std::size_t n = report.front().slots.size();
  std::size_t wins = 0, defined = 0;
  const CorrelationSeries* target = nullptr;
  for (const auto& cs : report) {
    if (cs.measurement == m) target = &cs;
  }
  if (!target) return 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = -1.0;
    for (const auto& cs : report) {
      if (std::isfinite(cs.values[i])) best = std::max(best, std::abs(cs.values[i]));
    }
    if (best < 0.0) continue;
    ++defined;
    const double v = target->values[i];
    if (std::isfinite(v) && std::abs(v) >= best - 1e-12) ++wins;
  }
  return defined ? static_cast<double>(wins) / static_cast<double>(defined) : 0.0;
}

struct PlantedPairConfig {
  int interval_minutes = 15;
  int days = 28;
  int block_minutes = 120;  // regimes alternate in blocks of this length
  double base_speed = 50.0;
  double level_std = 8.0;    // day-to-day level spread
  double noise_std = 0.5;
  double swing_std = 2.0;    // anti-symmetric per-slot swing in the trend regime
};

/// Two adjacent roads whose same-slot speeds co-move in even blocks of the
/// day (shared daily level) and whose changes mirror each other in odd
/// blocks (independent levels, opposite swings).
inline Dataset planted_pair(const PlantedPairConfig& cfg, std::uint64_t seed) {
  if (cfg.interval_minutes < 1 || kMinutesPerDay % cfg.interval_minutes != 0 || cfg.days < 2 ||
      cfg.block_minutes < cfg.interval_minutes) {
    throw std::invalid_argument("planted_pair: invalid configuration");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int spd = kMinutesPerDay / cfg.interval_minutes;
  std::vector<RoadSegment> nodes(2);
  for (int i = 0; i < 2; ++i) {
    nodes[static_cast<std::size_t>(i)] = RoadSegment{i, 500.0, 0, 2, 0, cfg.interval_minutes};
  }
  Dataset ds{RoadGraph(nodes, {{0, 1}}), {}, {}};
  std::vector<double> a, b;
  for (int day = 0; day < cfg.days; ++day) {
    const double shared = cfg.level_std * gauss(rng);
    const double own_a = cfg.level_std * gauss(rng);
    const double own_b = cfg.level_std * gauss(rng);
    for (int s = 0; s < spd; ++s) {
      const bool speed_regime = (s * cfg.interval_minutes / cfg.block_minutes) % 2 == 0;
      if (speed_regime) {
        a.push_back(cfg.base_speed + shared + cfg.noise_std * gauss(rng));
        b.push_back(cfg.base_speed + shared + cfg.noise_std * gauss(rng));
      } else {
        const double u = cfg.swing_std * gauss(rng);
        a.push_back(cfg.base_speed + own_a + u);
        b.push_back(cfg.base_speed + own_b - u);
      }
    }
  }
  ds.series = {SpeedSeries{0, 0, std::move(a)}, SpeedSeries{1, 0, std::move(b)}};
  for (int r = 0; r < 2; ++r) {
    std::vector<ContextRow> rows;
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(cfg.days) * spd; ++t) {
      rows.push_back({0, 0, static_cast<int>((t / spd) % kDaysPerWeek)});
    }
    ds.context.push_back(std::move(rows));
  }
  validate_dataset(ds);
  return ds;
}

}  // namespace mcan
