#pragma once

// Speed series, the trend/deviation/average channels derived from them, and
// the recent/daily/weekly input windows.

#include "mcan/graph.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcan {

struct SpeedSeries {
  int road_id = 0;
  std::int64_t start_timestamp = 0;
  std::vector<double> values;  // km/h, one per observation interval
};

/// trend[t-1] = values[t] - values[t-1].
inline std::vector<double> compute_trend(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("compute_trend: series needs at least 2 values");
  std::vector<double> trend(values.size() - 1);
  for (std::size_t t = 1; t < values.size(); ++t) trend[t - 1] = values[t] - values[t - 1];
  return trend;
}

/// Mean over whole days of the value at each daily slot.
inline std::vector<double> compute_daily_average(std::span<const double> values, int slots_per_day) {
  if (slots_per_day < 1) throw std::invalid_argument("compute_daily_average: slots_per_day must be >= 1");
  const auto spd = static_cast<std::size_t>(slots_per_day);
  if (values.empty() || values.size() % spd != 0) {
    throw std::invalid_argument("compute_daily_average: length " + std::to_string(values.size()) +
                                " is not a positive multiple of " + std::to_string(slots_per_day) +
                                " (whole days required)");
  }
  const std::size_t days = values.size() / spd;
  std::vector<double> avg(spd, 0.0);
  for (std::size_t d = 0; d < days; ++d) {
    for (std::size_t s = 0; s < spd; ++s) avg[s] += values[d * spd + s];
  }
  for (auto& a : avg) a /= static_cast<double>(days);
  return avg;
}

/// deviation[t] = values[t] - daily_average[t mod T^d].
inline std::vector<double> compute_deviation(std::span<const double> values, std::span<const double> daily_average) {
  if (daily_average.empty()) throw std::invalid_argument("compute_deviation: empty daily average");
  std::vector<double> dev(values.size());
  for (std::size_t t = 0; t < values.size(); ++t) dev[t] = values[t] - daily_average[t % daily_average.size()];
  return dev;
}

struct DerivedChannels {
  std::vector<double> trend;
  std::vector<double> deviation;
  std::vector<double> daily_average;
};

inline DerivedChannels derive_channels(std::span<const double> values, std::span<const double> daily_average) {
  return {compute_trend(values), compute_deviation(values, daily_average),
          std::vector<double>(daily_average.begin(), daily_average.end())};
}

/// Records (road, index) of every series read made through a ChannelView.
struct ReadLog {
  std::vector<std::pair<int, std::int64_t>> reads;
  void record(int road, std::int64_t index) { reads.emplace_back(road, index); }
};

/// Read access to one road's speed series together with its frozen daily
/// average. Trend and deviation are derived on access, so every read of a
/// derived channel is logged as the underlying speed reads.
class ChannelView {
 public:
  ChannelView(int road, int interval_minutes, std::span<const double> speed, std::span<const double> daily_average,
              ReadLog* log = nullptr)
      : road_(road), interval_(interval_minutes), speed_(speed), average_(daily_average), log_(log) {
    if (interval_ <= 0 || kMinutesPerDay % interval_ != 0) {
      throw std::invalid_argument("ChannelView: invalid interval " + std::to_string(interval_));
    }
    if (static_cast<int>(average_.size()) != slots_per_day()) {
      throw std::invalid_argument("ChannelView: road " + std::to_string(road) + " daily average has " +
                                  std::to_string(average_.size()) + " slots, expected " +
                                  std::to_string(slots_per_day()));
    }
  }

  int road() const { return road_; }
  int interval_minutes() const { return interval_; }
  int slots_per_day() const { return kMinutesPerDay / interval_; }
  int slots_per_week() const { return kDaysPerWeek * slots_per_day(); }
  std::int64_t length() const { return static_cast<std::int64_t>(speed_.size()); }
  ChannelView with_log(ReadLog* log) const { return {road_, interval_, speed_, average_, log}; }

  double speed(std::int64_t s) const {
    if (s < 0 || s >= length()) {
      throw std::out_of_range("road " + std::to_string(road_) + ": index " + std::to_string(s) +
                              " outside series of length " + std::to_string(length()));
    }
    if (log_ != nullptr) log_->record(road_, s);
    return speed_[static_cast<std::size_t>(s)];
  }

  /// speed(s) - speed(s-1). The first index has no predecessor and yields 0.
  double trend(std::int64_t s) const { return s == 0 ? (speed(0), 0.0) : speed(s) - speed(s - 1); }

  double average(std::int64_t s) const { return average_[static_cast<std::size_t>(s % slots_per_day())]; }

  double deviation(std::int64_t s) const { return speed(s) - average(s); }

  /// Value of a channel: 0 speed, 1 trend, 2 deviation.
  double channel(int which, std::int64_t s) const {
    switch (which) {
      case 0:
        return speed(s);
      case 1:
        return trend(s);
      case 2:
        return deviation(s);
      default:
        throw std::invalid_argument("ChannelView: unknown channel " + std::to_string(which));
    }
  }

 private:
  int road_;
  int interval_;
  std::span<const double> speed_;
  std::span<const double> average_;
  ReadLog* log_;
};

/// Recent, daily-periodic and weekly-periodic windows for predicting index t.
struct TemporalInputs {
  std::vector<double> rs, rt, rd, ra;
  std::vector<double> ds, dt, dd;
  std::vector<double> ws, wt, wd;
  std::vector<std::int64_t> recent_indices, daily_indices, weekly_indices;
};

class InsufficientHistory : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

inline TemporalInputs build_temporal_inputs(const ChannelView& view, std::int64_t t, int lr, int ld, int lw) {
  if (lr < 0 || ld < 0 || lw < 0) throw std::invalid_argument("build_temporal_inputs: negative window length");
  auto fail = [&](const char* branch) {
    throw InsufficientHistory(std::string(branch) + " branch lacks history for road " +
                              std::to_string(view.road()) + " at t=" + std::to_string(t));
  };
  const std::int64_t day = view.slots_per_day();
  const std::int64_t week = view.slots_per_week();
  if (t - lr < 0) fail("recent");
  if (t - static_cast<std::int64_t>(ld) * day < 0) fail("daily");
  if (t - static_cast<std::int64_t>(lw) * week < 0) fail("weekly");

  TemporalInputs in;
  for (std::int64_t s = t - lr; s < t; ++s) {
    in.recent_indices.push_back(s);
    in.rs.push_back(view.speed(s));
    in.rt.push_back(view.trend(s));
    in.rd.push_back(view.deviation(s));
    in.ra.push_back(view.average(s));
  }
  for (int k = ld; k >= 1; --k) {
    const std::int64_t s = t - k * day;
    in.daily_indices.push_back(s);
    in.ds.push_back(view.speed(s));
    in.dt.push_back(view.trend(s));
    in.dd.push_back(view.deviation(s));
  }
  for (int k = lw; k >= 1; --k) {
    const std::int64_t s = t - k * week;
    in.weekly_indices.push_back(s);
    in.ws.push_back(view.speed(s));
    in.wt.push_back(view.trend(s));
    in.wd.push_back(view.deviation(s));
  }
  return in;
}

}  // namespace mcan
