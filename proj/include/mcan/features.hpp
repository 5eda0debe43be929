#pragma once

// Assembles the model inputs of one (road, t) sample from a dataset and a
// fitted scaler. All model-facing values are in normalized units: speeds are
// z-scored per road, trend and deviation are the differences of normalized
// values (equivalently, raw differences divided by the road's std).

#include "mcan/config.hpp"
#include "mcan/dataset.hpp"
#include "mcan/hsc.hpp"
#include "mcan/normalize.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

struct Sample {
  int road = 0;
  std::int64_t t = 0;

  bool operator==(const Sample&) const = default;
};

struct SampleInputs {
  int road = 0;
  std::int64_t t = 0;
  std::array<HscInputs, 3> hsc;  // indexed by Channel
  TemporalInputs temporal;
  std::vector<double> static_x;
  Mat dynamic_x;  // one row per context step
  double last_speed = 0.0;    // normalized speed at t-1
  double slot_average = 0.0;  // normalized daily average at slot t
};

struct SampleTargets {
  std::vector<double> speed;  // normalized speeds at t..t+H-1
  double trend = 0.0;         // normalized trend at t
  double deviation = 0.0;     // normalized deviation at t
};

/// Half-open index range [first, last) of the observations of `road` that
/// fall in the wall-clock window [end - window, end).
inline std::pair<std::int64_t, std::int64_t> window_indices(std::int64_t end_minute, int window_minutes,
                                                            int interval) {
  auto ceil_div = [](std::int64_t a, std::int64_t b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); };
  return {ceil_div(end_minute - window_minutes, interval), ceil_div(end_minute, interval)};
}

class FeatureSource {
 public:
  FeatureSource(const Dataset& ds, const Scaler& scaler, const ModelConfig& cfg)
      : ds_(&ds), scaler_(&scaler), cfg_(cfg) {
    const auto n = ds.num_roads();
    if (scaler.size() != n) throw std::invalid_argument("FeatureSource: scaler does not cover every road");
    z_.resize(n);
    avg_.resize(n);
    rings_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int r = static_cast<int>(i);
      z_[i] = scaler.apply(r, ds.series[i].values);
      avg_[i] = scaler.apply(r, scaler.road(r).daily_average);
      rings_[i] = ds.graph.k_hop_neighbors(r, cfg.hops);
      const int len = cfg.window_minutes / ds.road(r).interval_minutes;
      if (cfg.window_minutes % ds.road(r).interval_minutes != 0 || len < 1 || len > cfg.width) {
        throw std::invalid_argument("road " + std::to_string(r) + ": a " + std::to_string(cfg.window_minutes) +
                                    "-minute window at interval " + std::to_string(ds.road(r).interval_minutes) +
                                    " does not give between 1 and c=" + std::to_string(cfg.width) +
                                    " whole observations");
      }
    }
  }

  const Dataset& dataset() const { return *ds_; }
  const Scaler& scaler() const { return *scaler_; }
  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::vector<int>>& rings(int road) const { return rings_.at(static_cast<std::size_t>(road)); }

  ChannelView view(int road, ReadLog* log = nullptr) const {
    const auto i = static_cast<std::size_t>(road);
    return {road, ds_->road(road).interval_minutes, z_[i], avg_[i], log};
  }

  int context_steps() const { return std::max(cfg_.recent, 1); }

  /// Whether every input window and the full horizon of (road, t) exist.
  /// Ablation flags do not change the answer, so ablated and full models
  /// see the same samples.
  bool eligible(int road, std::int64_t t) const {
    const auto& r = ds_->road(road);
    const std::int64_t len = static_cast<std::int64_t>(z_[static_cast<std::size_t>(road)].size());
    if (t < 1 || t + cfg_.horizon > len) return false;
    if (t - cfg_.recent < 0 || t - context_steps() < 0) return false;
    if (t - static_cast<std::int64_t>(cfg_.daily) * r.slots_per_day() < 0) return false;
    if (t - static_cast<std::int64_t>(cfg_.weekly) * r.slots_per_week() < 0) return false;
    if (t * r.interval_minutes < cfg_.window_minutes) return false;
    return true;
  }

  /// All eligible samples ordered by wall-clock time of t, then road id.
  std::vector<Sample> eligible_samples() const {
    std::vector<std::pair<std::int64_t, Sample>> keyed;
    for (std::size_t i = 0; i < ds_->num_roads(); ++i) {
      const int road = static_cast<int>(i);
      const std::int64_t len = static_cast<std::int64_t>(z_[i].size());
      for (std::int64_t t = 0; t < len; ++t) {
        if (eligible(road, t)) keyed.push_back({t * ds_->road(road).interval_minutes, {road, t}});
      }
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : a.second.road < b.second.road;
    });
    std::vector<Sample> out;
    out.reserve(keyed.size());
    for (const auto& k : keyed) out.push_back(k.second);
    return out;
  }

  std::int64_t minute_of(const Sample& s) const { return s.t * ds_->road(s.road).interval_minutes; }

  /// Inputs of a sample; every series read made while assembling them is
  /// recorded in `log` when given. None of them lies at or after t on the
  /// target road's clock.
  SampleInputs inputs(const Sample& s, ReadLog* log = nullptr) const {
    if (!eligible(s.road, s.t)) {
      throw InsufficientHistory("sample (road " + std::to_string(s.road) + ", t=" + std::to_string(s.t) +
                                ") lacks history or horizon");
    }
    const auto& road = ds_->road(s.road);
    const ChannelView self = view(s.road, log);
    SampleInputs in;
    in.road = s.road;
    in.t = s.t;
    const auto& a = cfg_.ablation;
    const bool enabled[3] = {true, !a.ntr, !a.nde};
    const std::int64_t end_minute = s.t * road.interval_minutes;
    for (int ch = 0; ch < 3; ++ch) {
      if (!enabled[ch]) continue;
      HscInputs& h = in.hsc[static_cast<std::size_t>(ch)];
      h.target = s.road;
      h.rings = rings(s.road);
      auto add_window = [&](int r) {
        if (h.windows.count(r)) return;
        const ChannelView v = view(r, log);
        const auto [first, last] = window_indices(end_minute, cfg_.window_minutes, v.interval_minutes());
        std::vector<double> w;
        for (std::int64_t k = first; k < last; ++k) w.push_back(v.channel(ch, k));
        h.windows.emplace(r, std::move(w));
      };
      add_window(s.road);
      for (const auto& ring : h.rings) {
        for (int r : ring) add_window(r);
      }
    }
    in.temporal = build_temporal_inputs(self, s.t, cfg_.recent, a.nd ? 0 : cfg_.daily, a.nw ? 0 : cfg_.weekly);
    in.static_x = static_features(road);
    const int steps = context_steps();
    in.dynamic_x.resize(steps, kDynamicFeatureWidth);
    const auto& ctx = ds_->context[static_cast<std::size_t>(s.road)];
    for (int k = 0; k < steps; ++k) {
      const std::int64_t slot = s.t - steps + k;
      const auto f = dynamic_features(ctx[static_cast<std::size_t>(slot)], slot, road.slots_per_day());
      for (int c = 0; c < kDynamicFeatureWidth; ++c) in.dynamic_x(k, c) = f[static_cast<std::size_t>(c)];
    }
    in.last_speed = self.speed(s.t - 1);
    in.slot_average = self.average(s.t);
    return in;
  }

  SampleTargets targets(const Sample& s, ReadLog* log = nullptr) const {
    const ChannelView v = view(s.road, log);
    SampleTargets tg;
    for (int k = 0; k < cfg_.horizon; ++k) tg.speed.push_back(v.speed(s.t + k));
    tg.trend = v.trend(s.t);
    tg.deviation = v.deviation(s.t);
    return tg;
  }

  /// Wall-clock minutes of every observation a sample reads, inputs and
  /// targets together.
  std::vector<std::int64_t> footprint_minutes(const Sample& s) const {
    ReadLog log;
    inputs(s, &log);
    targets(s, &log);
    std::vector<std::int64_t> minutes;
    minutes.reserve(log.reads.size());
    for (const auto& [road, idx] : log.reads) minutes.push_back(idx * ds_->road(road).interval_minutes);
    return minutes;
  }

 private:
  const Dataset* ds_;
  const Scaler* scaler_;
  ModelConfig cfg_;
  std::vector<std::vector<double>> z_;
  std::vector<std::vector<double>> avg_;
  std::vector<std::vector<std::vector<int>>> rings_;
};

}  // namespace mcan
