#pragma once

#include "mcan/series.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

/// Per-road z-score parameters and the frozen daily average profile (km/h).
struct RoadStats {
  double mean = 0.0;
  double std = 1.0;
  std::vector<double> daily_average;
};

class Scaler {
 public:
  Scaler() = default;
  explicit Scaler(std::vector<RoadStats> roads) : roads_(std::move(roads)) {}

  std::size_t size() const { return roads_.size(); }
  const RoadStats& road(int id) const { return roads_.at(static_cast<std::size_t>(id)); }
  const std::vector<RoadStats>& roads() const { return roads_; }

  double apply(int road, double kmh) const {
    const auto& s = this->road(road);
    return (kmh - s.mean) / s.std;
  }
  double invert(int road, double z) const {
    const auto& s = this->road(road);
    return z * s.std + s.mean;
  }
  /// Scale-only transform for differences (trend, deviation).
  double apply_delta(int id, double kmh) const { return kmh / road(id).std; }

  std::vector<double> apply(int road, const std::vector<double>& kmh) const {
    std::vector<double> out(kmh.size());
    for (std::size_t i = 0; i < kmh.size(); ++i) out[i] = apply(road, kmh[i]);
    return out;
  }
  std::vector<double> invert(int road, const std::vector<double>& z) const {
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = invert(road, z[i]);
    return out;
  }

 private:
  std::vector<RoadStats> roads_;
};

/// Fits one road's statistics on the indices where use[s] is true. When the
/// mask selects whole days the daily profile is the plain per-slot mean of
/// those days; otherwise each slot averages its selected indices and falls
/// back to the overall mean if none is selected.
inline RoadStats fit_road_stats(std::span<const double> values, int slots_per_day, const std::vector<char>& use) {
  if (use.size() != values.size()) throw std::invalid_argument("fit_road_stats: mask length mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < values.size(); ++s) {
    if (use[s]) {
      sum += values[s];
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("fit_road_stats: no training observations");
  RoadStats st;
  st.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (std::size_t s = 0; s < values.size(); ++s) {
    if (use[s]) sq += (values[s] - st.mean) * (values[s] - st.mean);
  }
  st.std = std::sqrt(sq / static_cast<double>(n));
  if (!(st.std > 1e-12)) st.std = 1.0;

  const auto spd = static_cast<std::size_t>(slots_per_day);
  bool whole_days = values.size() % spd == 0;
  for (std::size_t d = 0; whole_days && d < values.size() / spd; ++d) {
    for (std::size_t s = 1; s < spd; ++s) {
      if (use[d * spd + s] != use[d * spd]) {
        whole_days = false;
        break;
      }
    }
  }
  if (whole_days) {
    std::vector<double> days;
    for (std::size_t s = 0; s < values.size(); ++s) {
      if (use[s]) days.push_back(values[s]);
    }
    st.daily_average = compute_daily_average(days, slots_per_day);
  } else {
    std::vector<double> acc(spd, 0.0);
    std::vector<std::size_t> cnt(spd, 0);
    for (std::size_t s = 0; s < values.size(); ++s) {
      if (!use[s]) continue;
      acc[s % spd] += values[s];
      ++cnt[s % spd];
    }
    st.daily_average.resize(spd);
    for (std::size_t k = 0; k < spd; ++k) st.daily_average[k] = cnt[k] ? acc[k] / static_cast<double>(cnt[k]) : st.mean;
  }
  return st;
}

}  // namespace mcan
