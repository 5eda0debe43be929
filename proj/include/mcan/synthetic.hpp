#pragma once

// Seeded synthetic road network with heterogeneous sampling intervals.
//
// Every road carries a latent signal on a common fine time grid:
//   own_i(tau) = base_i + daily sinusoid_i + weekly sinusoid_i
//                - weather/holiday effects
//   dist_i(tau) = AR(1) noise
// and the observed signal mixes in the mean of its 1-hop neighbours, whose
// disturbances arrive after a lag:
//   x_i = (1 - coupling) * (own_i + dist_i)
//         + coupling * mean_{j in N_1(i)} (own_j(tau) + dist_j(tau - lag)).
// Road i is sampled every interval_i minutes, rounded to 0.01 km/h and
// clipped at zero.

#include "mcan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace mcan {

struct SyntheticConfig {
  int num_roads = 10;
  double edge_density = 0.15;  // probability of each extra non-tree edge
  std::vector<int> interval_menu = {5, 10, 15};
  int days = 28;
  double coupling = 0.5;
  int coupling_lag_minutes = 15;  // delay before a neighbour's disturbance reaches the road
  double noise_std = 3.0;           // stationary std of the AR(1) component, km/h
  double noise_persistence = 0.95;  // AR(1) coefficient per 5 minutes
  double base_speed = 45.0;
  double daily_amplitude = 10.0;
  double weekly_amplitude = 4.0;
  double weather_effect = 0.0;  // km/h lost per weather severity level
  double holiday_prob = 0.0;
  double holiday_effect = 0.0;  // km/h gained on holidays
  int start_day_of_week = 0;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void validate(const SyntheticConfig& c) {
  if (c.num_roads <= 0) throw ConfigError("num_roads must be positive");
  if (c.interval_menu.empty()) throw ConfigError("interval_menu must not be empty");
  for (int iv : c.interval_menu) {
    if (iv <= 0 || kMinutesPerDay % iv != 0) {
      throw ConfigError("interval_menu entry " + std::to_string(iv) + " must be positive and divide 1440");
    }
  }
  if (c.days <= 0) throw ConfigError("days must be positive");
  if (c.coupling < 0.0 || c.coupling > 1.0) throw ConfigError("coupling must lie in [0, 1]");
  if (c.noise_std < 0.0) throw ConfigError("noise_std must be >= 0");
  if (c.noise_persistence < 0.0 || c.noise_persistence >= 1.0) {
    throw ConfigError("noise_persistence must lie in [0, 1)");
  }
  if (c.coupling_lag_minutes < 0) throw ConfigError("coupling_lag_minutes must be >= 0");
  if (c.edge_density < 0.0 || c.edge_density > 1.0) throw ConfigError("edge_density must lie in [0, 1]");
  if (c.holiday_prob < 0.0 || c.holiday_prob > 1.0) throw ConfigError("holiday_prob must lie in [0, 1]");
  if (c.start_day_of_week < 0 || c.start_day_of_week >= kDaysPerWeek) {
    throw ConfigError("start_day_of_week must lie in [0, 7)");
  }
}

inline Dataset generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = cfg.num_roads;

  // Static attributes; every menu interval is used when n allows it.
  std::vector<int> intervals(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) intervals[static_cast<std::size_t>(i)] = cfg.interval_menu[i % cfg.interval_menu.size()];
  std::shuffle(intervals.begin(), intervals.end(), rng);
  std::vector<RoadSegment> nodes;
  for (int i = 0; i < n; ++i) {
    RoadSegment r;
    r.id = i;
    r.length_m = std::round(200.0 + 1800.0 * unif(rng));
    r.road_type = static_cast<int>(rng() % kRoadTypes);
    r.lanes = 1 + static_cast<int>(rng() % 4);
    r.traffic_lights = static_cast<int>(rng() % 4);
    r.interval_minutes = intervals[static_cast<std::size_t>(i)];
    nodes.push_back(r);
  }

  // Random spanning tree plus extra edges.
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(static_cast<int>(rng() % static_cast<std::uint64_t>(i)), i);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const bool is_tree = std::find(edges.begin(), edges.end(), std::pair<int, int>(a, b)) != edges.end();
      if (unif(rng) < cfg.edge_density && !is_tree) edges.emplace_back(a, b);
    }
  }
  RoadGraph graph(std::move(nodes), edges);

  int step = kMinutesPerDay;
  for (int iv : cfg.interval_menu) step = std::gcd(step, iv);
  const std::int64_t steps = static_cast<std::int64_t>(cfg.days) * kMinutesPerDay / step;
  const double two_pi = 2.0 * std::numbers::pi;

  // Network-wide day-level and hourly context.
  std::vector<int> holiday(static_cast<std::size_t>(cfg.days), 0);
  for (auto& h : holiday) h = unif(rng) < cfg.holiday_prob ? 1 : 0;
  const int hours = cfg.days * 24;
  std::vector<int> weather(static_cast<std::size_t>(hours), 0);
  for (int hr = 1; hr < hours; ++hr) {
    weather[static_cast<std::size_t>(hr)] =
        unif(rng) < 0.2 ? static_cast<int>(rng() % kWeatherCodes) : weather[static_cast<std::size_t>(hr - 1)];
  }

  // Per-road latent signals on the fine grid.
  const double phi = std::pow(cfg.noise_persistence, static_cast<double>(step) / 5.0);
  const double innovation = cfg.noise_std * std::sqrt(1.0 - phi * phi);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto grid = static_cast<std::size_t>(steps);
  std::vector<std::vector<double>> own(static_cast<std::size_t>(n), std::vector<double>(grid));
  std::vector<std::vector<double>> disturbance(static_cast<std::size_t>(n), std::vector<double>(grid));
  for (int i = 0; i < n; ++i) {
    const double base = cfg.base_speed * (0.8 + 0.4 * unif(rng));
    const double amp = cfg.daily_amplitude * (0.7 + 0.6 * unif(rng));
    const double phase1 = 0.5 * (unif(rng) - 0.5);
    const double phase2 = two_pi * unif(rng);
    const double wamp = cfg.weekly_amplitude * (0.7 + 0.6 * unif(rng));
    const double wphase = two_pi * unif(rng);
    double noise = cfg.noise_std * gauss(rng);
    auto& sig = own[static_cast<std::size_t>(i)];
    for (std::int64_t k = 0; k < steps; ++k) {
      const double minute = static_cast<double>(k * step);
      const double day_frac = std::fmod(minute, kMinutesPerDay) / kMinutesPerDay;
      const double week_frac = minute / (kDaysPerWeek * kMinutesPerDay);
      const auto day = static_cast<std::size_t>(k * step / kMinutesPerDay);
      const auto hour = static_cast<std::size_t>(k * step / 60);
      if (k > 0) noise = phi * noise + innovation * gauss(rng);
      sig[static_cast<std::size_t>(k)] =
          base + amp * std::sin(two_pi * day_frac - std::numbers::pi / 2 + phase1) +
          0.4 * amp * std::sin(2.0 * two_pi * day_frac + phase2) + wamp * std::sin(two_pi * week_frac + wphase) -
          cfg.weather_effect * weather[hour] + cfg.holiday_effect * holiday[day];
      disturbance[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = noise;
    }
  }

  const std::int64_t lag = cfg.coupling_lag_minutes / step;
  Dataset ds;
  ds.graph = std::move(graph);
  ds.series.resize(static_cast<std::size_t>(n));
  ds.context.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& road = ds.graph.node(i);
    const auto& nbrs = ds.graph.neighbors(i);
    const int stride = road.interval_minutes / step;
    const std::int64_t len = static_cast<std::int64_t>(cfg.days) * road.slots_per_day();
    auto& s = ds.series[static_cast<std::size_t>(i)];
    s.road_id = i;
    s.values.resize(static_cast<std::size_t>(len));
    auto& ctx = ds.context[static_cast<std::size_t>(i)];
    ctx.resize(static_cast<std::size_t>(len));
    for (std::int64_t t = 0; t < len; ++t) {
      const auto k = static_cast<std::size_t>(t * stride);
      const auto lagged = static_cast<std::size_t>(std::max<std::int64_t>(0, static_cast<std::int64_t>(k) - lag));
      double x = own[static_cast<std::size_t>(i)][k] + disturbance[static_cast<std::size_t>(i)][k];
      if (!nbrs.empty() && cfg.coupling > 0.0) {
        double m = 0.0;
        for (int j : nbrs) {
          const auto ju = static_cast<std::size_t>(j);
          m += own[ju][k] + disturbance[ju][lagged];
        }
        m /= static_cast<double>(nbrs.size());
        x = (1.0 - cfg.coupling) * x + cfg.coupling * m;
      }
      s.values[static_cast<std::size_t>(t)] = std::max(0.0, std::round(x * 100.0) / 100.0);
      const std::int64_t minute = t * road.interval_minutes;
      const auto day = static_cast<std::size_t>(minute / kMinutesPerDay);
      auto& c = ctx[static_cast<std::size_t>(t)];
      c.weather_code = weather[static_cast<std::size_t>(minute / 60)];
      c.holiday_flag = holiday[day];
      c.day_of_week = static_cast<int>((cfg.start_day_of_week + day) % kDaysPerWeek);
    }
  }
  validate_dataset(ds);
  return ds;
}

}  // namespace mcan
