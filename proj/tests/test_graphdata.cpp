#include "test_util.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mcan;
namespace fs = std::filesystem;

namespace {

std::vector<RoadSegment> segments(const std::vector<int>& intervals) {
  std::vector<RoadSegment> nodes;
  for (std::size_t i = 0; i < intervals.size(); ++i) nodes.push_back({static_cast<int>(i), 250.0, 1, 2, 0, intervals[i]});
  return nodes;
}

RoadGraph line3() { return RoadGraph(segments({5, 5, 5}), {{0, 1}, {1, 2}}); }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("mcan_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(RoadGraphTest, InvariantsEnforced) {
  EXPECT_THROW(RoadGraph(segments({5, 5}), {{0, 0}}), std::invalid_argument);
  EXPECT_THROW(RoadGraph(segments({5, 5}), {{0, 1}, {1, 0}}), std::invalid_argument);
  auto bad = segments({5, 5});
  bad[1].id = 3;
  EXPECT_THROW(RoadGraph(bad, {}), std::invalid_argument);
  EXPECT_THROW(RoadGraph(segments({7}), {}), std::invalid_argument);
  EXPECT_THROW(RoadGraph(segments({5, 5}), {{0, 2}}), std::out_of_range);
}

TEST(RoadGraphTest, SlotsPerDayAndWeek) {
  RoadSegment r{0, 100.0, 0, 1, 0, 5};
  EXPECT_EQ(r.slots_per_day(), 288);
  EXPECT_EQ(r.slots_per_week(), 2016);
}

TEST(KHop, LineExamples) {
  const auto g = line3();
  EXPECT_EQ(g.k_hop_neighbors(1, 1), (std::vector<std::vector<int>>{{0, 2}}));
  EXPECT_EQ(g.k_hop_neighbors(0, 2), (std::vector<std::vector<int>>{{1}, {2}}));
  const RoadGraph iso(segments({5, 5}), {});
  EXPECT_EQ(iso.k_hop_neighbors(0, 2), (std::vector<std::vector<int>>{{}, {}}));
  EXPECT_THROW(g.k_hop_neighbors(5, 1), std::out_of_range);
  EXPECT_THROW(g.k_hop_neighbors(0, 0), std::invalid_argument);
}

TEST(KHop, MatchesAllPairsShortestPathOracle) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 50);
    const double p = std::uniform_real_distribution<double>(0.0, 0.2)(rng);
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p) edges.emplace_back(a, b);
      }
    }
    const RoadGraph g(segments(std::vector<int>(static_cast<std::size_t>(n), 5)), edges);
    const int inf = 1 << 20;
    std::vector<std::vector<int>> d(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), inf));
    for (int i = 0; i < n; ++i) d[i][i] = 0;
    for (auto [a, b] : edges) d[a][b] = d[b][a] = 1;
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    const int hops = 1 + static_cast<int>(rng() % 4);
    for (int node = 0; node < n; ++node) {
      const auto rings = g.k_hop_neighbors(node, hops);
      ASSERT_EQ(static_cast<int>(rings.size()), hops);
      for (int k = 1; k <= hops; ++k) {
        std::vector<int> expect;
        for (int j = 0; j < n; ++j) {
          if (d[node][j] == k) expect.push_back(j);
        }
        EXPECT_EQ(rings[static_cast<std::size_t>(k - 1)], expect);
      }
    }
  }
}

TEST(Channels, TrendExamples) {
  EXPECT_EQ(compute_trend(std::vector<double>{10, 12, 11}), (std::vector<double>{2, -1}));
  EXPECT_EQ(compute_trend(std::vector<double>{7, 7, 7, 7}), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(compute_trend(std::vector<double>{0, 5}), (std::vector<double>{5}));
  EXPECT_THROW(compute_trend(std::vector<double>{1}), std::invalid_argument);
}

TEST(Channels, DailyAverageExamples) {
  EXPECT_EQ(compute_daily_average(std::vector<double>{10, 20, 14, 24}, 2), (std::vector<double>{12, 22}));
  EXPECT_EQ(compute_daily_average(std::vector<double>{3, 4, 5}, 3), (std::vector<double>{3, 4, 5}));
  EXPECT_EQ(compute_daily_average(std::vector<double>{0, 0, 10, 0, 20, 0}, 2), (std::vector<double>{10, 0}));
  EXPECT_THROW(compute_daily_average(std::vector<double>{1, 2, 3}, 2), std::invalid_argument);
}

TEST(Channels, DeviationExamples) {
  EXPECT_EQ(compute_deviation(std::vector<double>{20}, std::vector<double>{17}), (std::vector<double>{3}));
  EXPECT_EQ(compute_deviation(std::vector<double>{12, 22, 10, 24}, std::vector<double>{12, 22}),
            (std::vector<double>{0, 0, -2, 2}));
  EXPECT_EQ(compute_deviation(std::vector<double>{1, 2, 1, 2}, std::vector<double>{1, 2}),
            (std::vector<double>{0, 0, 0, 0}));
}

TEST(Channels, DerivedChannelInvariantsOnSyntheticRoads) {
  const auto ds = testutil::small_dataset(5, 6, 17);
  for (std::size_t i = 0; i < ds.num_roads(); ++i) {
    const auto& v = ds.series[i].values;
    const int spd = ds.road(static_cast<int>(i)).slots_per_day();
    const auto avg = compute_daily_average(v, spd);
    const auto dc = derive_channels(v, avg);
    ASSERT_EQ(dc.trend.size(), v.size() - 1);
    ASSERT_EQ(dc.deviation.size(), v.size());
    double s = 0.0;
    for (std::size_t t = 0; t < v.size(); ++t) {
      EXPECT_EQ(dc.deviation[t], v[t] - avg[t % avg.size()]);
      s += dc.deviation[t];
    }
    EXPECT_NEAR(s, 0.0, 1e-9);
    // cumulative sum of the trend rebuilds the series
    double x = v[0];
    for (std::size_t t = 1; t < v.size(); ++t) {
      x += dc.trend[t - 1];
      EXPECT_NEAR(x, v[t], 1e-9);
    }
  }
}

TEST(Temporal, IndexExamples) {
  std::vector<double> v(3000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i + 1);
  const std::vector<double> avg(288, 0.0);
  const ChannelView view(0, 5, v, avg);
  auto in = build_temporal_inputs(view, 5, 2, 0, 0);
  EXPECT_EQ(in.rs, (std::vector<double>{4, 5}));
  EXPECT_EQ(in.recent_indices, (std::vector<std::int64_t>{3, 4}));

  std::vector<double> short_v(10);
  for (std::size_t i = 0; i < 10; ++i) short_v[i] = 100.0 + static_cast<double>(i);
  const std::vector<double> avg_720(720, 0.0);
  const ChannelView two_min(0, 2, short_v, avg_720);
  EXPECT_THROW(build_temporal_inputs(two_min, 6, 1, 1, 0), InsufficientHistory);

  auto d = build_temporal_inputs(view, 2500, 6, 4, 1);
  EXPECT_EQ(d.daily_indices, (std::vector<std::int64_t>{2500 - 1152, 2500 - 864, 2500 - 576, 2500 - 288}));
  EXPECT_EQ(d.weekly_indices, (std::vector<std::int64_t>{2500 - 2016}));
}

TEST(Temporal, OneDayBackWithFourSlotsPerDay) {
  std::vector<double> v(20);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 10.0 * static_cast<double>(i);
  const std::vector<double> avg(4, 1.0);
  const ChannelView view(0, 360, v, avg);  // 4 slots per day
  auto in = build_temporal_inputs(view, 6, 1, 1, 0);
  EXPECT_EQ(in.ds, (std::vector<double>{v[2]}));
  EXPECT_EQ(in.dt, (std::vector<double>{v[2] - v[1]}));
  EXPECT_EQ(in.dd, (std::vector<double>{v[2] - 1.0}));
  EXPECT_EQ(in.ra, (std::vector<double>{1.0}));
}

TEST(Temporal, BranchNamedWhenHistoryMissing) {
  std::vector<double> v(100, 1.0);
  const std::vector<double> avg(4, 1.0);
  const ChannelView view(0, 360, v, avg);
  auto message = [&](int lr, int ld, int lw) {
    try {
      build_temporal_inputs(view, 10, lr, ld, lw);
    } catch (const InsufficientHistory& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(11, 0, 0).find("recent"), std::string::npos);
  EXPECT_NE(message(1, 3, 0).find("daily"), std::string::npos);
  EXPECT_NE(message(1, 1, 1).find("weekly"), std::string::npos);
}

TEST(Temporal, NeverReadsAtOrAfterT) {
  const auto ds = testutil::small_dataset(4, 16, 5);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int road = static_cast<int>(rng() % ds.num_roads());
    const auto& r = ds.road(road);
    const auto& v = ds.series[static_cast<std::size_t>(road)].values;
    const std::vector<double> avg(static_cast<std::size_t>(r.slots_per_day()), 0.0);
    ReadLog log;
    const ChannelView view(road, r.interval_minutes, v, avg, &log);
    const std::int64_t lo = 2 * r.slots_per_week();
    const std::int64_t t = lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(v.size() - lo));
    build_temporal_inputs(view, t, 6, 4, 2);
    ASSERT_FALSE(log.reads.empty());
    for (const auto& [rd, idx] : log.reads) {
      EXPECT_EQ(rd, road);
      EXPECT_LT(idx, t);
      EXPECT_GE(idx, 0);
    }
  }
}

TEST(Features, StaticOneHotColumnsAreDisjoint) {
  RoadSegment a{0, 1500, 0, 2, 1, 5}, b = a;
  b.road_type = 2;
  const auto fa = static_features(a), fb = static_features(b);
  EXPECT_EQ(fa.size(), static_cast<std::size_t>(kStaticFeatureWidth));
  EXPECT_DOUBLE_EQ(fa[0], 1.5);
  EXPECT_EQ(fa[1], 1.0);
  EXPECT_EQ(fb[1], 0.0);
  EXPECT_EQ(fb[3], 1.0);
  const auto d = dynamic_features({2, 1, 3}, 290, 288);
  EXPECT_EQ(d.size(), static_cast<std::size_t>(kDynamicFeatureWidth));
  EXPECT_EQ(d[2], 1.0);
  EXPECT_EQ(d[4], 1.0);
  EXPECT_DOUBLE_EQ(d[5], 2.0 / 288);
  EXPECT_EQ(d[6 + 3], 1.0);
}

TEST(DatasetIo, LineGraphEcho) {
  TempDir dir("line");
  write_text(dir.path / "graph.json",
             R"({"nodes":[{"id":0,"length_m":100,"road_type":0,"lanes":1,"traffic_lights":0,"interval_minutes":5},
                          {"id":1,"length_m":200,"road_type":1,"lanes":2,"traffic_lights":1,"interval_minutes":5},
                          {"id":2,"length_m":300,"road_type":2,"lanes":3,"traffic_lights":2,"interval_minutes":5}],
                "edges":[[0,1],[1,2]]})");
  std::string series = "road_id,slot_index,speed_kmh\n", ctx = "road_id,slot_index,weather_code,holiday_flag,day_of_week\n";
  for (int r = 0; r < 3; ++r) {
    for (int s = 0; s < 4; ++s) {
      series += std::to_string(r) + "," + std::to_string(s) + "," + std::to_string(30 + r + s) + "\n";
      ctx += std::to_string(r) + "," + std::to_string(s) + ",0,0,1\n";
    }
  }
  write_text(dir.path / "series.csv", series);
  write_text(dir.path / "context.csv", ctx);
  const auto ds = load_dataset(dir.path / "graph.json", dir.path / "series.csv", dir.path / "context.csv");
  EXPECT_EQ(ds.num_roads(), 3u);
  EXPECT_EQ(ds.graph.edges(), (std::vector<std::pair<int, int>>{{0, 1}, {1, 2}}));
  EXPECT_EQ(ds.series[2].values, (std::vector<double>{32, 33, 34, 35}));
}

TEST(DatasetIo, HeterogeneousLengthsAndMismatchDetection) {
  TempDir dir("fig3");
  write_text(dir.path / "graph.json",
             R"({"nodes":[{"id":0,"length_m":100,"road_type":0,"lanes":1,"traffic_lights":0,"interval_minutes":5},
                          {"id":1,"length_m":200,"road_type":1,"lanes":2,"traffic_lights":1,"interval_minutes":10}],
                "edges":[[0,1]]})");
  std::string series = "road_id,slot_index,speed_kmh\n", ctx = "road_id,slot_index,weather_code,holiday_flag,day_of_week\n";
  for (int s = 0; s < 6; ++s) {
    series += "0," + std::to_string(s) + ",40\n";
    ctx += "0," + std::to_string(s) + ",0,0,0\n";
  }
  for (int s = 0; s < 3; ++s) {
    series += "1," + std::to_string(s) + ",35\n";
    ctx += "1," + std::to_string(s) + ",0,0,0\n";
  }
  write_text(dir.path / "series.csv", series);
  write_text(dir.path / "context.csv", ctx);
  const auto ds = load_dataset(dir.path / "graph.json", dir.path / "series.csv", dir.path / "context.csv");
  EXPECT_EQ(ds.series[0].values.size(), 6u);
  EXPECT_EQ(ds.series[1].values.size(), 3u);

  write_text(dir.path / "series.csv", series + "1,3,35\n");
  EXPECT_THROW(load_dataset(dir.path / "graph.json", dir.path / "series.csv", dir.path / "context.csv"), ParseError);
}

TEST(DatasetIo, ParseErrorsNameRowAndField) {
  TempDir dir("bad");
  write_text(dir.path / "graph.json",
             R"({"nodes":[{"id":0,"length_m":100,"road_type":0,"lanes":1,"traffic_lights":0,"interval_minutes":5}],"edges":[]})");
  write_text(dir.path / "series.csv", "road_id,slot_index,speed_kmh\n0,0,40\n0,1,fast\n");
  write_text(dir.path / "context.csv", "road_id,slot_index,weather_code,holiday_flag,day_of_week\n0,0,0,0,0\n0,1,0,0,0\n");
  try {
    load_dataset(dir.path / "graph.json", dir.path / "series.csv", dir.path / "context.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(":3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("speed_kmh"), std::string::npos) << msg;
  }
}

TEST(DatasetIo, RoadWithoutSeriesIsMissingData) {
  TempDir dir("missing");
  write_text(dir.path / "graph.json",
             R"({"nodes":[{"id":0,"length_m":100,"road_type":0,"lanes":1,"traffic_lights":0,"interval_minutes":5},
                          {"id":1,"length_m":100,"road_type":0,"lanes":1,"traffic_lights":0,"interval_minutes":5}],"edges":[]})");
  write_text(dir.path / "series.csv", "road_id,slot_index,speed_kmh\n0,0,40\n");
  write_text(dir.path / "context.csv", "road_id,slot_index,weather_code,holiday_flag,day_of_week\n0,0,0,0,0\n");
  EXPECT_THROW(load_dataset(dir.path / "graph.json", dir.path / "series.csv", dir.path / "context.csv"),
               MissingDataError);
}

TEST(DatasetIo, WriteLoadRoundTrip) {
  TempDir dir("roundtrip");
  const auto ds = testutil::small_dataset(4, 3, 8);
  const auto paths = DatasetPaths::in(dir.path);
  write_dataset(paths, ds);
  const auto back = load_dataset(paths.graph, paths.series, paths.context);
  ASSERT_EQ(back.num_roads(), ds.num_roads());
  for (std::size_t i = 0; i < ds.num_roads(); ++i) {
    EXPECT_EQ(back.series[i].values, ds.series[i].values);
    EXPECT_EQ(back.road(static_cast<int>(i)).interval_minutes, ds.road(static_cast<int>(i)).interval_minutes);
    for (std::size_t s = 0; s < ds.context[i].size(); ++s) {
      EXPECT_EQ(back.context[i][s].weather_code, ds.context[i][s].weather_code);
      EXPECT_EQ(back.context[i][s].day_of_week, ds.context[i][s].day_of_week);
    }
  }
  EXPECT_EQ(back.graph.edges(), ds.graph.edges());
}

TEST(Synthetic, DeterministicFilesForFixedSeed) {
  TempDir a("gen_a"), b("gen_b");
  SyntheticConfig sc;
  sc.num_roads = 5;
  sc.days = 2;
  write_dataset(DatasetPaths::in(a.path), generate_synthetic(sc, 42));
  write_dataset(DatasetPaths::in(b.path), generate_synthetic(sc, 42));
  for (const char* f : {"graph.json", "series.csv", "context.csv"}) EXPECT_EQ(slurp(a.path / f), slurp(b.path / f));
  const auto c = generate_synthetic(sc, 43);
  EXPECT_NE(c.series[0].values, generate_synthetic(sc, 42).series[0].values);
}

TEST(Synthetic, NoiseFreeUncoupledSeriesArePeriodic) {
  SyntheticConfig sc;
  sc.num_roads = 6;
  sc.days = 3;
  sc.noise_std = 0.0;
  sc.coupling = 0.0;
  sc.weekly_amplitude = 0.0;
  const auto ds = generate_synthetic(sc, 7);
  for (std::size_t i = 0; i < ds.num_roads(); ++i) {
    const auto& v = ds.series[i].values;
    const auto spd = static_cast<std::size_t>(ds.road(static_cast<int>(i)).slots_per_day());
    for (std::size_t t = 0; t + spd < v.size(); ++t) ASSERT_EQ(v[t], v[t + spd]);
  }
}

TEST(Synthetic, IntervalMenuRespected) {
  SyntheticConfig sc;
  sc.num_roads = 4;
  sc.days = 2;
  sc.interval_menu = {5, 10};
  const auto ds = generate_synthetic(sc, 1);
  bool saw5 = false, saw10 = false;
  for (std::size_t i = 0; i < 4; ++i) {
    const int iv = ds.road(static_cast<int>(i)).interval_minutes;
    ASSERT_TRUE(iv == 5 || iv == 10);
    saw5 |= iv == 5;
    saw10 |= iv == 10;
    EXPECT_EQ(ds.series[i].values.size(), static_cast<std::size_t>(2 * 1440 / iv));
    for (double v : ds.series[i].values) EXPECT_GE(v, 0.0);
  }
  EXPECT_TRUE(saw5 && saw10);
}

TEST(Synthetic, InvalidConfigsRejected) {
  SyntheticConfig sc;
  sc.num_roads = 0;
  EXPECT_THROW(generate_synthetic(sc, 1), ConfigError);
  sc.num_roads = 3;
  sc.interval_menu = {};
  EXPECT_THROW(generate_synthetic(sc, 1), ConfigError);
}
