#pragma once

// Dataset container and the on-disk formats:
//   graph file    JSON {"nodes": [...], "edges": [[a, b], ...]}
//   series file   CSV  road_id,slot_index,speed_kmh
//   context file  CSV  road_id,slot_index,weather_code,holiday_flag,day_of_week

#include "mcan/graph.hpp"
#include "mcan/series.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace mcan {

inline constexpr int kWeatherCodes = 4;
inline constexpr int kRoadTypes = 4;
inline constexpr int kStaticFeatureWidth = 1 + kRoadTypes + 2;
inline constexpr int kDynamicFeatureWidth = kWeatherCodes + 1 + 1 + kDaysPerWeek;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ContextRow {
  int weather_code = 0;
  int holiday_flag = 0;
  int day_of_week = 0;
};

struct Dataset {
  RoadGraph graph;
  std::vector<SpeedSeries> series;              // indexed by road id
  std::vector<std::vector<ContextRow>> context;  // indexed by road id, then slot

  std::size_t num_roads() const { return graph.size(); }
  const RoadSegment& road(int id) const { return graph.node(id); }

  /// Common observation span in minutes.
  std::int64_t span_minutes() const {
    if (series.empty()) return 0;
    return static_cast<std::int64_t>(series[0].values.size()) * graph.node(0).interval_minutes;
  }
};

/// Static road descriptor: length (km), one-hot road type, lanes/4, lights/4.
inline std::vector<double> static_features(const RoadSegment& r) {
  std::vector<double> x(kStaticFeatureWidth, 0.0);
  x[0] = r.length_m / 1000.0;
  if (r.road_type >= 0 && r.road_type < kRoadTypes) x[static_cast<std::size_t>(1 + r.road_type)] = 1.0;
  x[1 + kRoadTypes] = r.lanes / 4.0;
  x[2 + kRoadTypes] = r.traffic_lights / 4.0;
  return x;
}

/// Time-dependent descriptor of one slot: one-hot weather, holiday flag,
/// time-of-day fraction, one-hot day of week.
inline std::vector<double> dynamic_features(const ContextRow& c, std::int64_t slot, int slots_per_day) {
  std::vector<double> x(kDynamicFeatureWidth, 0.0);
  if (c.weather_code >= 0 && c.weather_code < kWeatherCodes) x[static_cast<std::size_t>(c.weather_code)] = 1.0;
  x[kWeatherCodes] = c.holiday_flag != 0 ? 1.0 : 0.0;
  x[kWeatherCodes + 1] = static_cast<double>(slot % slots_per_day) / slots_per_day;
  if (c.day_of_week >= 0 && c.day_of_week < kDaysPerWeek) {
    x[static_cast<std::size_t>(kWeatherCodes + 2 + c.day_of_week)] = 1.0;
  }
  return x;
}

/// Checks the cross-file invariants of a dataset.
inline void validate_dataset(const Dataset& ds) {
  const std::size_t n = ds.graph.size();
  if (n == 0) throw ParseError("dataset has no roads");
  if (ds.series.size() != n) {
    throw MissingDataError("dataset has " + std::to_string(ds.series.size()) + " series for " + std::to_string(n) +
                           " roads");
  }
  std::int64_t span = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& road = ds.graph.node(static_cast<int>(i));
    const auto& s = ds.series[i];
    if (s.road_id != static_cast<int>(i)) throw ParseError("series slot " + std::to_string(i) + " holds road " +
                                                           std::to_string(s.road_id));
    if (s.values.empty()) throw MissingDataError("road " + std::to_string(i) + " has no speed series");
    for (std::size_t t = 0; t < s.values.size(); ++t) {
      if (!(s.values[t] >= 0.0)) {
        throw ParseError("road " + std::to_string(i) + " slot " + std::to_string(t) + ": speed must be >= 0");
      }
    }
    const std::int64_t road_span = static_cast<std::int64_t>(s.values.size()) * road.interval_minutes;
    if (span < 0) {
      span = road_span;
    } else if (road_span != span) {
      throw ParseError("road " + std::to_string(i) + ": " + std::to_string(s.values.size()) + " rows at " +
                       std::to_string(road.interval_minutes) + "-minute interval span " + std::to_string(road_span) +
                       " minutes, other roads span " + std::to_string(span));
    }
  }
  if (ds.context.size() != n) {
    throw MissingDataError("context covers " + std::to_string(ds.context.size()) + " of " + std::to_string(n) +
                           " roads");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (ds.context[i].size() != ds.series[i].values.size()) {
      throw MissingDataError("road " + std::to_string(i) + ": context has " + std::to_string(ds.context[i].size()) +
                             " rows, series has " + std::to_string(ds.series[i].values.size()));
    }
    if (ds.graph.node(static_cast<int>(i)).road_type >= kRoadTypes) {
      throw ParseError("road " + std::to_string(i) + ": road_type must be < " + std::to_string(kRoadTypes));
    }
  }
}

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_field(std::string_view text, const std::string& where, const char* field) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ParseError(where + ": field " + field + ": cannot parse '" + std::string(text) + "'");
  }
  return value;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

/// Reads CSV rows after the header, checking the header's column names.
template <typename RowFn>
void read_csv(const std::filesystem::path& path, const std::vector<std::string>& columns, RowFn&& on_row) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv(line);
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    if (header) {
      header = false;
      bool match = fields.size() == columns.size();
      for (std::size_t i = 0; match && i < columns.size(); ++i) match = fields[i] == columns[i];
      if (!match) {
        std::string expected;
        for (const auto& c : columns) expected += (expected.empty() ? "" : ",") + c;
        throw ParseError(where + ": header must be '" + expected + "'");
      }
      continue;
    }
    if (fields.size() != columns.size()) {
      throw ParseError(where + ": expected " + std::to_string(columns.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    on_row(fields, where);
  }
  if (header) throw ParseError(path.filename().string() + ": missing header");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Graph file

inline nlohmann::json graph_to_json(const RoadGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& r : g.nodes()) {
    nodes.push_back({{"id", r.id},
                     {"length_m", r.length_m},
                     {"road_type", r.road_type},
                     {"lanes", r.lanes},
                     {"traffic_lights", r.traffic_lights},
                     {"interval_minutes", r.interval_minutes}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : g.edges()) edges.push_back({a, b});
  return {{"nodes", nodes}, {"edges", edges}};
}

inline RoadGraph graph_from_json(const nlohmann::json& j, const std::string& where = "graph") {
  if (!j.is_object() || !j.contains("nodes") || !j.contains("edges")) {
    throw ParseError(where + ": expected an object with 'nodes' and 'edges'");
  }
  std::vector<RoadSegment> nodes;
  std::size_t row = 0;
  for (const auto& n : j.at("nodes")) {
    const std::string at = where + ": nodes[" + std::to_string(row++) + "]";
    auto get = [&](const char* key) -> const nlohmann::json& {
      if (!n.contains(key)) throw ParseError(at + ": missing field " + key);
      const auto& v = n.at(key);
      if (!v.is_number()) throw ParseError(at + ": field " + key + " must be a number");
      return v;
    };
    auto get_int = [&](const char* key) {
      const auto& v = get(key);
      if (!v.is_number_integer()) throw ParseError(at + ": field " + key + " must be an integer");
      return v.get<int>();
    };
    RoadSegment r;
    r.id = get_int("id");
    r.length_m = get("length_m").get<double>();
    r.road_type = get_int("road_type");
    r.lanes = get_int("lanes");
    r.traffic_lights = get_int("traffic_lights");
    r.interval_minutes = get_int("interval_minutes");
    nodes.push_back(r);
  }
  std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<std::pair<int, int>> edges;
  row = 0;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
      throw ParseError(where + ": edges[" + std::to_string(row) + "] must be a pair of node ids");
    }
    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    ++row;
  }
  try {
    return RoadGraph(std::move(nodes), edges);
  } catch (const std::exception& ex) {
    throw ParseError(where + ": " + ex.what());
  }
}

inline RoadGraph read_graph(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(path.filename().string() + ": " + ex.what());
  }
  return graph_from_json(j, path.filename().string());
}

inline void write_graph(const std::filesystem::path& path, const RoadGraph& g) {
  auto out = detail::open_output(path);
  out << graph_to_json(g).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Series and context files

inline std::vector<SpeedSeries> read_series(const std::filesystem::path& path, std::size_t num_roads) {
  std::vector<std::map<std::int64_t, double>> rows(num_roads);
  detail::read_csv(path, {"road_id", "slot_index", "speed_kmh"}, [&](const auto& f, const std::string& where) {
    const int road = detail::parse_field<int>(f[0], where, "road_id");
    const auto slot = detail::parse_field<std::int64_t>(f[1], where, "slot_index");
    const double speed = detail::parse_field<double>(f[2], where, "speed_kmh");
    if (road < 0 || static_cast<std::size_t>(road) >= num_roads) {
      throw ParseError(where + ": field road_id: unknown road " + std::to_string(road));
    }
    if (slot < 0) throw ParseError(where + ": field slot_index: must be >= 0");
    if (!(speed >= 0.0)) throw ParseError(where + ": field speed_kmh: must be >= 0");
    if (!rows[static_cast<std::size_t>(road)].emplace(slot, speed).second) {
      throw ParseError(where + ": duplicate slot " + std::to_string(slot) + " for road " + std::to_string(road));
    }
  });
  std::vector<SpeedSeries> out(num_roads);
  for (std::size_t i = 0; i < num_roads; ++i) {
    out[i].road_id = static_cast<int>(i);
    if (rows[i].empty()) throw MissingDataError("road " + std::to_string(i) + " has no rows in " + path.string());
    std::int64_t expect = 0;
    for (const auto& [slot, v] : rows[i]) {
      if (slot != expect) {
        throw ParseError(path.filename().string() + ": road " + std::to_string(i) + " is missing slot " +
                         std::to_string(expect));
      }
      out[i].values.push_back(v);
      ++expect;
    }
  }
  return out;
}

inline std::vector<std::vector<ContextRow>> read_context(const std::filesystem::path& path, std::size_t num_roads) {
  std::vector<std::map<std::int64_t, ContextRow>> rows(num_roads);
  detail::read_csv(path, {"road_id", "slot_index", "weather_code", "holiday_flag", "day_of_week"},
                   [&](const auto& f, const std::string& where) {
                     const int road = detail::parse_field<int>(f[0], where, "road_id");
                     const auto slot = detail::parse_field<std::int64_t>(f[1], where, "slot_index");
                     ContextRow c;
                     c.weather_code = detail::parse_field<int>(f[2], where, "weather_code");
                     c.holiday_flag = detail::parse_field<int>(f[3], where, "holiday_flag");
                     c.day_of_week = detail::parse_field<int>(f[4], where, "day_of_week");
                     if (road < 0 || static_cast<std::size_t>(road) >= num_roads) {
                       throw ParseError(where + ": field road_id: unknown road " + std::to_string(road));
                     }
                     if (c.weather_code < 0 || c.weather_code >= kWeatherCodes) {
                       throw ParseError(where + ": field weather_code: must lie in [0, " +
                                        std::to_string(kWeatherCodes) + ")");
                     }
                     if (c.holiday_flag != 0 && c.holiday_flag != 1) {
                       throw ParseError(where + ": field holiday_flag: must be 0 or 1");
                     }
                     if (c.day_of_week < 0 || c.day_of_week >= kDaysPerWeek) {
                       throw ParseError(where + ": field day_of_week: must lie in [0, 7)");
                     }
                     if (!rows[static_cast<std::size_t>(road)].emplace(slot, c).second) {
                       throw ParseError(where + ": duplicate slot " + std::to_string(slot) + " for road " +
                                        std::to_string(road));
                     }
                   });
  std::vector<std::vector<ContextRow>> out(num_roads);
  for (std::size_t i = 0; i < num_roads; ++i) {
    std::int64_t expect = 0;
    for (const auto& [slot, c] : rows[i]) {
      if (slot != expect) {
        throw MissingDataError(path.filename().string() + ": road " + std::to_string(i) + " is missing slot " +
                               std::to_string(expect));
      }
      out[i].push_back(c);
      ++expect;
    }
  }
  return out;
}

inline void write_series(const std::filesystem::path& path, const std::vector<SpeedSeries>& series) {
  auto out = detail::open_output(path);
  out << "road_id,slot_index,speed_kmh\n";
  for (const auto& s : series) {
    for (std::size_t t = 0; t < s.values.size(); ++t) {
      out << s.road_id << ',' << t << ',' << format_double(s.values[t]) << '\n';
    }
  }
}

inline void write_context(const std::filesystem::path& path, const std::vector<std::vector<ContextRow>>& ctx) {
  auto out = detail::open_output(path);
  out << "road_id,slot_index,weather_code,holiday_flag,day_of_week\n";
  for (std::size_t r = 0; r < ctx.size(); ++r) {
    for (std::size_t t = 0; t < ctx[r].size(); ++t) {
      const auto& c = ctx[r][t];
      out << r << ',' << t << ',' << c.weather_code << ',' << c.holiday_flag << ',' << c.day_of_week << '\n';
    }
  }
}

inline Dataset load_dataset(const std::filesystem::path& graph_path, const std::filesystem::path& series_path,
                            const std::filesystem::path& context_path) {
  Dataset ds;
  ds.graph = read_graph(graph_path);
  ds.series = read_series(series_path, ds.graph.size());
  ds.context = read_context(context_path, ds.graph.size());
  validate_dataset(ds);
  return ds;
}

struct DatasetPaths {
  std::filesystem::path graph, series, context;

  static DatasetPaths in(const std::filesystem::path& dir) {
    return {dir / "graph.json", dir / "series.csv", dir / "context.csv"};
  }
};

inline void write_dataset(const DatasetPaths& paths, const Dataset& ds) {
  write_graph(paths.graph, ds.graph);
  write_series(paths.series, ds.series);
  write_context(paths.context, ds.context);
}

}  // namespace mcan
