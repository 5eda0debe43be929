#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcan {

inline constexpr int kMinutesPerDay = 1440;
inline constexpr int kDaysPerWeek = 7;

struct RoadSegment {
  int id = 0;
  double length_m = 0.0;
  int road_type = 0;
  int lanes = 1;
  int traffic_lights = 0;
  int interval_minutes = 5;

  /// Observation slots per day (T^d).
  int slots_per_day() const { return kMinutesPerDay / interval_minutes; }
  /// Observation slots per week (T^w).
  int slots_per_week() const { return kDaysPerWeek * slots_per_day(); }
};

inline void validate_segment(const RoadSegment& s) {
  if (s.interval_minutes <= 0 || kMinutesPerDay % s.interval_minutes != 0) {
    throw std::invalid_argument("road " + std::to_string(s.id) + ": interval_minutes " +
                                std::to_string(s.interval_minutes) + " must be positive and divide 1440");
  }
  if (s.length_m < 0.0 || s.lanes < 0 || s.traffic_lights < 0 || s.road_type < 0) {
    throw std::invalid_argument("road " + std::to_string(s.id) + ": negative static attribute");
  }
}

/// Undirected road graph. Node ids are dense in [0, N).
class RoadGraph {
 public:
  RoadGraph() = default;

  RoadGraph(std::vector<RoadSegment> nodes, const std::vector<std::pair<int, int>>& edges)
      : nodes_(std::move(nodes)), adjacency_(nodes_.size()) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].id != static_cast<int>(i)) {
        throw std::invalid_argument("node ids must be unique and dense in [0, N): position " + std::to_string(i) +
                                    " holds id " + std::to_string(nodes_[i].id));
      }
      validate_segment(nodes_[i]);
    }
    for (const auto& [a, b] : edges) add_edge(a, b);
  }

  std::size_t size() const { return nodes_.size(); }
  const RoadSegment& node(int id) const { return nodes_.at(checked(id)); }
  const std::vector<RoadSegment>& nodes() const { return nodes_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int id) const { return adjacency_.at(checked(id)); }

  void add_edge(int a, int b) {
    checked(a);
    checked(b);
    if (a == b) throw std::invalid_argument("self-loop edge on node " + std::to_string(a));
    const auto key = std::minmax(a, b);
    for (const auto& e : edges_) {
      if (e == std::pair<int, int>(key.first, key.second)) {
        throw std::invalid_argument("duplicate edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");
      }
    }
    edges_.emplace_back(key.first, key.second);
    auto insert_sorted = [](std::vector<int>& v, int x) { v.insert(std::lower_bound(v.begin(), v.end(), x), x); };
    insert_sorted(adjacency_[static_cast<std::size_t>(a)], b);
    insert_sorted(adjacency_[static_cast<std::size_t>(b)], a);
  }

  /// N_1..N_h: nodes at shortest-path distance exactly k from `node`, each
  /// sorted ascending. The target itself never appears.
  std::vector<std::vector<int>> k_hop_neighbors(int node, int hops) const {
    checked(node);
    if (hops < 1) throw std::invalid_argument("k_hop_neighbors: hop count must be >= 1");
    std::vector<int> dist(nodes_.size(), -1);
    std::vector<std::vector<int>> rings(static_cast<std::size_t>(hops));
    std::deque<int> queue{node};
    dist[static_cast<std::size_t>(node)] = 0;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      const int du = dist[static_cast<std::size_t>(u)];
      if (du == hops) continue;
      for (int v : adjacency_[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(v)] >= 0) continue;
        dist[static_cast<std::size_t>(v)] = du + 1;
        rings[static_cast<std::size_t>(du)].push_back(v);
        queue.push_back(v);
      }
    }
    for (auto& r : rings) std::sort(r.begin(), r.end());
    return rings;
  }

 private:
  std::size_t checked(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
      throw std::out_of_range("invalid node id " + std::to_string(id) + " (graph has " +
                              std::to_string(nodes_.size()) + " nodes)");
    }
    return static_cast<std::size_t>(id);
  }

  std::vector<RoadSegment> nodes_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adjacency_;
};

}  // namespace mcan
