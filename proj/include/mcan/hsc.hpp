#pragma once

// Heterogeneous spatial correlation model for one measurement channel.
//
// 1. Embedding: a window of L raw observations is spread over a length-c
//    vector at positions j = m * (sn + 1), sn = floor((c - L) / (L - 1));
//    the remaining positions are filled by a learnable Chebyshev
//    approximation evaluated at j / c (mapped onto [-1, 1]).
// 2. Graph convolution: for every neighbour r_j at hop k of the target r_i,
//    u_ij = sigmoid(e_i' M e_j) and the hop feature is
//    h_ik = sum_j sum_l z_l T_l(2 u_ij - 1), one value per filter.
// 3. One LSTM over the hop features (hop index as the sequence axis), one
//    over the target's raw window; their final states are concatenated and
//    mapped by an FNN to a horizon-length channel prediction.

#include "mcan/graph.hpp"
#include "mcan/layers.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

enum class Channel { Speed = 0, Trend = 1, Deviation = 2 };

inline const char* channel_name(Channel c) {
  switch (c) {
    case Channel::Speed:
      return "speed";
    case Channel::Trend:
      return "trend";
    case Channel::Deviation:
      return "deviation";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Embedding

/// Gap between consecutive raw observations. Undefined for L = 1, where the
/// single value goes to position 0.
inline int embedding_gap(int length, int width) {
  if (length < 1) throw std::invalid_argument("embedding: input window is empty");
  if (length > width) {
    throw std::invalid_argument("embedding: input length " + std::to_string(length) + " exceeds embedding width " +
                                std::to_string(width));
  }
  return length == 1 ? 0 : (width - length) / (length - 1);
}

/// Raw positions m * (sn + 1) for m = 0..L-1.
inline std::vector<int> embedding_positions(int length, int width) {
  const int sn = embedding_gap(length, width);
  std::vector<int> pos(static_cast<std::size_t>(length));
  for (int m = 0; m < length; ++m) pos[static_cast<std::size_t>(m)] = m * (sn + 1);
  return pos;
}

struct EmbeddedVector {
  Var values;                      // (c x 1)
  std::vector<bool> filled_mask;   // true where the value is a raw observation
  std::vector<int> raw_positions;  // position of raw element m
};

/// Replace-and-fill embedding of x (L x 1) into length c.
inline EmbeddedVector embed_series(const ForwardContext& ctx, Var x, int width, const CpaParams& cpa) {
  if (x.cols() != 1) throw ad::ShapeError("embed_series: input must be a column vector");
  const int length = static_cast<int>(x.rows());
  EmbeddedVector out;
  out.raw_positions = embedding_positions(length, width);
  out.filled_mask.assign(static_cast<std::size_t>(width), false);
  Mat place = Mat::Zero(width, length);
  for (int m = 0; m < length; ++m) {
    const int j = out.raw_positions[static_cast<std::size_t>(m)];
    place(j, m) = 1.0;
    out.filled_mask[static_cast<std::size_t>(j)] = true;
  }
  Var e = ad::matmul(ctx.tape.constant(std::move(place), "placement"), x);
  if (length < width) {
    Mat basis = Mat::Zero(width, cpa.order);
    for (int j = 0; j < width; ++j) {
      if (out.filled_mask[static_cast<std::size_t>(j)]) continue;
      const auto t = chebyshev_basis(to_chebyshev_domain(static_cast<double>(j) / width), cpa.order);
      for (int l = 0; l < cpa.order; ++l) basis(j, l) = t[static_cast<std::size_t>(l)];
    }
    e = ad::add(e, ad::matmul(ctx.tape.constant(std::move(basis), "cpa_basis"), ctx.p(cpa.coefficients)));
  }
  out.values = e;
  return out;
}

/// Embedding used when the replace/CPA step is ablated: every grid position
/// copies the raw observation closest to it in time.
inline EmbeddedVector embed_nearest(const ForwardContext& ctx, Var x, int width) {
  const int length = static_cast<int>(x.rows());
  embedding_gap(length, width);
  EmbeddedVector out;
  out.filled_mask.assign(static_cast<std::size_t>(width), true);
  Mat copy = Mat::Zero(width, length);
  for (int j = 0; j < width; ++j) {
    const double pos = static_cast<double>(j) * length / width;
    const int m = std::min(length - 1, static_cast<int>(std::lround(pos)));
    copy(j, m) = 1.0;
  }
  for (int m = 0; m < length; ++m) out.raw_positions.push_back(static_cast<int>(std::lround(static_cast<double>(m) * width / length)));
  out.values = ad::matmul(ctx.tape.constant(std::move(copy), "nearest_copy"), x);
  return out;
}

// ---------------------------------------------------------------------------
// Graph convolution

struct GcnParams {
  int correlation = -1;   // M_1..M_F side by side: (c x F*c)
  int coefficients = -1;  // z: (F x K_GCN)
  int width = 0;          // c
  int filters = 1;        // F
  int order = 5;          // K_GCN
  int hops = 1;           // h

  template <typename Rng>
  static GcnParams create(ParamSet& params, const std::string& prefix, int width, int filters, int order, int hops,
                          Rng& rng) {
    if (width < 1 || filters < 1 || order < 1 || hops < 1) {
      throw std::invalid_argument("GcnParams: width, filters, order and hops must be positive");
    }
    GcnParams g;
    g.width = width;
    g.filters = filters;
    g.order = order;
    g.hops = hops;
    Mat m(width, filters * width);
    for (int f = 0; f < filters; ++f) m.middleCols(f * width, width) = ad::xavier_uniform(width, width, rng);
    g.correlation = params.add(prefix + ".M", std::move(m));
    g.coefficients = params.add(prefix + ".z", ad::xavier_uniform(filters, order, rng));
    return g;
  }
};

/// Hop features <h_1, ..., h_h>, each (F x 1). hop_embeddings[k] holds the
/// embeddings of the roads in N_{k+1}; an empty hop yields zeros.
inline std::vector<Var> gcn_hop_features(const ForwardContext& ctx, const GcnParams& p, Var target,
                                         const std::vector<std::vector<Var>>& hop_embeddings) {
  if (target.rows() != p.width || target.cols() != 1) {
    throw ad::ShapeError("gcn: target embedding " + ad::shape_str(target.value()) + " does not have length " +
                         std::to_string(p.width));
  }
  // Row f of `left` is e_i' M_f.
  Var left = ad::reshape(ad::matmul(ad::transpose(target), ctx.p(p.correlation)), p.filters, p.width);
  Var z = ctx.p(p.coefficients);
  std::vector<Var> features;
  for (const auto& hop : hop_embeddings) {
    if (hop.empty()) {
      features.push_back(ctx.tape.constant(Mat::Zero(p.filters, 1), "empty_hop"));
      continue;
    }
    Var stacked = ad::hcat(hop);                     // c x n
    Var u = ad::sigmoid(ad::matmul(left, stacked));  // F x n
    Var arg = ad::add_scalar(ad::scale(u, 2.0), -1.0);
    auto terms = chebyshev_terms(arg, p.order);
    std::vector<Var> sums;
    sums.reserve(terms.size());
    for (const auto& t : terms) sums.push_back(ad::row_sums(t));  // sum over neighbours
    features.push_back(ad::row_sums(ad::mul(z, ad::hcat(sums))));
  }
  return features;
}

/// Graph-level wrapper: looks up N_1..N_h of `target` and their embeddings.
inline std::vector<Var> gcn_aggregate(const ForwardContext& ctx, const GcnParams& p, const RoadGraph& graph,
                                      const std::map<int, Var>& embeddings, int target) {
  const auto rings = graph.k_hop_neighbors(target, p.hops);
  auto lookup = [&](int road) {
    auto it = embeddings.find(road);
    if (it == embeddings.end()) throw std::out_of_range("gcn: missing embedding for road " + std::to_string(road));
    return it->second;
  };
  std::vector<std::vector<Var>> hops;
  for (const auto& ring : rings) {
    std::vector<Var> h;
    for (int r : ring) h.push_back(lookup(r));
    hops.push_back(std::move(h));
  }
  return gcn_hop_features(ctx, p, lookup(target), hops);
}

// ---------------------------------------------------------------------------
// HSC

struct HscConfig {
  int width = 12;  // c
  int hops = 2;
  int filters = 8;
  int cpa_order = 5;
  int gcn_order = 5;
  int hidden = 36;
  int lstm_layers = 3;
  int fnn_layers = 3;
  int horizon = 1;
  bool use_embedding = true;  // false: nearest-in-time copy instead of replace + CPA
};

struct HscParams {
  Channel channel = Channel::Speed;
  HscConfig config;
  std::optional<CpaParams> cpa;
  GcnParams gcn;
  LstmParams lstm_self;
  LstmParams lstm_neigh;
  FnnParams head;

  template <typename Rng>
  static HscParams create(ParamSet& params, const std::string& prefix, Channel channel, const HscConfig& cfg,
                          Rng& rng) {
    HscParams h;
    h.channel = channel;
    h.config = cfg;
    if (cfg.use_embedding) h.cpa = CpaParams::create(params, prefix + ".cpa", cfg.cpa_order, rng);
    h.gcn = GcnParams::create(params, prefix + ".gcn", cfg.width, cfg.filters, cfg.gcn_order, cfg.hops, rng);
    h.lstm_self = LstmParams::create(params, prefix + ".lstm_self", 1, cfg.hidden, cfg.lstm_layers, rng);
    h.lstm_neigh = LstmParams::create(params, prefix + ".lstm_neigh", cfg.filters, cfg.hidden, cfg.lstm_layers, rng);
    std::vector<int> widths(static_cast<std::size_t>(std::max(0, cfg.fnn_layers - 1)), cfg.hidden);
    widths.push_back(cfg.horizon);
    h.head = FnnParams::create(params, prefix + ".head", 2 * cfg.hidden, widths, Activation::Identity, rng);
    return h;
  }
};

/// Channel windows for one prediction: the target's window and those of its
/// 1..h-hop neighbours, each ordered oldest first.
struct HscInputs {
  int target = 0;
  std::vector<std::vector<int>> rings;         // N_1..N_h
  std::map<int, std::vector<double>> windows;  // road id -> window
};

struct HscOutput {
  Var prediction;  // (H x 1)
  std::vector<Var> hop_features;
  Var h_self;
  Var h_neigh;
};

inline HscOutput hsc_forward(const ForwardContext& ctx, const HscParams& p, const HscInputs& in) {
  const int c = p.config.width;
  std::map<int, Var> embedded;
  auto embed = [&](int road) -> Var {
    auto it = embedded.find(road);
    if (it != embedded.end()) return it->second;
    auto w = in.windows.find(road);
    if (w == in.windows.end() || w->second.empty()) {
      throw std::out_of_range("hsc: missing window for road " + std::to_string(road));
    }
    Var x = ctx.tape.constant(ad::column(w->second), "window");
    Var e = p.cpa ? embed_series(ctx, x, c, *p.cpa).values : embed_nearest(ctx, x, c).values;
    embedded.emplace(road, e);
    return e;
  };
  if (static_cast<int>(in.rings.size()) != p.gcn.hops) {
    throw std::invalid_argument("hsc: expected " + std::to_string(p.gcn.hops) + " neighbour rings, got " +
                                std::to_string(in.rings.size()));
  }
  Var target = embed(in.target);
  std::vector<std::vector<Var>> hops;
  for (const auto& ring : in.rings) {
    std::vector<Var> h;
    for (int r : ring) h.push_back(embed(r));
    hops.push_back(std::move(h));
  }
  HscOutput out;
  out.hop_features = gcn_hop_features(ctx, p.gcn, target, hops);
  out.h_neigh = lstm_sequence(ctx, p.lstm_neigh, out.hop_features);

  const auto& self = in.windows.at(in.target);
  std::vector<Var> seq;
  seq.reserve(self.size());
  for (double v : self) seq.push_back(ctx.tape.constant(ad::scalar_mat(v), "input"));
  out.h_self = lstm_sequence(ctx, p.lstm_self, seq);
  out.prediction = fnn_forward(ctx, p.head, ad::concat({out.h_neigh, out.h_self}));
  return out;
}

}  // namespace mcan
