#pragma once

// The full network: three spatial channels (speed / trend / deviation), three
// temporal branches (recent / daily / weekly), two context encoders, an
// attention fusion over all enabled component vectors, and the output head.

#include "mcan/config.hpp"
#include "mcan/features.hpp"
#include "mcan/hsc.hpp"
#include "mcan/layers.hpp"

#include <array>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

class McanModel {
 public:
  McanModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const auto& a = cfg_.ablation;
    HscConfig hc;
    hc.width = cfg_.width;
    hc.hops = cfg_.hops;
    hc.filters = cfg_.filters;
    hc.cpa_order = cfg_.cpa_order;
    hc.gcn_order = cfg_.gcn_order;
    hc.hidden = cfg_.hidden;
    hc.lstm_layers = cfg_.lstm_layers;
    hc.fnn_layers = cfg_.fnn_layers;
    hc.horizon = cfg_.horizon;
    hc.use_embedding = !a.nemb;
    const std::vector<int> feature_widths(static_cast<std::size_t>(cfg_.fnn_layers), cfg_.hidden);
    const bool enabled[3] = {true, !a.ntr, !a.nde};
    for (int ch = 0; ch < 3; ++ch) {
      if (!enabled[ch]) continue;
      const auto c = static_cast<Channel>(ch);
      const std::string name = std::string("hsc_") + channel_name(c);
      hsc_[static_cast<std::size_t>(ch)] = HscParams::create(params_, name, c, hc, rng);
      const int extra = c == Channel::Speed ? 0 : 1;
      msc_head_[static_cast<std::size_t>(ch)] =
          FnnParams::create(params_, std::string("msc_") + channel_name(c), cfg_.horizon + extra, feature_widths,
                            Activation::Identity, rng);
    }
    recent_ = LstmParams::create(params_, "mtc_recent", 4, cfg_.hidden, cfg_.lstm_layers, rng);
    if (!a.nd) daily_ = LstmParams::create(params_, "mtc_daily", 3, cfg_.hidden, cfg_.lstm_layers, rng);
    if (!a.nw) weekly_ = LstmParams::create(params_, "mtc_weekly", 3, cfg_.hidden, cfg_.lstm_layers, rng);
    context_static_ =
        FnnParams::create(params_, "context_static", kStaticFeatureWidth, feature_widths, Activation::Identity, rng);
    context_dynamic_ =
        LstmParams::create(params_, "context_dynamic", kDynamicFeatureWidth, cfg_.hidden, cfg_.lstm_layers, rng);
    fusion_ = AttentionParams::create(params_, "fusion", cfg_.hidden, cfg_.fusion_width, rng);
    std::vector<int> out_widths(static_cast<std::size_t>(cfg_.fnn_layers - 1), cfg_.hidden);
    out_widths.push_back(cfg_.horizon);
    output_head_ = FnnParams::create(params_, "output_head", cfg_.fusion_width, out_widths, Activation::Identity, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  const std::optional<HscParams>& hsc(Channel c) const { return hsc_[static_cast<std::size_t>(c)]; }
  const std::optional<FnnParams>& msc_head(Channel c) const { return msc_head_[static_cast<std::size_t>(c)]; }
  const LstmParams& recent() const { return recent_; }
  const std::optional<LstmParams>& daily() const { return daily_; }
  const std::optional<LstmParams>& weekly() const { return weekly_; }
  const FnnParams& context_static() const { return context_static_; }
  const LstmParams& context_dynamic() const { return context_dynamic_; }
  const AttentionParams& fusion() const { return fusion_; }
  const FnnParams& output_head() const { return output_head_; }

  /// Number of vectors entering the attention fusion.
  int component_count() const {
    int n = 2 + 1;  // two context summaries + recent branch
    for (const auto& h : hsc_) n += h.has_value() ? 1 : 0;
    n += daily_ ? 1 : 0;
    n += weekly_ ? 1 : 0;
    return n;
  }

 private:
  ModelConfig cfg_;
  ParamSet params_;
  std::array<std::optional<HscParams>, 3> hsc_;
  std::array<std::optional<FnnParams>, 3> msc_head_;
  LstmParams recent_;
  std::optional<LstmParams> daily_;
  std::optional<LstmParams> weekly_;
  FnnParams context_static_;
  LstmParams context_dynamic_;
  AttentionParams fusion_;
  FnnParams output_head_;
};

struct ChannelFeature {
  Channel channel;
  Var feature;     // (hidden x 1), fusion component
  Var prediction;  // (H x 1), raw channel prediction of the HSC model
};

/// Spatial channels. Trend features see the previous speed, deviation
/// features see the slot's historical average, speed features see only the
/// HSC output.
inline std::vector<ChannelFeature> msc_forward(const ForwardContext& ctx, const McanModel& m, const SampleInputs& in) {
  std::vector<ChannelFeature> out;
  for (int ch = 0; ch < 3; ++ch) {
    const auto c = static_cast<Channel>(ch);
    const auto& hp = m.hsc(c);
    if (!hp) continue;
    auto h = hsc_forward(ctx, *hp, in.hsc[static_cast<std::size_t>(ch)]);
    Var x = h.prediction;
    if (c == Channel::Trend) x = ad::concat({x, ctx.tape.constant(ad::scalar_mat(in.last_speed), "last_speed")});
    if (c == Channel::Deviation) {
      x = ad::concat({x, ctx.tape.constant(ad::scalar_mat(in.slot_average), "slot_average")});
    }
    out.push_back({c, fnn_forward(ctx, *m.msc_head(c), x), h.prediction});
  }
  return out;
}

/// Temporal branches; the recent window must hold lr rows of
/// (speed, trend, deviation, average) and the periodic windows ld / lw rows
/// of (speed, trend, deviation).
inline std::vector<Var> mtc_forward(const ForwardContext& ctx, const McanModel& m, const TemporalInputs& in) {
  const auto& cfg = m.config();
  auto check = [](const char* branch, std::size_t got, int want) {
    if (got != static_cast<std::size_t>(want)) {
      throw ad::ShapeError(std::string("mtc: ") + branch + " window has " + std::to_string(got) +
                           " steps, expected " + std::to_string(want));
    }
  };
  check("recent", in.rs.size(), cfg.recent);
  if (in.rt.size() != in.rs.size() || in.rd.size() != in.rs.size() || in.ra.size() != in.rs.size()) {
    throw ad::ShapeError("mtc: recent feature columns differ in length");
  }
  std::vector<Var> out;
  Mat recent(cfg.recent, 4);
  for (int k = 0; k < cfg.recent; ++k) {
    const auto i = static_cast<std::size_t>(k);
    recent.row(k) << in.rs[i], in.rt[i], in.rd[i], in.ra[i];
  }
  out.push_back(lstm_sequence(ctx, m.recent(), sequence_constants(ctx.tape, recent)));
  auto periodic = [&](const char* branch, const std::vector<double>& s, const std::vector<double>& t,
                      const std::vector<double>& d, int want, const LstmParams& p) {
    check(branch, s.size(), want);
    if (t.size() != s.size() || d.size() != s.size()) {
      throw ad::ShapeError(std::string("mtc: ") + branch + " feature columns differ in length");
    }
    Mat rows(want, 3);
    for (int k = 0; k < want; ++k) {
      const auto i = static_cast<std::size_t>(k);
      rows.row(k) << s[i], t[i], d[i];
    }
    out.push_back(lstm_sequence(ctx, p, sequence_constants(ctx.tape, rows)));
  };
  if (m.daily()) periodic("daily", in.ds, in.dt, in.dd, cfg.daily, *m.daily());
  if (m.weekly()) periodic("weekly", in.ws, in.wt, in.wd, cfg.weekly, *m.weekly());
  return out;
}

struct ContextSummary {
  Var static_summary;
  Var dynamic_summary;
};

inline ContextSummary context_forward(const ForwardContext& ctx, const McanModel& m,
                                      const std::vector<double>& static_x, const Mat& dynamic_x) {
  if (dynamic_x.rows() < 1) throw std::invalid_argument("context: dynamic sequence is empty");
  if (dynamic_x.cols() != kDynamicFeatureWidth) {
    throw ad::ShapeError("context: dynamic rows have width " + std::to_string(dynamic_x.cols()) + ", expected " +
                         std::to_string(kDynamicFeatureWidth));
  }
  ContextSummary s;
  s.static_summary = fnn_forward(ctx, m.context_static(), ctx.tape.constant(ad::column(static_x), "static_x"));
  s.dynamic_summary = lstm_sequence(ctx, m.context_dynamic(), sequence_constants(ctx.tape, dynamic_x));
  return s;
}

struct PredictionBundle {
  Var speed;                     // (H x 1)
  std::optional<Var> trend;      // HSC trend prediction (H x 1)
  std::optional<Var> deviation;  // HSC deviation prediction (H x 1)
  Var attention_weights;         // (1 x components)
  int components = 0;
};

inline PredictionBundle mcan_forward(const ForwardContext& ctx, const McanModel& m, const SampleInputs& in) {
  PredictionBundle b;
  std::vector<Var> components;
  for (const auto& f : msc_forward(ctx, m, in)) {
    components.push_back(f.feature);
    if (f.channel == Channel::Trend) b.trend = f.prediction;
    if (f.channel == Channel::Deviation) b.deviation = f.prediction;
  }
  for (const auto& v : mtc_forward(ctx, m, in.temporal)) components.push_back(v);
  auto cs = context_forward(ctx, m, in.static_x, in.dynamic_x);
  components.push_back(cs.static_summary);
  components.push_back(cs.dynamic_summary);
  auto fused = attention_fuse(ctx, m.fusion(), components);
  b.speed = fnn_forward(ctx, m.output_head(), ctx.drop(fused.fused));
  b.attention_weights = fused.weights;
  b.components = static_cast<int>(components.size());
  return b;
}

/// sum |speed - y|^2 + alpha |trend - y_tr|^2 + beta |dev - y_de|^2, with the
/// auxiliary terms read from the first horizon step. Absent channels drop
/// their term.
inline Var mcan_loss(const PredictionBundle& b, const SampleTargets& truth, double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("loss: alpha and beta must be >= 0");
  Tape& tape = *b.speed.tape();
  if (static_cast<std::size_t>(b.speed.rows()) != truth.speed.size()) {
    throw ad::ShapeError("loss: speed prediction has " + std::to_string(b.speed.rows()) + " steps, truth has " +
                         std::to_string(truth.speed.size()));
  }
  Var loss = ad::sum(ad::square(ad::sub(b.speed, tape.constant(ad::column(truth.speed), "speed_target"))));
  auto aux = [&](const std::optional<Var>& pred, double target, double weight) {
    if (!pred || weight == 0.0) return;
    Var first = ad::slice(*pred, 0, 1);
    Var r = ad::sub(first, tape.constant(ad::scalar_mat(target), "aux_target"));
    loss = ad::add(loss, ad::scale(ad::sum(ad::square(r)), weight));
  };
  aux(b.trend, truth.trend, alpha);
  aux(b.deviation, truth.deviation, beta);
  return loss;
}

}  // namespace mcan
