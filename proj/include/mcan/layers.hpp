#pragma once

// Differentiable building blocks shared by the spatial, temporal and fusion
// parts of the model. Every layer is a set of indices into a ParamSet plus a
// pure forward function over a Tape.

#include "mcan/autodiff.hpp"
#include "mcan/optim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

using ad::Mat;
using ad::ParamSet;
using ad::Tape;
using ad::Var;

/// Everything a forward pass needs besides its inputs.
struct ForwardContext {
  Tape& tape;
  const ParamSet& params;
  bool training = false;
  double dropout_rate = 0.0;
  std::mt19937_64* rng = nullptr;

  Var p(int index) const { return tape.param(params, index); }

  Var drop(Var x) const {
    if (!training || dropout_rate == 0.0) return x;
    if (rng == nullptr) throw std::logic_error("ForwardContext: training-mode dropout needs an rng");
    return ad::dropout(x, dropout_rate, true, *rng);
  }
};

// ---------------------------------------------------------------------------
// Chebyshev polynomials

/// First-kind Chebyshev values [T_1(x), ..., T_K(x)]. x is clamped to [-1, 1].
inline std::vector<double> chebyshev_basis(double x, int order) {
  if (order < 1) throw std::invalid_argument("chebyshev_basis: order must be >= 1");
  x = std::clamp(x, -1.0, 1.0);
  std::vector<double> t(static_cast<std::size_t>(order));
  double prev = 1.0;  // T_0
  double cur = x;     // T_1
  t[0] = cur;
  for (int l = 2; l <= order; ++l) {
    const double next = 2.0 * x * cur - prev;
    prev = cur;
    cur = next;
    t[static_cast<std::size_t>(l - 1)] = cur;
  }
  return t;
}

/// Affine map of [0, 1] onto the Chebyshev domain [-1, 1].
inline double to_chebyshev_domain(double unit) { return 2.0 * unit - 1.0; }

/// Elementwise T_1..T_K of a differentiable argument already in [-1, 1].
inline std::vector<Var> chebyshev_terms(Var x, int order) {
  if (order < 1) throw std::invalid_argument("chebyshev_terms: order must be >= 1");
  std::vector<Var> terms;
  terms.reserve(static_cast<std::size_t>(order));
  terms.push_back(x);
  if (order >= 2) terms.push_back(add_scalar(scale(ad::square(x), 2.0), -1.0));
  for (int l = 3; l <= order; ++l) {
    Var two_x_prev = scale(ad::mul(x, terms[static_cast<std::size_t>(l - 2)]), 2.0);
    terms.push_back(ad::sub(two_x_prev, terms[static_cast<std::size_t>(l - 3)]));
  }
  return terms;
}

// ---------------------------------------------------------------------------
// Learnable Chebyshev polynomial approximation

struct CpaParams {
  int coefficients = -1;  // (K x 1)
  int order = 0;

  template <typename Rng>
  static CpaParams create(ParamSet& params, const std::string& prefix, int order, Rng& rng) {
    if (order < 1) throw std::invalid_argument("CpaParams: order must be >= 1");
    CpaParams c;
    c.order = order;
    c.coefficients = params.add(prefix + ".v", ad::xavier_uniform(order, 1, rng));
    return c;
  }
};

/// sum_l v_l T_l(x) for x in the Chebyshev domain (clamped).
inline Var cpa_eval(const ForwardContext& ctx, const CpaParams& cpa, double x) {
  const auto basis = chebyshev_basis(x, cpa.order);
  Mat row(1, cpa.order);
  for (int l = 0; l < cpa.order; ++l) row(0, l) = basis[static_cast<std::size_t>(l)];
  return ad::matmul(ctx.tape.constant(std::move(row)), ctx.p(cpa.coefficients));
}

// ---------------------------------------------------------------------------
// LSTM

struct LstmLayerParams {
  int w_ix = -1, w_ih = -1, w_fx = -1, w_fh = -1, w_ox = -1, w_oh = -1, w_cx = -1, w_ch = -1;
  int b_i = -1, b_f = -1, b_o = -1, b_c = -1;
  int input_size = 0;
  int hidden_size = 0;

  template <typename Rng>
  static LstmLayerParams create(ParamSet& params, const std::string& prefix, int input, int hidden, Rng& rng) {
    LstmLayerParams l;
    l.input_size = input;
    l.hidden_size = hidden;
    auto wx = [&](const char* n) { return params.add(prefix + "." + n, ad::xavier_uniform(hidden, input, rng)); };
    auto wh = [&](const char* n) { return params.add(prefix + "." + n, ad::xavier_uniform(hidden, hidden, rng)); };
    auto b = [&](const char* n) { return params.add(prefix + "." + n, Mat::Zero(hidden, 1)); };
    l.w_ix = wx("W_ix");
    l.w_ih = wh("W_ih");
    l.w_fx = wx("W_fx");
    l.w_fh = wh("W_fh");
    l.w_ox = wx("W_ox");
    l.w_oh = wh("W_oh");
    l.w_cx = wx("W_Cx");
    l.w_ch = wh("W_Ch");
    l.b_i = b("b_i");
    l.b_f = b("b_f");
    l.b_o = b("b_o");
    l.b_c = b("b_C");
    return l;
  }
};

struct LstmParams {
  std::vector<LstmLayerParams> layers;

  int input_size() const { return layers.front().input_size; }
  int hidden_size() const { return layers.back().hidden_size; }

  template <typename Rng>
  static LstmParams create(ParamSet& params, const std::string& prefix, int input, int hidden, int num_layers,
                           Rng& rng) {
    if (input < 1 || hidden < 1 || num_layers < 1) {
      throw std::invalid_argument("LstmParams: sizes and layer count must be positive (" + prefix + ")");
    }
    LstmParams p;
    for (int k = 0; k < num_layers; ++k) {
      p.layers.push_back(
          LstmLayerParams::create(params, prefix + ".l" + std::to_string(k), k == 0 ? input : hidden, hidden, rng));
    }
    return p;
  }
};

struct LstmState {
  Var h;
  Var c;
};

/// One step of the gated cell:
///   i = s(W_ix x + W_ih h + b_i), f = s(W_fx x + W_fh h + b_f),
///   o = s(W_ox x + W_oh h + b_o), C~ = tanh(W_Cx x + W_Ch h + b_C),
///   C = i * C~ + f * C_prev,      h = o * tanh(C).
inline LstmState lstm_step(const ForwardContext& ctx, const LstmLayerParams& p, Var x, Var h_prev, Var c_prev) {
  if (x.rows() != p.input_size || x.cols() != 1) {
    throw ad::ShapeError("lstm_step: input " + ad::shape_str(x.value()) + " does not match input size " +
                         std::to_string(p.input_size));
  }
  if (h_prev.rows() != p.hidden_size || c_prev.rows() != p.hidden_size) {
    throw ad::ShapeError("lstm_step: state size does not match hidden size " + std::to_string(p.hidden_size));
  }
  Var i = ad::sigmoid(ad::affine2(ctx.p(p.w_ix), x, ctx.p(p.w_ih), h_prev, ctx.p(p.b_i)));
  Var f = ad::sigmoid(ad::affine2(ctx.p(p.w_fx), x, ctx.p(p.w_fh), h_prev, ctx.p(p.b_f)));
  Var o = ad::sigmoid(ad::affine2(ctx.p(p.w_ox), x, ctx.p(p.w_oh), h_prev, ctx.p(p.b_o)));
  Var cand = ad::tanh(ad::affine2(ctx.p(p.w_cx), x, ctx.p(p.w_ch), h_prev, ctx.p(p.b_c)));
  Var c = ad::add(ad::mul(i, cand), ad::mul(f, c_prev));
  Var h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

/// Runs the stack over the sequence from a zero state and returns the top
/// layer's hidden vector after the last step.
inline Var lstm_sequence(const ForwardContext& ctx, const LstmParams& p, const std::vector<Var>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("lstm_sequence: empty input sequence");
  std::vector<Var> seq = inputs;
  for (const auto& layer : p.layers) {
    Var h = ctx.tape.constant(Mat::Zero(layer.hidden_size, 1), "zero_state");
    Var c = h;
    std::vector<Var> out;
    out.reserve(seq.size());
    for (const auto& x : seq) {
      auto s = lstm_step(ctx, layer, x, h, c);
      h = s.h;
      c = s.c;
      out.push_back(h);
    }
    seq = std::move(out);
  }
  return seq.back();
}

/// Sequence of scalars or feature rows as LSTM inputs. Row k of `rows` is
/// step k.
inline std::vector<Var> sequence_constants(Tape& tape, const Mat& rows) {
  std::vector<Var> seq;
  seq.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) seq.push_back(tape.constant(rows.row(r).transpose(), "input"));
  return seq;
}

// ---------------------------------------------------------------------------
// Fully connected network

enum class Activation { Identity, Sigmoid };

struct FnnLayer {
  int weight = -1;
  int bias = -1;
  Activation activation = Activation::Sigmoid;
  int in = 0;
  int out = 0;
};

struct FnnParams {
  std::vector<FnnLayer> layers;

  int input_size() const { return layers.front().in; }
  int output_size() const { return layers.back().out; }

  /// Layers of the given widths; hidden layers use sigmoid, the last layer
  /// uses `last`.
  template <typename Rng>
  static FnnParams create(ParamSet& params, const std::string& prefix, int input, const std::vector<int>& widths,
                          Activation last, Rng& rng) {
    if (widths.empty()) throw std::invalid_argument("FnnParams: at least one layer required (" + prefix + ")");
    FnnParams f;
    int in = input;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      FnnLayer l;
      l.in = in;
      l.out = widths[k];
      l.activation = k + 1 == widths.size() ? last : Activation::Sigmoid;
      l.weight = params.add(prefix + ".W" + std::to_string(k), ad::xavier_uniform(l.out, l.in, rng));
      l.bias = params.add(prefix + ".b" + std::to_string(k), Mat::Zero(l.out, 1));
      f.layers.push_back(l);
      in = l.out;
    }
    return f;
  }
};

/// Chained affine + activation. Dropout (training only) follows every layer
/// except the last.
inline Var fnn_forward(const ForwardContext& ctx, const FnnParams& p, Var x) {
  if (x.rows() != p.input_size() || x.cols() != 1) {
    throw ad::ShapeError("fnn_forward: input " + ad::shape_str(x.value()) + " does not match input width " +
                         std::to_string(p.input_size()));
  }
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    const auto& l = p.layers[k];
    x = ad::affine(ctx.p(l.weight), x, ctx.p(l.bias));
    if (l.activation == Activation::Sigmoid) x = ad::sigmoid(x);
    if (k + 1 < p.layers.size()) x = ctx.drop(x);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Attention fusion

struct AttentionParams {
  int projection = -1;  // (width x input)
  int query = -1;       // (width x 1)
  int input_size = 0;
  int width = 0;

  template <typename Rng>
  static AttentionParams create(ParamSet& params, const std::string& prefix, int input, int width, Rng& rng) {
    AttentionParams a;
    a.input_size = input;
    a.width = width;
    a.projection = params.add(prefix + ".P", ad::xavier_uniform(width, input, rng));
    a.query = params.add(prefix + ".q", ad::xavier_uniform(width, 1, rng));
    return a;
  }
};

struct AttentionResult {
  Var fused;    // (width x 1)
  Var weights;  // (1 x K)
};

/// Projects every component with the shared matrix, scores it against the
/// query and returns the softmax-weighted sum of the projections.
inline AttentionResult attention_fuse(const ForwardContext& ctx, const AttentionParams& p,
                                      const std::vector<Var>& components) {
  if (components.empty()) throw std::invalid_argument("attention_fuse: no components to fuse");
  for (const auto& c : components) {
    if (c.rows() != p.input_size || c.cols() != 1) {
      throw ad::ShapeError("attention_fuse: component " + ad::shape_str(c.value()) + " does not match width " +
                           std::to_string(p.input_size));
    }
  }
  Var stacked = ad::hcat(components);                        // input x K
  Var projected = ad::matmul(ctx.p(p.projection), stacked);  // width x K
  Var scores = ad::matmul(ad::transpose(ctx.p(p.query)), projected);
  Var weights = ad::softmax(scores);
  Var fused = ad::matmul(projected, ad::transpose(weights));
  return {fused, weights};
}

}  // namespace mcan
