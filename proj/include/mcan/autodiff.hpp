#pragma once

// Tape-based reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records every operation in creation order, so the
// recorded graph is acyclic by construction and the reverse pass is a
// single backwards sweep over the node list.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mcan::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_str(const Mat& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

/// A named learnable matrix.
struct Parameter {
  std::string name;
  Mat value;
};

/// Ordered collection of parameters. Order is registration order and is the
/// iteration order used by optimizers and checkpoints.
class ParamSet {
 public:
  int add(std::string name, Mat init) {
    for (const auto& p : params_) {
      if (p.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
    }
    params_.push_back({std::move(name), std::move(init)});
    return static_cast<int>(params_.size()) - 1;
  }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

 private:
  std::vector<Parameter> params_;
};

/// Gradient buffer aligned with a ParamSet.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParamSet& params) {
    grads_.reserve(params.size());
    for (const auto& p : params) grads_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  }

  std::size_t size() const { return grads_.size(); }
  Mat& operator[](std::size_t i) { return grads_[i]; }
  const Mat& operator[](std::size_t i) const { return grads_[i]; }

  void zero() {
    for (auto& g : grads_) g.setZero();
  }

  Gradients& operator+=(const Gradients& other) {
    for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
    return *this;
  }

 private:
  std::vector<Mat> grads_;
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Mat& value() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value, const char* op = "constant") {
    return push(std::move(value), false, {}, op);
  }

  Var leaf(Mat value, bool requires_grad = true) {
    return push(std::move(value), requires_grad, {}, "leaf");
  }

  /// Leaf bound to a parameter. Repeated calls for the same index return the
  /// same node, so every use of a parameter accumulates into one gradient.
  Var param(const ParamSet& params, int index) {
    if (param_nodes_.size() < params.size()) param_nodes_.resize(params.size(), -1);
    int& slot = param_nodes_[static_cast<std::size_t>(index)];
    if (slot >= 0) return {this, slot};
    Node n;
    n.external = &params[static_cast<std::size_t>(index)].value;
    n.requires_grad = true;
    n.param_index = index;
    n.op = params[static_cast<std::size_t>(index)].name.c_str();
    nodes_.push_back(std::move(n));
    slot = static_cast<int>(nodes_.size()) - 1;
    return {this, slot};
  }

  const Mat& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external ? *n.external : n.value;
  }

  const Mat& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    ensure_grad(n);
    return n.grad;
  }

  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  const char* op_name(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }

  /// Adds g into the gradient of node id (used by backward rules).
  void accumulate(int id, const Mat& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    ensure_grad(n);
    n.grad += g;
  }

  template <typename Expr>
  void accumulate_expr(int id, const Expr& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    ensure_grad(n);
    n.grad += g;
  }

  const Mat& upstream(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  /// Reverse pass from a 1x1 loss. Gradients accumulate across calls until
  /// zero_grad() is invoked.
  void backward(Var loss) {
    if (loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
    const Mat& lv = value(loss.id());
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ShapeError("backward: loss must be scalar, got " + shape_str(lv));
    }
    Node& root = nodes_[static_cast<std::size_t>(loss.id())];
    if (!root.requires_grad) return;
    // Intermediate gradients are rebuilt from scratch on every pass; only
    // leaves keep their accumulated values.
    for (int i = 0; i <= loss.id(); ++i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.backward && n.grad.size() > 0) n.grad.setZero();
    }
    ensure_grad(root);
    root.grad(0, 0) += 1.0;
    for (int i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
      n.backward(*this, i);
    }
  }

  void zero_grad() {
    for (auto& n : nodes_) {
      if (n.grad.size() > 0) n.grad.setZero();
    }
  }

  /// Adds the gradients of all parameter leaves into grads.
  void accumulate_into(Gradients& grads) const {
    for (const auto& n : nodes_) {
      if (n.param_index >= 0 && n.grad.size() > 0) grads[static_cast<std::size_t>(n.param_index)] += n.grad;
    }
  }

  /// Index of the first node holding a non-finite value, or -1.
  int first_non_finite() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!value(static_cast<int>(i)).allFinite()) return static_cast<int>(i);
    }
    return -1;
  }

  Var push(Mat value, bool requires_grad, BackwardFn fn, const char* op) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(fn);
    n.op = op;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    const Mat* external = nullptr;
    BackwardFn backward;
    bool requires_grad = false;
    int param_index = -1;
    const char* op = "";
  };

  void ensure_grad(Node& n) {
    if (n.grad.size() == 0) {
      const Mat& v = n.external ? *n.external : n.value;
      n.grad = Mat::Zero(v.rows(), v.cols());
    }
  }

  std::vector<Node> nodes_;
  std::vector<int> param_nodes_;
};

inline const Mat& Var::value() const { return tape_->value(id_); }
inline const Mat& Var::grad() const { return tape_->grad(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

inline Tape& same_tape(const char* op, Var a, Var b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands are not on the same tape");
  }
  return *a.tape();
}

inline void require_same_shape(const char* op, const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

inline void require_col_vector(const char* op, const Mat& a) {
  if (a.cols() != 1) throw ShapeError(std::string(op) + ": expected column vector, got " + shape_str(a));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Var add(Var a, Var b) {
  Tape& t = detail::same_tape("add", a, b);
  detail::require_same_shape("add", a.value(), b.value());
  const bool rg = a.requires_grad() || b.requires_grad();
  return t.push(a.value() + b.value(), rg,
                [ai = a.id(), bi = b.id()](Tape& tp, int self) {
                  tp.accumulate(ai, tp.upstream(self));
                  tp.accumulate(bi, tp.upstream(self));
                },
                "add");
}

inline Var sub(Var a, Var b) {
  Tape& t = detail::same_tape("sub", a, b);
  detail::require_same_shape("sub", a.value(), b.value());
  const bool rg = a.requires_grad() || b.requires_grad();
  return t.push(a.value() - b.value(), rg,
                [ai = a.id(), bi = b.id()](Tape& tp, int self) {
                  tp.accumulate(ai, tp.upstream(self));
                  tp.accumulate_expr(bi, -tp.upstream(self));
                },
                "sub");
}

/// Elementwise (Hadamard) product.
inline Var mul(Var a, Var b) {
  Tape& t = detail::same_tape("mul", a, b);
  detail::require_same_shape("mul", a.value(), b.value());
  const bool rg = a.requires_grad() || b.requires_grad();
  return t.push(a.value().cwiseProduct(b.value()), rg,
                [ai = a.id(), bi = b.id()](Tape& tp, int self) {
                  const Mat& g = tp.upstream(self);
                  if (tp.requires_grad(ai)) tp.accumulate_expr(ai, g.cwiseProduct(tp.value(bi)));
                  if (tp.requires_grad(bi)) tp.accumulate_expr(bi, g.cwiseProduct(tp.value(ai)));
                },
                "mul");
}

inline Var scale(Var a, double s) {
  Tape& t = *a.tape();
  return t.push(a.value() * s, a.requires_grad(),
                [ai = a.id(), s](Tape& tp, int self) { tp.accumulate_expr(ai, tp.upstream(self) * s); },
                "scale");
}

inline Var add_scalar(Var a, double s) {
  Tape& t = *a.tape();
  return t.push((a.value().array() + s).matrix(), a.requires_grad(),
                [ai = a.id()](Tape& tp, int self) { tp.accumulate(ai, tp.upstream(self)); }, "add_scalar");
}

inline Var square(Var a) {
  Tape& t = *a.tape();
  return t.push(a.value().array().square().matrix(), a.requires_grad(),
                [ai = a.id()](Tape& tp, int self) {
                  tp.accumulate_expr(ai, (2.0 * tp.value(ai).array() * tp.upstream(self).array()).matrix());
                },
                "square");
}

inline double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Mat out = a.value().unaryExpr([](double x) { return sigmoid_scalar(x); });
  return t.push(std::move(out), a.requires_grad(),
                [ai = a.id()](Tape& tp, int self) {
                  const auto y = tp.value(self).array();
                  tp.accumulate_expr(ai, (tp.upstream(self).array() * y * (1.0 - y)).matrix());
                },
                "sigmoid");
}

inline Var tanh(Var a) {
  Tape& t = *a.tape();
  Mat out = a.value().array().tanh().matrix();
  return t.push(std::move(out), a.requires_grad(),
                [ai = a.id()](Tape& tp, int self) {
                  const auto y = tp.value(self).array();
                  tp.accumulate_expr(ai, (tp.upstream(self).array() * (1.0 - y * y)).matrix());
                },
                "tanh");
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(Var a, Var b) {
  Tape& t = detail::same_tape("matmul", a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.value()) + " * " + shape_str(b.value()));
  }
  const bool rg = a.requires_grad() || b.requires_grad();
  Mat out = a.value() * b.value();
  return t.push(std::move(out), rg,
                [ai = a.id(), bi = b.id()](Tape& tp, int self) {
                  const Mat& g = tp.upstream(self);
                  if (tp.requires_grad(ai)) tp.accumulate_expr(ai, g * tp.value(bi).transpose());
                  if (tp.requires_grad(bi)) tp.accumulate_expr(bi, tp.value(ai).transpose() * g);
                },
                "matmul");
}

/// W x + b for a column vector x.
inline Var affine(Var w, Var x, Var b) {
  Tape& t = detail::same_tape("affine", w, x);
  detail::same_tape("affine", w, b);
  detail::require_col_vector("affine", x.value());
  if (w.cols() != x.rows() || b.rows() != w.rows() || b.cols() != 1) {
    throw ShapeError("affine: incompatible shapes W" + shape_str(w.value()) + " x" + shape_str(x.value()) + " b" +
                     shape_str(b.value()));
  }
  const bool rg = w.requires_grad() || x.requires_grad() || b.requires_grad();
  Mat out = w.value() * x.value() + b.value();
  return t.push(std::move(out), rg,
                [wi = w.id(), xi = x.id(), bi = b.id()](Tape& tp, int self) {
                  const Mat& g = tp.upstream(self);
                  if (tp.requires_grad(wi)) tp.accumulate_expr(wi, g * tp.value(xi).transpose());
                  if (tp.requires_grad(xi)) tp.accumulate_expr(xi, tp.value(wi).transpose() * g);
                  tp.accumulate(bi, g);
                },
                "affine");
}

/// W1 x1 + W2 x2 + b, the gate pre-activation form of a recurrent cell.
inline Var affine2(Var w1, Var x1, Var w2, Var x2, Var b) {
  Tape& t = detail::same_tape("affine2", w1, x1);
  detail::same_tape("affine2", w1, w2);
  detail::same_tape("affine2", w1, x2);
  detail::same_tape("affine2", w1, b);
  if (w1.cols() != x1.rows() || w2.cols() != x2.rows() || w1.rows() != w2.rows() || b.rows() != w1.rows() ||
      x1.cols() != 1 || x2.cols() != 1 || b.cols() != 1) {
    throw ShapeError("affine2: incompatible shapes W1" + shape_str(w1.value()) + " x1" + shape_str(x1.value()) +
                     " W2" + shape_str(w2.value()) + " x2" + shape_str(x2.value()) + " b" + shape_str(b.value()));
  }
  const bool rg = w1.requires_grad() || x1.requires_grad() || w2.requires_grad() || x2.requires_grad() ||
                  b.requires_grad();
  Mat out = w1.value() * x1.value() + w2.value() * x2.value() + b.value();
  return t.push(std::move(out), rg,
                [w1i = w1.id(), x1i = x1.id(), w2i = w2.id(), x2i = x2.id(), bi = b.id()](Tape& tp, int self) {
                  const Mat& g = tp.upstream(self);
                  if (tp.requires_grad(w1i)) tp.accumulate_expr(w1i, g * tp.value(x1i).transpose());
                  if (tp.requires_grad(x1i)) tp.accumulate_expr(x1i, tp.value(w1i).transpose() * g);
                  if (tp.requires_grad(w2i)) tp.accumulate_expr(w2i, g * tp.value(x2i).transpose());
                  if (tp.requires_grad(x2i)) tp.accumulate_expr(x2i, tp.value(w2i).transpose() * g);
                  tp.accumulate(bi, g);
                },
                "affine2");
}

inline Var transpose(Var a) {
  Tape& t = *a.tape();
  Mat out = a.value().transpose();
  return t.push(std::move(out), a.requires_grad(),
                [ai = a.id()](Tape& tp, int self) { tp.accumulate_expr(ai, tp.upstream(self).transpose()); },
                "transpose");
}

/// Row-major reshape; element order is preserved.
inline Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) {
    throw ShapeError("reshape: cannot reshape " + shape_str(a.value()) + " to (" + std::to_string(rows) + "x" +
                     std::to_string(cols) + ")");
  }
  Tape& t = *a.tape();
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  return t.push(std::move(out), a.requires_grad(),
                [ai = a.id(), r0, c0](Tape& tp, int self) {
                  tp.accumulate_expr(ai, Eigen::Map<const Mat>(tp.upstream(self).data(), r0, c0));
                },
                "reshape");
}

// ---------------------------------------------------------------------------
// Structural

/// Vertical concatenation (stacks rows). All parts must share a column count.
inline Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  Tape& t = *parts.front().tape();
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  bool rg = false;
  for (const auto& p : parts) {
    if (p.tape() != &t) throw std::invalid_argument("concat: operands are not on the same tape");
    if (p.cols() != cols) {
      throw ShapeError("concat: column mismatch " + shape_str(parts.front().value()) + " vs " + shape_str(p.value()));
    }
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  Mat out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  layout.reserve(parts.size());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    layout.emplace_back(p.id(), r);
    r += p.rows();
  }
  return t.push(std::move(out), rg,
                [layout = std::move(layout)](Tape& tp, int self) {
                  const Mat& g = tp.upstream(self);
                  for (const auto& [id, offset] : layout) {
                    if (tp.requires_grad(id)) tp.accumulate_expr(id, g.middleRows(offset, tp.value(id).rows()));
                  }
                },
                "concat");
}

/// Horizontal concatenation (stacks columns). All parts must share a row count.
inline Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: no operands");
  Tape& t = *parts.front().tape();
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.front().rows();
  bool rg = false;
  for (const auto& p : parts) {
    if (p.tape() != &t) throw std::invalid_argument("hcat: operands are not on the same tape");
    if (p.rows() != rows) {
      throw ShapeError("hcat: row mismatch " + shape_str(parts.front().value()) + " vs " + shape_str(p.value()));
    }
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Mat out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    layout.emplace_back(p.id(), c);
    c += p.cols();
  }
  return t.push(std::move(out), rg,
                [layout = std::move(layout)](Tape& tp, int self) {
                  const Mat& g = tp.upstream(self);
                  for (const auto& [id, offset] : layout) {
                    if (tp.requires_grad(id)) tp.accumulate_expr(id, g.middleCols(offset, tp.value(id).cols()));
                  }
                },
                "hcat");
}

/// Rows [begin, begin + count).
inline Var slice(Var a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw ShapeError("slice: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_str(a.value()));
  }
  Tape& t = *a.tape();
  Mat out = a.value().middleRows(begin, count);
  return t.push(std::move(out), a.requires_grad(),
                [ai = a.id(), begin, count](Tape& tp, int self) {
                  Mat g = Mat::Zero(tp.value(ai).rows(), tp.value(ai).cols());
                  g.middleRows(begin, count) = tp.upstream(self);
                  tp.accumulate(ai, g);
                },
                "slice");
}

/// Columns [begin, begin + count).
inline Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_str(a.value()));
  }
  Tape& t = *a.tape();
  Mat out = a.value().middleCols(begin, count);
  return t.push(std::move(out), a.requires_grad(),
                [ai = a.id(), begin, count](Tape& tp, int self) {
                  Mat g = Mat::Zero(tp.value(ai).rows(), tp.value(ai).cols());
                  g.middleCols(begin, count) = tp.upstream(self);
                  tp.accumulate(ai, g);
                },
                "slice_cols");
}

// ---------------------------------------------------------------------------
// Reductions

inline Var sum(Var a) {
  Tape& t = *a.tape();
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), a.requires_grad(),
                [ai = a.id()](Tape& tp, int self) {
                  const double g = tp.upstream(self)(0, 0);
                  tp.accumulate_expr(ai, Mat::Constant(tp.value(ai).rows(), tp.value(ai).cols(), g));
                },
                "sum");
}

inline Var mean(Var a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty operand");
  Tape& t = *a.tape();
  Mat out(1, 1);
  out(0, 0) = a.value().mean();
  const double n = static_cast<double>(a.value().size());
  return t.push(std::move(out), a.requires_grad(),
                [ai = a.id(), n](Tape& tp, int self) {
                  const double g = tp.upstream(self)(0, 0) / n;
                  tp.accumulate_expr(ai, Mat::Constant(tp.value(ai).rows(), tp.value(ai).cols(), g));
                },
                "mean");
}

/// Sum over columns: (r x c) -> (r x 1).
inline Var row_sums(Var a) {
  Tape& t = *a.tape();
  Mat out = a.value().rowwise().sum();
  return t.push(std::move(out), a.requires_grad(),
                [ai = a.id()](Tape& tp, int self) {
                  const Mat& g = tp.upstream(self);
                  tp.accumulate_expr(ai, g.replicate(1, tp.value(ai).cols()));
                },
                "row_sums");
}

/// Row-wise softmax.
inline Var softmax(Var a) {
  Tape& t = *a.tape();
  Mat out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return t.push(std::move(out), a.requires_grad(),
                [ai = a.id()](Tape& tp, int self) {
                  const Mat& y = tp.value(self);
                  const Mat& g = tp.upstream(self);
                  Mat ga(y.rows(), y.cols());
                  for (Eigen::Index r = 0; r < y.rows(); ++r) {
                    const double dot = y.row(r).dot(g.row(r));
                    ga.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
                  }
                  tp.accumulate(ai, ga);
                },
                "softmax");
}

/// Scales row r of a by s(r, 0).
inline Var scale_rows(Var a, Var s) {
  Tape& t = detail::same_tape("scale_rows", a, s);
  if (s.cols() != 1 || s.rows() != a.rows()) {
    throw ShapeError("scale_rows: scale " + shape_str(s.value()) + " does not match " + shape_str(a.value()));
  }
  const bool rg = a.requires_grad() || s.requires_grad();
  Mat out = s.value().col(0).asDiagonal() * a.value();
  return t.push(std::move(out), rg,
                [ai = a.id(), si = s.id()](Tape& tp, int self) {
                  const Mat& g = tp.upstream(self);
                  if (tp.requires_grad(ai)) tp.accumulate_expr(ai, tp.value(si).col(0).asDiagonal() * g);
                  if (tp.requires_grad(si)) tp.accumulate_expr(si, g.cwiseProduct(tp.value(ai)).rowwise().sum());
                },
                "scale_rows");
}

// ---------------------------------------------------------------------------
// Regularization

/// Inverted dropout: in training mode each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate); in evaluation
/// mode the input is returned unchanged.
template <typename Rng>
Var dropout(Var x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  Mat mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? inv : 0.0;
  Mat out = x.value().cwiseProduct(mask);
  return x.tape()->push(std::move(out), x.requires_grad(),
                        [xi = x.id(), mask = std::move(mask)](Tape& tp, int self) {
                          tp.accumulate_expr(xi, tp.upstream(self).cwiseProduct(mask));
                        },
                        "dropout");
}

// ---------------------------------------------------------------------------
// Convenience

inline Mat column(const std::vector<double>& v) {
  Mat m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

inline Mat scalar_mat(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return m;
}

inline std::vector<double> to_vector(const Mat& m) { return {m.data(), m.data() + m.size()}; }

}  // namespace mcan::ad
