#pragma once

#include "mcan/autodiff.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace mcan::ad {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moments. Moment buffers are allocated lazily on
/// the first step and must keep matching the parameter shapes.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::int64_t step_count() const { return step_; }
  const std::vector<Mat>& first_moment() const { return m_; }
  const std::vector<Mat>& second_moment() const { return v_; }

  void step(ParamSet& params, const Gradients& grads) {
    if (grads.size() != params.size()) {
      throw std::invalid_argument("Adam::step: gradient count " + std::to_string(grads.size()) +
                                  " does not match parameter count " + std::to_string(params.size()));
    }
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
      }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Mat& w = params[i].value;
      const Mat& g = grads[i];
      if (g.rows() != w.rows() || g.cols() != w.cols()) {
        throw ShapeError("Adam::step: gradient for " + params[i].name + " has shape " + shape_str(g) +
                         ", parameter is " + shape_str(w));
      }
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
      const auto m_hat = m_[i].array() / bc1;
      const auto v_hat = v_[i].array() / bc2;
      w.array() -= config_.learning_rate * m_hat / (v_hat.sqrt() + config_.epsilon);
    }
  }

 private:
  AdamConfig config_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  std::int64_t step_ = 0;
};

/// Xavier/Glorot uniform initialization for a (fan_out x fan_in) matrix.
template <typename Rng>
Mat xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

}  // namespace mcan::ad
