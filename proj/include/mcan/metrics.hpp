#pragma once

#include <cmath>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

struct ErrorStats {
  double mae = 0.0;
  double mape = 0.0;  // percent, over nonzero truths only
  double rmse = 0.0;
  std::size_t count = 0;
  std::size_t mape_count = 0;
};

struct MetricsReport {
  ErrorStats overall;
  std::vector<ErrorStats> per_step;  // horizon steps 1..H
  std::size_t samples = 0;
};

/// Streams (truth, prediction) pairs per horizon step; order-independent up
/// to floating-point summation order.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(int horizon) : steps_(static_cast<std::size_t>(horizon)) {
    if (horizon < 1) throw std::invalid_argument("MetricsAccumulator: horizon must be >= 1");
  }

  void add(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != steps_.size() || pred.size() != steps_.size()) {
      throw std::invalid_argument("MetricsAccumulator: expected " + std::to_string(steps_.size()) +
                                  " horizon values");
    }
    for (std::size_t k = 0; k < steps_.size(); ++k) {
      add_one(steps_[k], truth[k], pred[k]);
      add_one(all_, truth[k], pred[k]);
    }
    ++samples_;
  }

  MetricsReport report() const {
    if (samples_ == 0) throw std::invalid_argument("metrics: empty split");
    MetricsReport r;
    r.overall = finish(all_);
    for (const auto& s : steps_) r.per_step.push_back(finish(s));
    r.samples = samples_;
    return r;
  }

 private:
  struct Sums {
    double abs = 0.0, sq = 0.0, pct = 0.0;
    std::size_t n = 0, n_pct = 0;
  };

  static void add_one(Sums& s, double truth, double pred) {
    const double e = pred - truth;
    s.abs += std::abs(e);
    s.sq += e * e;
    ++s.n;
    if (truth != 0.0) {
      s.pct += std::abs(e) / std::abs(truth);
      ++s.n_pct;
    }
  }

  static ErrorStats finish(const Sums& s) {
    ErrorStats e;
    e.count = s.n;
    e.mape_count = s.n_pct;
    if (s.n > 0) {
      e.mae = s.abs / static_cast<double>(s.n);
      e.rmse = std::sqrt(s.sq / static_cast<double>(s.n));
    }
    if (s.n_pct > 0) e.mape = 100.0 * s.pct / static_cast<double>(s.n_pct);
    return e;
  }

  std::vector<Sums> steps_;
  Sums all_;
  std::size_t samples_ = 0;
};

/// Metrics of single-step predictions.
inline MetricsReport compute_metrics(const std::vector<double>& truth, const std::vector<double>& pred) {
  if (truth.size() != pred.size()) throw std::invalid_argument("compute_metrics: length mismatch");
  MetricsAccumulator acc(1);
  for (std::size_t i = 0; i < truth.size(); ++i) acc.add({truth[i]}, {pred[i]});
  return acc.report();
}

/// Rows of `metric,horizon_step,value`; horizon_step "all" holds the
/// aggregate over every step.
inline void write_metrics_csv(std::ostream& out, const MetricsReport& r) {
  auto emit = [&](const std::string& step, const ErrorStats& e) {
    out << "MAE," << step << ',' << e.mae << '\n';
    out << "MAPE," << step << ',' << e.mape << '\n';
    out << "RMSE," << step << ',' << e.rmse << '\n';
  };
  out << "metric,horizon_step,value\n";
  emit("all", r.overall);
  for (std::size_t k = 0; k < r.per_step.size(); ++k) emit(std::to_string(k + 1), r.per_step[k]);
}

inline void write_metrics_summary(std::ostream& out, const std::string& title, const MetricsReport& r) {
  out << title << " (" << r.samples << " samples)\n";
  out << "  MAE  " << r.overall.mae << " km/h\n";
  out << "  MAPE " << r.overall.mape << " %\n";
  out << "  RMSE " << r.overall.rmse << " km/h\n";
  for (std::size_t k = 0; k < r.per_step.size(); ++k) {
    out << "  step " << (k + 1) << ": MAE " << r.per_step[k].mae << ", MAPE " << r.per_step[k].mape << ", RMSE "
        << r.per_step[k].rmse << '\n';
  }
}

}  // namespace mcan
