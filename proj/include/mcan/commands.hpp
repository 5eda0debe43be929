#pragma once

#include "mcan/analysis.hpp"
#include "mcan/checkpoint.hpp"
#include "mcan/dataset.hpp"
#include "mcan/run_config.hpp"
#include "mcan/synthetic.hpp"
#include "mcan/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace mcan {

namespace detail {

inline void require(const std::string& value, const char* key) {
  if (value.empty()) throw UsageError(std::string("missing required field '") + key + "'");
}

inline std::filesystem::path output_path(const RunConfig& rc, const char* file) {
  require(rc.output_dir, "output_dir");
  std::filesystem::create_directories(rc.output_dir);
  return std::filesystem::path(rc.output_dir) / file;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

inline Dataset load_input(const RunConfig& rc) {
  require(rc.data_dir, "data_dir");
  const auto p = DatasetPaths::in(rc.data_dir);
  return load_dataset(p.graph, p.series, p.context);
}

template <class F>
void as_usage(F&& f) {
  try {
    f();
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& ex) {
    throw UsageError(ex.what());
  }
}

inline std::vector<Sample> split_samples(const FoldPlan& plan, const std::string& split) {
  if (split == "test") return plan.test;
  if (split == "train") return plan.train;
  if (split == "all") {
    auto all = plan.train;
    all.insert(all.end(), plan.test.begin(), plan.test.end());
    return all;
  }
  throw UsageError("split must be one of test, train, all (got '" + split + "')");
}

}  // namespace detail

inline void cmd_generate(const RunConfig& rc, std::ostream& log) {
  if (!rc.num_roads) throw UsageError("missing required field 'num_roads'");
  SyntheticConfig gen = rc.generator;
  gen.num_roads = *rc.num_roads;
  detail::as_usage([&] { validate(gen); });
  detail::require(rc.output_dir, "output_dir");
  std::filesystem::create_directories(rc.output_dir);
  const Dataset ds = generate_synthetic(gen, rc.seed);
  const auto paths = DatasetPaths::in(rc.output_dir);
  write_dataset(paths, ds);
  log << "wrote " << paths.graph.string() << ", " << paths.series.string() << ", " << paths.context.string() << '\n';
}

inline void cmd_train(const RunConfig& rc, std::ostream& log) {
  TrainConfig tc = rc.train;
  tc.seed = rc.seed;
  detail::as_usage([&] {
    rc.model.validate();
    tc.validate();
  });
  detail::require(rc.output_dir, "output_dir");
  const Dataset ds = detail::load_input(rc);
  std::filesystem::create_directories(rc.output_dir);
  if (const auto dir = std::filesystem::path(rc.checkpoint_path()).parent_path(); !dir.empty()) {
    std::filesystem::create_directories(dir);
  }
  auto result = train(ds, rc.model, tc, [&](int epoch, double loss) {
    log << "epoch " << epoch << " loss " << loss << '\n';
  });
  save_checkpoint(rc.checkpoint_path(), result.model, result.plan.scaler, tc, result.history);
  auto hist = detail::open_out(detail::output_path(rc, "history.csv"));
  hist << "epoch,loss\n";
  for (std::size_t e = 0; e < result.history.size(); ++e) hist << (e + 1) << ',' << format_double(result.history[e]) << '\n';
  log << "trained on " << result.plan.train.size() << " samples; checkpoint " << rc.checkpoint_path() << '\n';
}

inline void cmd_evaluate(const RunConfig& rc, std::ostream& log) {
  const Checkpoint ck = load_checkpoint(rc.checkpoint_path());
  const Dataset ds = detail::load_input(rc);
  const FoldPlan plan = prepare_fold(ds, ck.model.config(), ck.train);
  const auto samples = detail::split_samples(plan, rc.split);
  const auto model_report = evaluate(ck.model, ck.scaler, ds, samples);
  const auto baseline = historical_average_baseline(ds, ck.scaler, samples, ck.model.config().horizon);
  auto m = detail::open_out(detail::output_path(rc, "metrics.csv"));
  write_metrics_csv(m, model_report);
  auto b = detail::open_out(detail::output_path(rc, "baseline_metrics.csv"));
  write_metrics_csv(b, baseline);
  write_metrics_summary(log, "MCAN on " + rc.split + " split", model_report);
  write_metrics_summary(log, "historical average on " + rc.split + " split", baseline);
}

inline void cmd_predict(const RunConfig& rc, std::ostream& log) {
  const Checkpoint ck = load_checkpoint(rc.checkpoint_path());
  const Dataset ds = detail::load_input(rc);
  const FoldPlan plan = prepare_fold(ds, ck.model.config(), ck.train);
  const auto rows = predict(ck.model, ck.scaler, ds, detail::split_samples(plan, rc.split));
  const auto path = detail::output_path(rc, "predictions.csv");
  auto out = detail::open_out(path);
  out << "road_id,t,step,speed_kmh\n";
  for (const auto& r : rows) out << r.road << ',' << r.t << ',' << r.step << ',' << format_double(r.speed_kmh) << '\n';
  log << "wrote " << rows.size() << " rows to " << path.string() << '\n';
}

inline void cmd_correlate(const RunConfig& rc, std::ostream& log) {
  const Dataset ds = detail::load_input(rc);
  std::vector<CorrelationSeries> report;
  detail::as_usage([&] { report = multifold_correlation_report(ds, rc.correlation); });
  const auto path = detail::output_path(rc, "correlation.csv");
  auto out = detail::open_out(path);
  write_correlation_csv(out, report);
  log << "wrote " << path.string() << '\n';
}

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"generate", "correlate", "train", "evaluate", "predict"};
  return names;
}

inline void run_command(const std::string& name, const RunConfig& rc, std::ostream& log) {
  if (name == "generate") return cmd_generate(rc, log);
  if (name == "correlate") return cmd_correlate(rc, log);
  if (name == "train") return cmd_train(rc, log);
  if (name == "evaluate") return cmd_evaluate(rc, log);
  if (name == "predict") return cmd_predict(rc, log);
  throw UsageError("unknown command '" + name + "'");
}

}  // namespace mcan
