#pragma once

// Flat JSON run configuration shared by every command. Unknown keys are
// rejected; `key=value` overrides are applied after the file.

#include "mcan/analysis.hpp"
#include "mcan/config.hpp"
#include "mcan/synthetic.hpp"
#include "mcan/trainer.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string data_dir;
  std::string output_dir;
  std::string checkpoint;  // defaults to <output_dir>/checkpoint.json
  std::string split = "test";
  std::uint64_t seed = 1;
  std::optional<int> num_roads;
  SyntheticConfig generator;
  ModelConfig model;
  TrainConfig train;
  CorrelationRequest correlation;

  std::string checkpoint_path() const {
    if (!checkpoint.empty()) return checkpoint;
    return (std::filesystem::path(output_dir) / "checkpoint.json").string();
  }
};

namespace detail {

using Setter = std::function<void(RunConfig&, const nlohmann::json&)>;

template <class T>
Setter set(T RunConfig::*field) {
  return [field](RunConfig& rc, const nlohmann::json& v) { rc.*field = v.get<T>(); };
}

inline Channel parse_channel(const std::string& s) {
  if (s == "speed") return Channel::Speed;
  if (s == "trend") return Channel::Trend;
  if (s == "deviation") return Channel::Deviation;
  throw UsageError("unknown measurement '" + s + "' (valid: speed, trend, deviation)");
}

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data_dir", set(&RunConfig::data_dir)},
      {"output_dir", set(&RunConfig::output_dir)},
      {"checkpoint", set(&RunConfig::checkpoint)},
      {"split", set(&RunConfig::split)},
      {"seed", set(&RunConfig::seed)},
      {"num_roads", [](RunConfig& r, const nlohmann::json& v) { r.num_roads = v.get<int>(); }},
      {"edge_density", [](RunConfig& r, const nlohmann::json& v) { r.generator.edge_density = v.get<double>(); }},
      {"intervals", [](RunConfig& r, const nlohmann::json& v) { r.generator.interval_menu = v.get<std::vector<int>>(); }},
      {"days", [](RunConfig& r, const nlohmann::json& v) { r.generator.days = v.get<int>(); }},
      {"coupling", [](RunConfig& r, const nlohmann::json& v) { r.generator.coupling = v.get<double>(); }},
      {"coupling_lag_minutes",
       [](RunConfig& r, const nlohmann::json& v) { r.generator.coupling_lag_minutes = v.get<int>(); }},
      {"noise_std", [](RunConfig& r, const nlohmann::json& v) { r.generator.noise_std = v.get<double>(); }},
      {"noise_persistence",
       [](RunConfig& r, const nlohmann::json& v) { r.generator.noise_persistence = v.get<double>(); }},
      {"base_speed", [](RunConfig& r, const nlohmann::json& v) { r.generator.base_speed = v.get<double>(); }},
      {"daily_amplitude", [](RunConfig& r, const nlohmann::json& v) { r.generator.daily_amplitude = v.get<double>(); }},
      {"weekly_amplitude",
       [](RunConfig& r, const nlohmann::json& v) { r.generator.weekly_amplitude = v.get<double>(); }},
      {"weather_effect", [](RunConfig& r, const nlohmann::json& v) { r.generator.weather_effect = v.get<double>(); }},
      {"holiday_prob", [](RunConfig& r, const nlohmann::json& v) { r.generator.holiday_prob = v.get<double>(); }},
      {"holiday_effect", [](RunConfig& r, const nlohmann::json& v) { r.generator.holiday_effect = v.get<double>(); }},
      {"start_day_of_week",
       [](RunConfig& r, const nlohmann::json& v) { r.generator.start_day_of_week = v.get<int>(); }},
      {"horizon", [](RunConfig& r, const nlohmann::json& v) { r.model.horizon = v.get<int>(); }},
      {"c", [](RunConfig& r, const nlohmann::json& v) { r.model.width = v.get<int>(); }},
      {"hops", [](RunConfig& r, const nlohmann::json& v) { r.model.hops = v.get<int>(); }},
      {"filters", [](RunConfig& r, const nlohmann::json& v) { r.model.filters = v.get<int>(); }},
      {"k_em", [](RunConfig& r, const nlohmann::json& v) { r.model.cpa_order = v.get<int>(); }},
      {"k_gcn", [](RunConfig& r, const nlohmann::json& v) { r.model.gcn_order = v.get<int>(); }},
      {"hidden", [](RunConfig& r, const nlohmann::json& v) { r.model.hidden = v.get<int>(); }},
      {"lstm_layers", [](RunConfig& r, const nlohmann::json& v) { r.model.lstm_layers = v.get<int>(); }},
      {"fnn_layers", [](RunConfig& r, const nlohmann::json& v) { r.model.fnn_layers = v.get<int>(); }},
      {"fusion_width", [](RunConfig& r, const nlohmann::json& v) { r.model.fusion_width = v.get<int>(); }},
      {"lr", [](RunConfig& r, const nlohmann::json& v) { r.model.recent = v.get<int>(); }},
      {"ld", [](RunConfig& r, const nlohmann::json& v) { r.model.daily = v.get<int>(); }},
      {"lw", [](RunConfig& r, const nlohmann::json& v) { r.model.weekly = v.get<int>(); }},
      {"window_minutes", [](RunConfig& r, const nlohmann::json& v) { r.model.window_minutes = v.get<int>(); }},
      {"ablation",
       [](RunConfig& r, const nlohmann::json& v) {
         r.model.ablation = Ablation{};
         for (const auto& f : v.get<std::vector<std::string>>()) r.model.ablation.apply(f);
       }},
      {"epochs", [](RunConfig& r, const nlohmann::json& v) { r.train.epochs = v.get<int>(); }},
      {"batch_size", [](RunConfig& r, const nlohmann::json& v) { r.train.batch_size = v.get<int>(); }},
      {"learning_rate", [](RunConfig& r, const nlohmann::json& v) { r.train.learning_rate = v.get<double>(); }},
      {"dropout", [](RunConfig& r, const nlohmann::json& v) { r.train.dropout = v.get<double>(); }},
      {"alpha", [](RunConfig& r, const nlohmann::json& v) { r.train.alpha = v.get<double>(); }},
      {"beta", [](RunConfig& r, const nlohmann::json& v) { r.train.beta = v.get<double>(); }},
      {"folds", [](RunConfig& r, const nlohmann::json& v) { r.train.folds = v.get<int>(); }},
      {"fold", [](RunConfig& r, const nlohmann::json& v) { r.train.fold = v.get<int>(); }},
      {"shuffle_folds", [](RunConfig& r, const nlohmann::json& v) { r.train.shuffle_folds = v.get<bool>(); }},
      {"train_stride", [](RunConfig& r, const nlohmann::json& v) { r.train.train_stride = v.get<int>(); }},
      {"road_a", [](RunConfig& r, const nlohmann::json& v) { r.correlation.road_a = v.get<int>(); }},
      {"road_b", [](RunConfig& r, const nlohmann::json& v) { r.correlation.road_b = v.get<int>(); }},
      {"corr_days", [](RunConfig& r, const nlohmann::json& v) { r.correlation.days = v.get<int>(); }},
      {"slot_begin", [](RunConfig& r, const nlohmann::json& v) { r.correlation.slot_begin = v.get<std::int64_t>(); }},
      {"slot_end", [](RunConfig& r, const nlohmann::json& v) { r.correlation.slot_end = v.get<std::int64_t>(); }},
      {"measurements",
       [](RunConfig& r, const nlohmann::json& v) {
         r.correlation.measurements.clear();
         for (const auto& m : v.get<std::vector<std::string>>()) r.correlation.measurements.push_back(parse_channel(m));
       }},
  };
  return table;
}

}  // namespace detail

inline std::vector<std::string> run_config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::setters()) keys.push_back(k);
  return keys;
}

inline void set_key(RunConfig& rc, const std::string& key, const nlohmann::json& value) {
  const auto& table = detail::setters();
  const auto it = table.find(key);
  if (it == table.end()) throw UsageError("unknown config key '" + key + "'");
  try {
    it->second(rc, value);
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config key '" + key + "': unexpected value " + value.dump());
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& ex) {
    throw UsageError("config key '" + key + "': " + ex.what());
  }
}

inline void apply_json(RunConfig& rc, const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) set_key(rc, it.key(), it.value());
}

/// `key=value`; the value is read as JSON when it parses, else as a string.
inline void apply_override(RunConfig& rc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_key(rc, key, value);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw UsageError(path + ": not valid JSON");
  RunConfig rc;
  apply_json(rc, j);
  return rc;
}

}  // namespace mcan
