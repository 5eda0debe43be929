#pragma once

#include "mcan/autodiff.hpp"
#include "mcan/config.hpp"
#include "mcan/model.hpp"
#include "mcan/normalize.hpp"
#include "mcan/trainer.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json to_json(const ModelConfig& m) {
  return {{"horizon", m.horizon},
          {"c", m.width},
          {"hops", m.hops},
          {"filters", m.filters},
          {"k_em", m.cpa_order},
          {"k_gcn", m.gcn_order},
          {"hidden", m.hidden},
          {"lstm_layers", m.lstm_layers},
          {"fnn_layers", m.fnn_layers},
          {"fusion_width", m.fusion_width},
          {"lr", m.recent},
          {"ld", m.daily},
          {"lw", m.weekly},
          {"window_minutes", m.window_minutes},
          {"ablation", m.ablation.names()}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.horizon = j.at("horizon").get<int>();
  m.width = j.at("c").get<int>();
  m.hops = j.at("hops").get<int>();
  m.filters = j.at("filters").get<int>();
  m.cpa_order = j.at("k_em").get<int>();
  m.gcn_order = j.at("k_gcn").get<int>();
  m.hidden = j.at("hidden").get<int>();
  m.lstm_layers = j.at("lstm_layers").get<int>();
  m.fnn_layers = j.at("fnn_layers").get<int>();
  m.fusion_width = j.at("fusion_width").get<int>();
  m.recent = j.at("lr").get<int>();
  m.daily = j.at("ld").get<int>();
  m.weekly = j.at("lw").get<int>();
  m.window_minutes = j.at("window_minutes").get<int>();
  m.ablation = Ablation::parse(j.at("ablation").get<std::vector<std::string>>());
  m.validate();
  return m;
}

inline nlohmann::json to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},       {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate},
          {"dropout", t.dropout},     {"alpha", t.alpha},           {"beta", t.beta},
          {"folds", t.folds},         {"fold", t.fold},             {"shuffle_folds", t.shuffle_folds},
          {"train_stride", t.train_stride}, {"seed", t.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  t.epochs = j.at("epochs").get<int>();
  t.batch_size = j.at("batch_size").get<int>();
  t.learning_rate = j.at("learning_rate").get<double>();
  t.dropout = j.at("dropout").get<double>();
  t.alpha = j.at("alpha").get<double>();
  t.beta = j.at("beta").get<double>();
  t.folds = j.at("folds").get<int>();
  t.fold = j.at("fold").get<int>();
  t.shuffle_folds = j.at("shuffle_folds").get<bool>();
  t.train_stride = j.at("train_stride").get<int>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.validate();
  return t;
}

inline nlohmann::json matrix_to_json(const Mat& m) {
  std::vector<double> flat(m.data(), m.data() + m.size());
  return {{"shape", {m.rows(), m.cols()}}, {"values", flat}};
}

inline nlohmann::json params_to_json(const ParamSet& params) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& p : params) out[p.name] = matrix_to_json(p.value);
  return out;
}

/// Copies stored values into `params` by name. Every parameter must be
/// present with a matching shape; extra entries are rejected too.
inline void load_params(ParamSet& params, const nlohmann::json& j) {
  if (!j.is_object()) throw CheckpointError("checkpoint: params must be an object");
  for (auto& p : params) {
    if (!j.contains(p.name)) throw CheckpointError("checkpoint: missing parameter " + p.name);
    const auto& e = j.at(p.name);
    const auto shape = e.at("shape").get<std::vector<long>>();
    const auto values = e.at("values").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
      throw CheckpointError("checkpoint: parameter " + p.name + " has shape " + e.at("shape").dump() + ", model expects " +
                            ad::shape_str(p.value));
    }
    if (values.size() != static_cast<std::size_t>(p.value.size())) {
      throw CheckpointError("checkpoint: parameter " + p.name + " holds " + std::to_string(values.size()) + " values");
    }
    std::copy(values.begin(), values.end(), p.value.data());
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (params.find(it.key()) < 0) throw CheckpointError("checkpoint: unexpected parameter " + it.key());
  }
}

inline nlohmann::json scaler_to_json(const Scaler& s) {
  nlohmann::json roads = nlohmann::json::array();
  for (const auto& r : s.roads()) roads.push_back({{"mean", r.mean}, {"std", r.std}, {"daily_average", r.daily_average}});
  return roads;
}

inline Scaler scaler_from_json(const nlohmann::json& j) {
  std::vector<RoadStats> roads;
  for (const auto& r : j) {
    RoadStats s;
    s.mean = r.at("mean").get<double>();
    s.std = r.at("std").get<double>();
    s.daily_average = r.at("daily_average").get<std::vector<double>>();
    if (!(s.std > 0.0) || s.daily_average.empty()) throw CheckpointError("checkpoint: invalid road statistics");
    roads.push_back(std::move(s));
  }
  return Scaler(std::move(roads));
}

struct Checkpoint {
  McanModel model;
  Scaler scaler;
  TrainConfig train;
  std::vector<double> history;
};

inline nlohmann::json checkpoint_to_json(const McanModel& model, const Scaler& scaler, const TrainConfig& tc,
                                         const std::vector<double>& history) {
  return {{"format_version", kCheckpointVersion},
          {"model_config", to_json(model.config())},
          {"train_config", to_json(tc)},
          {"scaler", scaler_to_json(scaler)},
          {"history", history},
          {"params", params_to_json(model.params())}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint: unsupported format_version " + std::to_string(version));
    }
    const ModelConfig mc = model_config_from_json(j.at("model_config"));
    TrainConfig tc = train_config_from_json(j.at("train_config"));
    McanModel model(mc, tc.seed);
    load_params(model.params(), j.at("params"));
    return Checkpoint{std::move(model), scaler_from_json(j.at("scaler")), tc,
                      j.at("history").get<std::vector<double>>()};
  } catch (const nlohmann::json::exception& ex) {
    throw CheckpointError(std::string("checkpoint: ") + ex.what());
  }
}

inline void save_checkpoint(const std::string& path, const McanModel& model, const Scaler& scaler,
                            const TrainConfig& tc, const std::vector<double>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << checkpoint_to_json(model, scaler, tc, history).dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw CheckpointError(path + ": " + ex.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace mcan
