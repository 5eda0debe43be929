#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcan {

/// Branches removed from the model. Names follow the ablation study:
/// ntr / nde drop the trend / deviation spatial channels, nd / nw drop the
/// daily / weekly temporal branches, nemb replaces the embedding with
/// nearest-in-time copying.
struct Ablation {
  bool ntr = false;
  bool nde = false;
  bool nd = false;
  bool nw = false;
  bool nemb = false;

  static const std::vector<std::string>& valid_flags() {
    static const std::vector<std::string> flags = {"ntr", "nde", "ntr-nde", "nd", "nw", "nd-nw", "nemb"};
    return flags;
  }

  void apply(const std::string& flag) {
    if (flag == "ntr") {
      ntr = true;
    } else if (flag == "nde") {
      nde = true;
    } else if (flag == "ntr-nde") {
      ntr = nde = true;
    } else if (flag == "nd") {
      nd = true;
    } else if (flag == "nw") {
      nw = true;
    } else if (flag == "nd-nw") {
      nd = nw = true;
    } else if (flag == "nemb") {
      nemb = true;
    } else {
      std::string valid;
      for (const auto& f : valid_flags()) valid += (valid.empty() ? "" : ", ") + f;
      throw std::invalid_argument("unknown ablation flag '" + flag + "' (valid: " + valid + ")");
    }
  }

  static Ablation parse(const std::vector<std::string>& flags) {
    Ablation a;
    for (const auto& f : flags) a.apply(f);
    return a;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    if (ntr) out.emplace_back("ntr");
    if (nde) out.emplace_back("nde");
    if (nd) out.emplace_back("nd");
    if (nw) out.emplace_back("nw");
    if (nemb) out.emplace_back("nemb");
    return out;
  }

  bool operator==(const Ablation&) const = default;
};

struct ModelConfig {
  int horizon = 1;      // H
  int width = 12;       // c
  int hops = 2;         // h
  int filters = 8;      // F
  int cpa_order = 5;    // K_em
  int gcn_order = 5;    // K_GCN
  int hidden = 36;
  int lstm_layers = 3;
  int fnn_layers = 3;
  int fusion_width = 36;
  int recent = 6;   // lr
  int daily = 4;    // ld
  int weekly = 2;   // lw
  int window_minutes = 60;
  Ablation ablation;

  void validate() const {
    auto positive = [](int v, const char* name) {
      if (v < 1) throw std::invalid_argument(std::string("model config: ") + name + " must be positive");
    };
    positive(horizon, "horizon");
    positive(width, "c");
    positive(hops, "hops");
    positive(filters, "filters");
    positive(cpa_order, "k_em");
    positive(gcn_order, "k_gcn");
    positive(hidden, "hidden");
    positive(lstm_layers, "lstm_layers");
    positive(fnn_layers, "fnn_layers");
    positive(fusion_width, "fusion_width");
    positive(recent, "lr");
    positive(window_minutes, "window_minutes");
    if (daily < 0 || weekly < 0) throw std::invalid_argument("model config: ld and lw must be >= 0");
    if (!ablation.nd && daily < 1) throw std::invalid_argument("model config: ld must be positive unless nd is set");
    if (!ablation.nw && weekly < 1) throw std::invalid_argument("model config: lw must be positive unless nw is set");
  }
};

}  // namespace mcan
