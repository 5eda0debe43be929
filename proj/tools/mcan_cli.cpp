#include "mcan/commands.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"Traffic-speed prediction with multi-fold correlation attention"};
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> ablations;
  std::vector<std::string> overrides;
  app.add_option("command", command, "generate | correlate | train | evaluate | predict")->required();
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "seed for generation, initialization and shuffling");
  app.add_option("--ablate", ablations, "ntr, nde, ntr-nde, nd, nw, nd-nw or nemb (repeatable)");
  app.add_option("--set", overrides, "override one config key, key=value (repeatable)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  mcan::RunConfig rc;
  try {
    if (!config_path.empty()) rc = mcan::load_run_config(config_path);
    for (const auto& o : overrides) mcan::apply_override(rc, o);
    if (seed) rc.seed = *seed;
    for (const auto& a : ablations) {
      try {
        rc.model.ablation.apply(a);
      } catch (const std::invalid_argument& ex) {
        throw mcan::UsageError(ex.what());
      }
    }
    mcan::run_command(command, rc, std::cout);
  } catch (const mcan::UsageError& ex) {
    std::cerr << "usage error: " << ex.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  }
  return 0;
}
