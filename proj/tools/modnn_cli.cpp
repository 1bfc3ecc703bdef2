#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "modnn/modnn.h"

namespace {

int report(modnn_status s) {
  if (s != MODNN_OK) std::fprintf(stderr, "error: %s\n", modnn_last_error());
  return static_cast<int>(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physically consistent building thermal models: simulate, train, audit and control."};
  app.set_version_flag("--version", std::string(modnn_version()));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  const char* commands[][2] = {
      {"simulate", "Run the on-off baseline and write frame.csv"},
      {"train", "Train every configured model on frame.csv"},
      {"audit", "Consistency audit of every trained checkpoint"},
      {"control", "Closed-loop comparison of the baseline and MPC through each model"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Flat key = value experiment file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (default: out_dir from the config)");
    sub->add_option("--seed", seed, "Overrides the config seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return MODNN_ERR_CONFIG;
  }

  modnn_config* config = nullptr;
  if (modnn_status s = modnn_config_load(config_path.c_str(), &config); s != MODNN_OK) return report(s);
  modnn_status s = MODNN_OK;
  if (seed) s = modnn_config_set(config, "seed", std::to_string(*seed).c_str());
  if (s == MODNN_OK) {
    const std::string command = app.get_subcommands().front()->get_name();
    s = modnn_run(command.c_str(), config, out_dir.empty() ? nullptr : out_dir.c_str());
  }
  modnn_config_free(config);
  return report(s);
}
