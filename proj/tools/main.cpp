#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "metadapt/config.hpp"
#include "metadapt/errors.hpp"
#include "metadapt/run_commands.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
};

metadapt::AppConfig resolve_config(const CommonOptions& options) {
  metadapt::AppConfig config = options.config_path.empty()
                                   ? metadapt::default_config()
                                   : metadapt::load_config(options.config_path);
  if (options.seed) config.pipeline.seed = *options.seed;
  if (options.mode) config.pipeline.mode = metadapt::parse_run_mode(*options.mode);
  if (!options.out_dir.empty()) config.output_dir = options.out_dir;
  return config;
}

void add_common(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("--config", options.config_path, "Path to the JSON config file");
  cmd->add_option("--out", options.out_dir, "Output directory (overrides output.dir)");
  cmd->add_option("--seed", options.seed, "Run seed (overrides training.seed)");
  cmd->add_option("--mode", options.mode,
                  "Run mode: doubleadapt, naive_il or rolling_retrain (overrides training.mode)");
}

const char* error_category(const std::exception& e) {
  if (dynamic_cast<const metadapt::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const metadapt::DataError*>(&e)) return "data";
  if (dynamic_cast<const metadapt::ScheduleError*>(&e)) return "schedule";
  if (dynamic_cast<const metadapt::DimensionError*>(&e)) return "dimension";
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming incremental learning with meta-learned data and model adapters"};
  app.require_subcommand(1);

  CommonOptions options;
  std::string checkpoint_dir;

  CLI::App* generate = app.add_subcommand("generate", "Emit a synthetic stream as CSV");
  add_common(generate, options);

  CLI::App* pretrain = app.add_subcommand("pretrain", "Offline training; writes checkpoints");
  add_common(pretrain, options);

  CLI::App* online = app.add_subcommand("online", "Online phase; writes report/predictions/metrics");
  add_common(online, options);
  online->add_option("--checkpoints", checkpoint_dir, "Directory with phi.json/psi.json");

  CLI::App* ablate = app.add_subcommand("ablate", "Component grid with stratified metrics");
  add_common(ablate, options);

  CLI::App* print_config = app.add_subcommand("print-config", "Print the effective configuration");
  add_common(print_config, options);

  CLI11_PARSE(app, argc, argv);

  try {
    metadapt::AppConfig config = resolve_config(options);
    const std::string out_dir = config.output_dir;
    if (generate->parsed()) {
      metadapt::cmd_generate(config, out_dir);
    } else if (pretrain->parsed()) {
      metadapt::cmd_pretrain(config, out_dir);
    } else if (online->parsed()) {
      metadapt::cmd_online(config, out_dir, checkpoint_dir);
    } else if (ablate->parsed()) {
      metadapt::cmd_ablate(config, out_dir);
    } else if (print_config->parsed()) {
      metadapt::cmd_print_config(config, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << error_category(e) << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
