#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "badam/config.hpp"
#include "badam/errors.hpp"
#include "badam/experiments.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
int report_config_error(const badam::ConfigError& e) {
  std::cerr << "invalid configuration:\n";
  for (const auto& d : e.diagnostics()) std::cerr << "  " << d << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-optimizer weight posteriors: regression, pruning and bandit experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t workers = 0;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file (sectioned key = value text, or JSON)")->required();
  run->add_option("--override", overrides, "Replace a config value, e.g. --override optimizer.eta=0.01")
      ->allow_extra_args(false);
  run->add_option("--workers", workers, "Seed-level worker threads (overrides experiment.workers)");
  run->add_flag("-q,--quiet", quiet, "Suppress progress messages");

  auto* validate = app.add_subcommand("validate", "Parse and check a config file without running it");
  validate->add_option("config", config_path, "Config file")->required();
  validate->add_option("--override", overrides, "Replace a config value")->allow_extra_args(false);

  app.add_subcommand("version", "Print the version");

  CLI11_PARSE(app, argc, argv);

  if (app.got_subcommand("version")) {
    std::cout << "badam " << kVersion << '\n';
    return 0;
  }

  if (workers > 0) overrides.push_back("experiment.workers=" + std::to_string(workers));

  try {
    const badam::ExperimentConfig cfg = badam::load_config(config_path, overrides);
    if (app.got_subcommand("validate")) {
      std::cout << badam::to_json(cfg).dump(2) << '\n';
      return 0;
    }
    badam::Logger log;
    if (!quiet) log = [](const std::string& msg) { std::cerr << msg << '\n'; };
    const auto outcome = badam::run_experiment(cfg, log);
    for (const auto& f : outcome.files) std::cout << (outcome.output_dir / f).string() << '\n';
    return 0;
  } catch (const badam::ConfigError& e) {
    return report_config_error(e);
  } catch (const badam::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
