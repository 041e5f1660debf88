#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "badam/bandit.hpp"
#include "badam/data.hpp"
#include "badam/optim.hpp"
#include "badam/posterior.hpp"
#include "badam/pruning.hpp"
#include "badam/training.hpp"

namespace badam {

enum class ExperimentKind { regress, prune, bandit, train };
enum class DataSource { regress, idx, csv };

std::string to_string(ExperimentKind k);

struct NetworkConfig {
  std::vector<std::size_t> hidden{100, 100};
  double dropout = 0.0;
  InitScheme init = InitScheme::fan_in;
  double init_scale = 0.0;
};

/// File-backed data. Relative paths are resolved against the directory of
/// the config file that named them.
struct DataConfig {
  DataSource source = DataSource::regress;
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  /// Keep only the first n rows (0 keeps all).
  std::size_t train_subset = 0;
  std::size_t test_subset = 0;
  std::filesystem::path csv_path;
  std::string csv_label;
  std::vector<std::string> csv_categorical;
  std::size_t csv_subsample = 0;
};

struct RegressConfig {
  RegressionTask task{};
  std::size_t predictive_samples = 100;
  /// Observation noise added in quadrature to the predictive std.
  double obs_noise = 0.0;
};

struct PruneConfig {
  std::vector<double> fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.98};
  std::vector<PruneCriterion> criteria{PruneCriterion::snr, PruneCriterion::magnitude_const_var};
  std::size_t phase2_epochs = 10;
  double phase2_beta2 = 0.9996;
  bool phase2_bias_correct_lr = false;
};

struct BanditSection {
  EnvKind env = EnvKind::wheel;
  WheelParams wheel{};
  std::size_t horizon = 5000;
  std::vector<AgentKind> agents{AgentKind::badam_thompson, AgentKind::mc_dropout, AgentKind::greedy,
                                AgentKind::uniform};
  std::size_t warmup_pulls = 3;
  std::size_t train_every = 20;
  std::size_t train_steps = 50;
  double greedy_beta1 = 0.0;
  double mc_dropout_rate = 0.5;
};

/// Everything one experiment run needs. There are no hidden defaults: the
/// JSON form written by to_json() reproduces the run on its own.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::regress;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "out";
  std::size_t workers = 1;

  NetworkConfig network{};
  OptimizerConfig optimizer{};
  TrainConfig training{};
  PriorConfig prior{};
  EffectiveN effective_n{};
  DataConfig data{};
  RegressConfig regress{};
  PruneConfig prune{};
  BanditSection bandit{};
};

/// Defaults for each experiment kind; keys given in a config file replace them.
ExperimentConfig defaults_for(ExperimentKind kind);

/// Parse or validation failure. what() joins all diagnostics, one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

/// Loads a config file (sectioned key = value text, or JSON when the file
/// starts with '{'), applies `overrides` ("key=value"; the section may be
/// omitted when the key name is unique), and validates the result.
/// Throws ConfigError listing every bad field.
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Same, from text already in memory. `base_dir` anchors relative paths.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                              const std::vector<std::string>& overrides = {}, const std::string& origin = "config");

/// Semantic checks (ranges, nonempty lists, paths the experiment reads).
/// Returns one diagnostic per problem; empty when valid.
std::vector<std::string> validate(const ExperimentConfig& cfg);

/// Full effective configuration, sections in a fixed order.
nlohmann::ordered_json to_json(const ExperimentConfig& cfg);

/// Fully qualified names of every recognised key, e.g. "optimizer.beta2".
std::vector<std::string> config_keys();

/// Pieces shared by the experiment runners.
std::vector<std::size_t> network_layers(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t output_dim);
BanditConfig bandit_config(const ExperimentConfig& cfg);
DualPhaseConfig dual_phase_config(const ExperimentConfig& cfg);

}  // namespace badam
