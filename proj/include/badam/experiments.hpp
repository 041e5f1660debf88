#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "badam/config.hpp"

namespace badam {

/// One line of metrics.csv. Steps are monotone within (experiment, seed).
struct MetricsRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::string metric;
  double value = 0.0;
};

/// Header experiment,seed,step,metric,value.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

using Logger = std::function<void(const std::string&)>;

// ---------------------------------------------------------------------------
// regress

/// Input windows for the uncertainty ratio: outside the training range
/// ((-0.5, 0) and (0.7, 1.2)) versus well inside it ((0.1, 0.4)).
struct StdWindows {
  double out_lo_a = -0.5, out_hi_a = 0.0;
  double out_lo_b = 0.7, out_hi_b = 1.2;
  double in_lo = 0.1, in_hi = 0.4;
};

struct RegressSeedResult {
  std::uint64_t seed = 0;
  std::vector<double> x;
  std::vector<double> pred_mean;
  std::vector<double> pred_std;
  std::vector<double> true_y;
  double std_in = 0.0;
  double std_out = 0.0;
  double test_mse = 0.0;
  std::vector<MetricsRow> metrics;

  double std_ratio() const { return std_out / std_in; }
};

/// Mean predictive std over the out-of-range and in-range windows (open
/// intervals). Throws ContractError if either window holds no grid point.
std::pair<double, double> window_std(std::span<const double> x, std::span<const double> std,
                                     const StdWindows& w = {});

RegressSeedResult run_regress_seed(const ExperimentConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// prune

struct PruneData {
  LabeledDataset train;
  LabeledDataset test;
};

PruneData load_prune_data(const ExperimentConfig& cfg);
/// Dual-phase training plus posterior extraction for one seed. Appends
/// per-epoch losses to `metrics` when given.
SeedPosterior train_prune_seed(const ExperimentConfig& cfg, const LabeledDataset& train, std::uint64_t seed,
                               std::vector<MetricsRow>* metrics = nullptr);

// ---------------------------------------------------------------------------
// runner

struct RunOutcome {
  std::filesystem::path output_dir;
  /// Files written, relative to output_dir, in the order written.
  std::vector<std::string> files;
};

/// Runs the configured experiment for every seed and writes its artifacts
/// plus config.resolved.json and metrics.csv into output_dir (created if
/// missing). BADAM_OUTPUT_DIR, when set, replaces output_dir.
RunOutcome run_experiment(ExperimentConfig cfg, const Logger& log = {});

}  // namespace badam
