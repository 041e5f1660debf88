#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "badam/data.hpp"
#include "badam/posterior.hpp"
#include "badam/training.hpp"

namespace badam {

/// snr: rank by |mean| / std. magnitude_const_var: rank by |mean|, i.e. the
/// same posterior means with every variance set to 1.
enum class PruneCriterion { snr, magnitude_const_var };

std::string to_string(PruneCriterion c);
PruneCriterion prune_criterion_from_string(const std::string& s);

struct PruneSpec {
  std::vector<double> fractions;
  std::vector<PruneCriterion> criteria{PruneCriterion::snr, PruneCriterion::magnitude_const_var};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  /// Fractions strictly ascending within [0, 1]; seeds and criteria nonempty.
  void validate() const;
};

/// Per-coordinate ranking score under `criterion`.
std::vector<double> prune_scores(const GaussianPosterior& post, PruneCriterion criterion);
/// Coordinates ordered by ascending score, ties by ascending index.
std::vector<std::size_t> prune_order(const GaussianPosterior& post, PruneCriterion criterion);
/// floor(p * d), with a 1e-9 guard against representation error in p.
std::size_t prune_count(double p, std::size_t d);

/// Posterior mean with the floor(p * d) lowest-scoring coordinates zeroed.
ParamVector prune(const GaussianPosterior& post, double p, PruneCriterion criterion);
/// Same, reusing a precomputed prune_order.
ParamVector prune_with_order(const GaussianPosterior& post, std::span<const std::size_t> order, double p);

/// Two training phases on the same weights. Phase 2 starts from fresh
/// (zero) moments and is meant to collect curvature near the optimum.
struct DualPhaseConfig {
  TrainConfig phase1_train{.epochs = 100, .batch_size = 128};
  OptimizerConfig phase1_opt{};
  TrainConfig phase2_train{.epochs = 50, .batch_size = 128};
  OptimizerConfig phase2_opt{.beta2 = 0.99996, .bias_correct_lr = false};
};

struct DualPhaseResult {
  Network net;
  MomentState state;
  /// Optimizer steps of phase 2, the count the t x batch heuristic uses.
  std::uint64_t phase2_steps = 0;
};

using PhaseCallback = std::function<void(int phase, std::size_t epoch, double mean_loss)>;

DualPhaseResult dual_phase_train(Network net, const LabeledDataset& train, const DualPhaseConfig& cfg, Rng& rng,
                                 const PhaseCallback& on_epoch = {});

/// What one seed's training run hands to the pruning evaluation.
struct SeedPosterior {
  Network net;
  GaussianPosterior posterior;
};

struct PruneRow {
  PruneCriterion criterion;
  double p = 0.0;
  double acc_mean = 0.0;
  double acc_stderr = 0.0;
};

struct PruneRun {
  std::uint64_t seed = 0;
  PruneCriterion criterion;
  double p = 0.0;
  double accuracy = 0.0;
};

struct PruneCurve {
  std::vector<PruneRow> rows;
  /// Unaggregated accuracies, one per (seed, criterion, p).
  std::vector<PruneRun> runs;

  const PruneRow& at(PruneCriterion c, double p) const;
};

/// Test accuracy of the pruned posterior mean at each fraction.
std::vector<double> pruned_accuracies(const SeedPosterior& run, PruneCriterion criterion,
                                      std::span<const double> fractions, const LabeledDataset& test);

/// Trains one model per seed via `train_seed`, prunes, evaluates, and
/// aggregates mean and standard error over seeds. Seeds run on up to
/// `workers` threads.
PruneCurve prune_curve(const std::function<SeedPosterior(std::uint64_t seed)>& train_seed, const PruneSpec& spec,
                       const LabeledDataset& test, std::size_t workers = 1);

/// Header criterion,p,acc_mean,acc_stderr.
void write_prune_curve_csv(const std::filesystem::path& path, const PruneCurve& curve);
/// Header seed,criterion,p,accuracy.
void write_prune_runs_csv(const std::filesystem::path& path, const PruneCurve& curve);

/// Sample mean and standard error (n - 1 denominator; 0 when n == 1).
std::pair<double, double> mean_and_stderr(std::span<const double> xs);

}  // namespace badam
