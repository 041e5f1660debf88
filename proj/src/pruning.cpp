#include "badam/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "badam/csv.hpp"
#include "badam/errors.hpp"
#include "badam/parallel.hpp"

namespace badam {

std::string to_string(PruneCriterion c) { return c == PruneCriterion::snr ? "snr" : "magnitude_const_var"; }

PruneCriterion prune_criterion_from_string(const std::string& s) {
  if (s == "snr") return PruneCriterion::snr;
  if (s == "magnitude_const_var") return PruneCriterion::magnitude_const_var;
  throw ContractError("unknown prune criterion '" + s + "'");
}

void PruneSpec::validate() const {
  if (fractions.empty()) throw ContractError("prune.fractions must be nonempty");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] <= 1.0)) throw ContractError("prune.fractions must lie in [0, 1]");
    if (i > 0 && !(fractions[i] > fractions[i - 1]))
      throw ContractError("prune.fractions must be strictly ascending");
  }
  if (criteria.empty()) throw ContractError("prune.criteria must be nonempty");
  if (seeds.empty()) throw ContractError("seeds must be nonempty");
}

std::vector<double> prune_scores(const GaussianPosterior& post, PruneCriterion criterion) {
  if (criterion == PruneCriterion::snr) return signal_to_noise(post);
  std::vector<double> scores(post.size());
  for (std::size_t i = 0; i < post.size(); ++i) scores[i] = std::abs(post.mean[i]);
  return scores;
}

std::vector<std::size_t> prune_order(const GaussianPosterior& post, PruneCriterion criterion) {
  const auto scores = prune_scores(post, criterion);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

std::size_t prune_count(double p, std::size_t d) {
  if (!(p >= 0.0 && p <= 1.0)) throw ContractError("prune: fraction p must lie in [0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(d) + 1e-9));
  return std::min(k, d);
}

ParamVector prune_with_order(const GaussianPosterior& post, std::span<const std::size_t> order, double p) {
  if (order.size() != post.size()) throw ShapeError("prune: order length differs from posterior size");
  ParamVector out = post.mean_params();
  const std::size_t k = prune_count(p, post.size());
  for (std::size_t i = 0; i < k; ++i) out.values[order[i]] = 0.0;
  return out;
}

ParamVector prune(const GaussianPosterior& post, double p, PruneCriterion criterion) {
  prune_count(p, post.size());
  return prune_with_order(post, prune_order(post, criterion), p);
}

DualPhaseResult dual_phase_train(Network net, const LabeledDataset& train, const DualPhaseConfig& cfg, Rng& rng,
                                 const PhaseCallback& on_epoch) {
  const std::size_t d = net.params().size();
  MomentState phase1(d);
  train_epochs(net, phase1, cfg.phase1_opt, train, cfg.phase1_train, rng, [&](std::size_t e, double l) {
    if (on_epoch) on_epoch(1, e, l);
  });

  MomentState phase2(d);
  const std::uint64_t steps =
      train_epochs(net, phase2, cfg.phase2_opt, train, cfg.phase2_train, rng, [&](std::size_t e, double l) {
        if (on_epoch) on_epoch(2, e, l);
      });
  return {std::move(net), std::move(phase2), steps};
}

const PruneRow& PruneCurve::at(PruneCriterion c, double p) const {
  for (const auto& r : rows)
    if (r.criterion == c && r.p == p) return r;
  throw ContractError("PruneCurve: no row for " + to_string(c) + " at p=" + format_double(p));
}

std::vector<double> pruned_accuracies(const SeedPosterior& run, PruneCriterion criterion,
                                      std::span<const double> fractions, const LabeledDataset& test) {
  const auto order = prune_order(run.posterior, criterion);
  Network net = run.net;
  std::vector<double> acc;
  acc.reserve(fractions.size());
  for (double p : fractions) {
    net.set_params(prune_with_order(run.posterior, order, p));
    acc.push_back(accuracy(net, test));
  }
  return acc;
}

std::pair<double, double> mean_and_stderr(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

PruneCurve prune_curve(const std::function<SeedPosterior(std::uint64_t seed)>& train_seed, const PruneSpec& spec,
                       const LabeledDataset& test, std::size_t workers) {
  spec.validate();
  // per_seed[s][c][k] = accuracy of seed s, criterion c, fraction k
  const auto per_seed = parallel_map(spec.seeds.size(), workers, [&](std::size_t s) {
    const SeedPosterior run = train_seed(spec.seeds[s]);
    std::vector<std::vector<double>> acc;
    for (auto c : spec.criteria) acc.push_back(pruned_accuracies(run, c, spec.fractions, test));
    return acc;
  });

  PruneCurve curve;
  for (std::size_t c = 0; c < spec.criteria.size(); ++c) {
    for (std::size_t k = 0; k < spec.fractions.size(); ++k) {
      std::vector<double> xs;
      for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
        xs.push_back(per_seed[s][c][k]);
        curve.runs.push_back({spec.seeds[s], spec.criteria[c], spec.fractions[k], per_seed[s][c][k]});
      }
      const auto [mean, se] = mean_and_stderr(xs);
      curve.rows.push_back({spec.criteria[c], spec.fractions[k], mean, se});
    }
  }
  return curve;
}

void write_prune_curve_csv(const std::filesystem::path& path, const PruneCurve& curve) {
  CsvWriter csv(path, {"criterion", "p", "acc_mean", "acc_stderr"});
  for (const auto& r : curve.rows)
    csv.write_row({to_string(r.criterion), format_double(r.p), format_double(r.acc_mean), format_double(r.acc_stderr)});
}

void write_prune_runs_csv(const std::filesystem::path& path, const PruneCurve& curve) {
  CsvWriter csv(path, {"seed", "criterion", "p", "accuracy"});
  for (const auto& r : curve.runs)
    csv.write_row({std::to_string(r.seed), to_string(r.criterion), format_double(r.p), format_double(r.accuracy)});
}

}  // namespace badam
