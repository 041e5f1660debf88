#include "badam/experiments.hpp"

#include <cstdlib>
#include <fstream>
#include <numeric>

#include "badam/csv.hpp"
#include "badam/errors.hpp"
#include "badam/parallel.hpp"

namespace badam {

namespace fs = std::filesystem;

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
  CsvWriter csv(path, {"experiment", "seed", "step", "metric", "value"});
  for (const auto& r : rows)
    csv.write_row({r.experiment, std::to_string(r.seed), std::to_string(r.step), r.metric, format_double(r.value)});
}

namespace {

std::vector<SeedLabel> path(const char* experiment, std::uint64_t seed, const char* what) {
  return {std::string(experiment), static_cast<std::int64_t>(seed), std::string(what)};
}

/// Adds the experiment and seed to a numeric failure's message.
template <class Fn>
auto with_context(const std::string& where, Fn fn) {
  try {
    return fn();
  } catch (const NumericError& e) {
    throw NumericError(where + ": " + e.what());
  }
}

LabeledDataset first_rows(LabeledDataset data, std::size_t n) {
  if (n == 0 || n >= data.size()) return data;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return data.subset(idx);
}

void write_json(const fs::path& p, const nlohmann::ordered_json& doc) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw FormatError("cannot write " + p.string());
  out << doc.dump(2) << '\n';
}

void write_predictive_csv(const fs::path& p, const RegressSeedResult& r) {
  CsvWriter csv(p, {"x", "pred_mean", "pred_std", "true_y"});
  for (std::size_t i = 0; i < r.x.size(); ++i)
    csv.write_row({format_double(r.x[i]), format_double(r.pred_mean[i]), format_double(r.pred_std[i]),
                   format_double(r.true_y[i])});
}

}  // namespace

std::pair<double, double> window_std(std::span<const double> x, std::span<const double> std, const StdWindows& w) {
  if (x.size() != std.size()) throw ShapeError("window_std: x and std lengths differ");
  double out = 0.0, in = 0.0;
  std::size_t n_out = 0, n_in = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if ((x[i] > w.out_lo_a && x[i] < w.out_hi_a) || (x[i] > w.out_lo_b && x[i] < w.out_hi_b)) {
      out += std[i];
      ++n_out;
    } else if (x[i] > w.in_lo && x[i] < w.in_hi) {
      in += std[i];
      ++n_in;
    }
  }
  if (n_out == 0 || n_in == 0) throw ContractError("window_std: a window contains no test points");
  return {out / static_cast<double>(n_out), in / static_cast<double>(n_in)};
}

RegressSeedResult run_regress_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const std::uint64_t m = cfg.master_seed;
  Rng data_rng = derive_rng(m, path("regress", seed, "data"));
  Rng init_rng = derive_rng(m, path("regress", seed, "init"));
  Rng train_rng = derive_rng(m, path("regress", seed, "train"));
  Rng pred_rng = derive_rng(m, path("regress", seed, "predictive"));

  const RegressionData data = gen_regression(cfg.regress.task, data_rng);
  Network net(network_layers(cfg, 1, 1), OutputHead::linear, cfg.network.dropout);
  net.initialize(cfg.network.init, cfg.network.init_scale, init_rng);

  RegressSeedResult r;
  r.seed = seed;
  MomentState state(net.params().size());
  train_epochs(net, state, cfg.optimizer, data.train, cfg.training, train_rng, [&](std::size_t epoch, double loss) {
    r.metrics.push_back({"regress", seed, epoch + 1, "train_loss", loss});
  });

  const EffectiveN n = cfg.effective_n.resolve(state.t, cfg.training.batch_size);
  const GaussianPosterior post = extract_posterior(net.params(), state, cfg.optimizer, cfg.prior, n);
  const PredictiveMoments pm =
      predictive_sample(net, post, data.test_grid.features, cfg.regress.predictive_samples, cfg.regress.obs_noise,
                        pred_rng);

  const std::size_t g = data.test_grid.size();
  for (std::size_t i = 0; i < g; ++i) {
    r.x.push_back(data.test_grid.features(i, 0));
    r.pred_mean.push_back(pm.mean(i, 0));
    r.pred_std.push_back(pm.std(i, 0));
    r.true_y.push_back(data.test_grid.targets(i, 0));
  }
  std::tie(r.std_out, r.std_in) = window_std(r.x, r.pred_std);

  Network mean_net = net;
  mean_net.set_params(post.mean_params());
  r.test_mse = mean_squared_error(mean_net, data.test_grid);

  const std::uint64_t last = cfg.training.epochs + 1;
  r.metrics.push_back({"regress", seed, last, "effective_n", n.resolved});
  r.metrics.push_back({"regress", seed, last, "test_mse", r.test_mse});
  r.metrics.push_back({"regress", seed, last, "std_in", r.std_in});
  r.metrics.push_back({"regress", seed, last, "std_out", r.std_out});
  r.metrics.push_back({"regress", seed, last, "std_ratio", r.std_ratio()});
  return r;
}

PruneData load_prune_data(const ExperimentConfig& cfg) {
  PruneData d;
  d.train = first_rows(load_idx(cfg.data.train_images, cfg.data.train_labels), cfg.data.train_subset);
  d.test = first_rows(load_idx(cfg.data.test_images, cfg.data.test_labels), cfg.data.test_subset);
  d.test.split = Split::test;
  return d;
}

SeedPosterior train_prune_seed(const ExperimentConfig& cfg, const LabeledDataset& train, std::uint64_t seed,
                               std::vector<MetricsRow>* metrics) {
  Rng init_rng = derive_rng(cfg.master_seed, path("prune", seed, "init"));
  Rng train_rng = derive_rng(cfg.master_seed, path("prune", seed, "train"));

  Network net(network_layers(cfg, train.features.cols(), train.num_classes), OutputHead::softmax,
              cfg.network.dropout);
  net.initialize(cfg.network.init, cfg.network.init_scale, init_rng);
  const DualPhaseConfig dual = dual_phase_config(cfg);
  const std::uint64_t e1 = dual.phase1_train.epochs;
  DualPhaseResult res = dual_phase_train(std::move(net), train, dual, train_rng, [&](int phase, std::size_t e, double l) {
    if (metrics) metrics->push_back({"prune", seed, (phase == 1 ? 0 : e1) + e + 1, "train_loss", l});
  });

  const EffectiveN n = cfg.effective_n.resolve(res.phase2_steps, dual.phase2_train.batch_size);
  GaussianPosterior post = extract_posterior(res.net.params(), res.state, dual.phase2_opt, cfg.prior, n);
  if (metrics) metrics->push_back({"prune", seed, e1 + dual.phase2_train.epochs + 1, "effective_n", n.resolved});
  return {std::move(res.net), std::move(post)};
}

namespace {

void run_regress(const ExperimentConfig& cfg, const fs::path& out, RunOutcome& outcome,
                 std::vector<MetricsRow>& metrics, const Logger& log) {
  const auto results = parallel_map(cfg.seeds.size(), cfg.workers, [&](std::size_t i) {
    const auto seed = cfg.seeds[i];
    return with_context("regress seed " + std::to_string(seed), [&] { return run_regress_seed(cfg, seed); });
  });
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    if (log)
      log("regress seed " + std::to_string(r.seed) + ": std_out/std_in = " + format_double(r.std_ratio()) +
          ", test_mse = " + format_double(r.test_mse));
    metrics.insert(metrics.end(), r.metrics.begin(), r.metrics.end());
    const std::string name = "predictive_seed" + std::to_string(r.seed) + ".csv";
    write_predictive_csv(out / name, r);
    outcome.files.push_back(name);
  }
  write_predictive_csv(out / "predictive.csv", results.front());
  outcome.files.push_back("predictive.csv");
}

void run_prune(const ExperimentConfig& cfg, const fs::path& out, RunOutcome& outcome,
               std::vector<MetricsRow>& metrics, const Logger& log) {
  const PruneData data = load_prune_data(cfg);
  if (log)
    log("prune: " + std::to_string(data.train.size()) + " training and " + std::to_string(data.test.size()) +
        " test images");
  std::vector<std::vector<MetricsRow>> per_seed(cfg.seeds.size());
  const PruneSpec spec{cfg.prune.fractions, cfg.prune.criteria, cfg.seeds};
  const PruneCurve curve = prune_curve(
      [&](std::uint64_t seed) {
        const auto slot = static_cast<std::size_t>(std::find(cfg.seeds.begin(), cfg.seeds.end(), seed) -
                                                    cfg.seeds.begin());
        return with_context("prune seed " + std::to_string(seed),
                            [&] { return train_prune_seed(cfg, data.train, seed, &per_seed[slot]); });
      },
      spec, data.test, cfg.workers);
  for (const auto& rows : per_seed) metrics.insert(metrics.end(), rows.begin(), rows.end());
  for (const auto& r : curve.rows)
    if (log)
      log("prune " + to_string(r.criterion) + " p=" + format_double(r.p) + ": accuracy " + format_double(r.acc_mean) +
          " +- " + format_double(r.acc_stderr));
  write_prune_curve_csv(out / "prune_curve.csv", curve);
  write_prune_runs_csv(out / "prune_runs.csv", curve);
  outcome.files.push_back("prune_curve.csv");
  outcome.files.push_back("prune_runs.csv");
}

void run_bandit_experiment(const ExperimentConfig& cfg, const fs::path& out, RunOutcome& outcome,
                           std::vector<MetricsRow>& metrics, const Logger& log) {
  BanditConfig bc = bandit_config(cfg);
  if (bc.env == EnvKind::csv_dataset) {
    CsvSchema schema{cfg.data.csv_categorical, true, cfg.data.csv_subsample,
                     seed_derive(cfg.master_seed, {"bandit", "subsample"})};
    bc.dataset = load_csv(cfg.data.csv_path, cfg.data.csv_label, schema);
  }
  const auto results = with_context("bandit", [&] { return run_bandit(bc, cfg.master_seed, cfg.seeds, cfg.workers); });
  const std::uint64_t horizon = bc.env == EnvKind::wheel ? bc.horizon : std::min(bc.horizon, bc.dataset->size());
  for (const auto& r : results) {
    metrics.push_back({"bandit", r.seed, horizon, "cumulative_reward." + to_string(r.agent), r.cumulative_reward});
    metrics.push_back({"bandit", r.seed, horizon, "normalized_reward." + to_string(r.agent), r.normalized_reward});
  }
  write_bandit_csv(out / "bandit_results.csv", results);
  auto summary = bandit_summary(results);
  if (log)
    for (const auto& [agent, s] : summary["agents"].items())
      log("bandit " + agent + ": normalized reward " + format_double(s["normalized_reward_mean"].get<double>()) +
          " +- " + format_double(s["normalized_reward_stderr"].get<double>()));
  write_json(out / "bandit_summary.json", summary);
  outcome.files.push_back("bandit_results.csv");
  outcome.files.push_back("bandit_summary.json");
}

LabeledDataset load_train_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  switch (cfg.data.source) {
    case DataSource::regress: {
      Rng rng = derive_rng(cfg.master_seed, path("train", seed, "data"));
      return gen_regression(cfg.regress.task, rng).train;
    }
    case DataSource::idx:
      return first_rows(load_idx(cfg.data.train_images, cfg.data.train_labels), cfg.data.train_subset);
    case DataSource::csv: {
      CsvSchema schema{cfg.data.csv_categorical, true, cfg.data.csv_subsample,
                       seed_derive(cfg.master_seed, {"train", "subsample"})};
      return load_csv(cfg.data.csv_path, cfg.data.csv_label, schema);
    }
  }
  throw ContractError("unknown data source");
}

void run_train(const ExperimentConfig& cfg, const fs::path& out, RunOutcome& outcome,
               std::vector<MetricsRow>& metrics, const Logger& log) {
  struct SeedOut {
    std::vector<MetricsRow> metrics;
    nlohmann::ordered_json posterior;
  };
  const auto results = parallel_map(cfg.seeds.size(), cfg.workers, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    return with_context("train seed " + std::to_string(seed), [&] {
      const LabeledDataset data = load_train_data(cfg, seed);
      Rng init_rng = derive_rng(cfg.master_seed, path("train", seed, "init"));
      Rng train_rng = derive_rng(cfg.master_seed, path("train", seed, "train"));
      const bool cls = data.is_classification();
      Network net(network_layers(cfg, data.features.cols(), cls ? data.num_classes : data.targets.cols()),
                  cls ? OutputHead::softmax : OutputHead::linear, cfg.network.dropout);
      net.initialize(cfg.network.init, cfg.network.init_scale, init_rng);
      SeedOut so;
      MomentState state(net.params().size());
      train_epochs(net, state, cfg.optimizer, data, cfg.training, train_rng, [&](std::size_t e, double l) {
        so.metrics.push_back({"train", seed, e + 1, "train_loss", l});
      });
      const EffectiveN n = cfg.effective_n.resolve(state.t, cfg.training.batch_size);
      const GaussianPosterior post = extract_posterior(net.params(), state, cfg.optimizer, cfg.prior, n);
      Network mean_net = net;
      mean_net.set_params(post.mean_params());
      const std::uint64_t last = cfg.training.epochs + 1;
      so.metrics.push_back({"train", seed, last, "effective_n", n.resolved});
      so.metrics.push_back(cls ? MetricsRow{"train", seed, last, "train_accuracy", accuracy(mean_net, data)}
                               : MetricsRow{"train", seed, last, "train_mse", mean_squared_error(mean_net, data)});
      nlohmann::ordered_json meta;
      meta["layer_sizes"] = net.layer_sizes();
      meta["output_head"] = cls ? "softmax" : "linear";
      meta["seed"] = seed;
      meta["effective_n"] = n.resolved;
      meta["prior_sigma"] = cfg.prior.sigma;
      meta["prior_improper"] = cfg.prior.improper;
      so.posterior = posterior_to_json(post, std::move(meta));
      return so;
    });
  });
  for (std::size_t i = 0; i < results.size(); ++i) {
    metrics.insert(metrics.end(), results[i].metrics.begin(), results[i].metrics.end());
    if (log) log("train seed " + std::to_string(cfg.seeds[i]) + ": " + results[i].metrics.back().metric + " = " +
                 format_double(results[i].metrics.back().value));
    const std::string name = i == 0 ? "posterior.json" : "posterior_seed" + std::to_string(cfg.seeds[i]) + ".json";
    write_json(out / name, results[i].posterior);
    outcome.files.push_back(name);
  }
}

}  // namespace

RunOutcome run_experiment(ExperimentConfig cfg, const Logger& log) {
  if (const char* env = std::getenv("BADAM_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
  if (auto problems = validate(cfg); !problems.empty()) throw ConfigError(std::move(problems));

  RunOutcome outcome;
  outcome.output_dir = cfg.output_dir;
  fs::create_directories(cfg.output_dir);
  write_json(cfg.output_dir / "config.resolved.json", to_json(cfg));
  outcome.files.push_back("config.resolved.json");

  std::vector<MetricsRow> metrics;
  switch (cfg.kind) {
    case ExperimentKind::regress: run_regress(cfg, cfg.output_dir, outcome, metrics, log); break;
    case ExperimentKind::prune: run_prune(cfg, cfg.output_dir, outcome, metrics, log); break;
    case ExperimentKind::bandit: run_bandit_experiment(cfg, cfg.output_dir, outcome, metrics, log); break;
    case ExperimentKind::train: run_train(cfg, cfg.output_dir, outcome, metrics, log); break;
  }
  write_metrics_csv(cfg.output_dir / "metrics.csv", metrics);
  outcome.files.push_back("metrics.csv");
  return outcome;
}

}  // namespace badam
