#include "badam/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "badam/csv.hpp"
#include "badam/errors.hpp"
#include "badam/parallel.hpp"
#include "badam/pruning.hpp"

namespace badam {

void WheelParams::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw ContractError("bandit.delta must lie in (0, 1)");
  if (!(mu_high > mu_inner && mu_inner > mu_low))
    throw ContractError("bandit wheel means must satisfy mu_high > mu_inner > mu_low");
  if (!(reward_std > 0.0)) throw ContractError("bandit.reward_std must be positive");
}

WheelDraw wheel_means(const WheelParams& params, std::array<double, 2> context) {
  WheelDraw d;
  d.context = context;
  d.mean_rewards.fill(params.mu_low);
  d.mean_rewards[0] = params.mu_inner;
  const double r = std::hypot(context[0], context[1]);
  if (r <= params.delta) {
    d.optimal_action = 0;
    return d;
  }
  const bool east = context[0] > 0.0;
  const bool north = context[1] > 0.0;
  const std::size_t arm = east ? (north ? 1 : 2) : (north ? 3 : 4);
  d.mean_rewards[arm] = params.mu_high;
  d.optimal_action = arm;
  return d;
}

WheelDraw wheel_draw(const WheelParams& params, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double x = 0.0, y = 0.0;
  do {
    x = u(rng);
    y = u(rng);
  } while (x * x + y * y > 1.0);
  return wheel_means(params, {x, y});
}

BanditProblem make_wheel_problem(const WheelParams& params, std::size_t horizon, Rng& rng) {
  params.validate();
  BanditProblem p;
  p.kind = EnvKind::wheel;
  p.context_dim = 2;
  p.num_actions = kWheelArms;
  p.reward_std = params.reward_std;
  p.delta = params.delta;
  p.rounds.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const WheelDraw d = wheel_draw(params, rng);
    p.rounds.push_back({{d.context.begin(), d.context.end()},
                        {d.mean_rewards.begin(), d.mean_rewards.end()},
                        d.optimal_action});
  }
  return p;
}

BanditProblem make_csv_problem(const LabeledDataset& data, std::size_t horizon, Rng& rng) {
  if (!data.is_classification()) throw ContractError("csv_dataset bandit needs a classification dataset");
  if (data.size() == 0) throw ContractError("csv_dataset bandit: dataset is empty");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(horizon, order.size()));

  BanditProblem p;
  p.kind = EnvKind::csv_dataset;
  p.context_dim = data.features.cols();
  p.num_actions = data.num_classes;
  p.reward_std = 0.0;
  p.rounds.reserve(order.size());
  for (std::size_t i : order) {
    const auto row = data.features.row(i);
    BanditRound r{{row.begin(), row.end()}, std::vector<double>(p.num_actions, 0.0), data.labels[i]};
    r.mean_rewards[data.labels[i]] = 1.0;
    p.rounds.push_back(std::move(r));
  }
  return p;
}

void ReplayBuffer::add(std::span<const double> context, std::size_t action, double reward) {
  if (context.size() != dim_) throw ShapeError("ReplayBuffer: context dimension mismatch");
  contexts_.insert(contexts_.end(), context.begin(), context.end());
  actions_.push_back(action);
  rewards_.push_back(reward);
}

Minibatch ReplayBuffer::sample(std::size_t batch_size, std::size_t num_actions, Rng& rng) const {
  if (size() == 0) throw ContractError("ReplayBuffer: cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size() - 1);
  Matrix x(batch_size, dim_);
  Matrix y(batch_size, num_actions);
  Matrix mask(batch_size, num_actions);
  for (std::size_t r = 0; r < batch_size; ++r) {
    const std::size_t i = pick(rng);
    std::copy_n(contexts_.data() + i * dim_, dim_, x.row(r).data());
    y(r, actions_[i]) = rewards_[i];
    mask(r, actions_[i]) = 1.0;
  }
  return {std::move(x), Targets::masked(std::move(y), std::move(mask))};
}

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::badam_thompson: return "badam_thompson";
    case AgentKind::mc_dropout: return "mc_dropout";
    case AgentKind::greedy: return "greedy";
    case AgentKind::uniform: return "uniform";
  }
  return "?";
}

AgentKind agent_kind_from_string(const std::string& s) {
  for (auto k : {AgentKind::badam_thompson, AgentKind::mc_dropout, AgentKind::greedy, AgentKind::uniform})
    if (to_string(k) == s) return k;
  throw ContractError("unknown bandit agent '" + s + "'");
}

std::size_t UniformAgent::select(std::span<const double>, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, num_actions_ - 1)(rng);
}

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

Matrix single_row(std::span<const double> context) {
  Matrix x(1, context.size());
  std::copy(context.begin(), context.end(), x.row(0).begin());
  return x;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

NeuralAgent::NeuralAgent(AgentKind kind, std::size_t context_dim, std::size_t num_actions, NeuralAgentConfig cfg,
                         Rng& init_rng)
    : kind_(kind),
      cfg_(std::move(cfg)),
      net_(layer_sizes(context_dim, cfg_.hidden, num_actions), OutputHead::linear, cfg_.dropout) {
  if (kind == AgentKind::uniform) throw ContractError("NeuralAgent: uniform agent has no network");
  cfg_.optimizer.validate();
  cfg_.prior.validate();
  if (cfg_.prior.improper) throw ContractError("bandit agents need a proper prior (prior.improper = false)");
  if (cfg_.train_steps == 0 || cfg_.batch_size == 0)
    throw ContractError("bandit training needs train_steps > 0 and batch_size > 0");
  net_.initialize(cfg_.init, cfg_.init_scale, init_rng);
  state_ = MomentState(net_.params().size());
  sampled_ = Network(net_.layer_sizes(), OutputHead::linear, 0.0);

  // Before any data the posterior is the prior.
  const std::size_t d = net_.params().size();
  posterior_.shapes = net_.params().shapes;
  posterior_.mean.assign(d, 0.0);
  posterior_.variance.assign(d, cfg_.prior.sigma * cfg_.prior.sigma);
}

std::size_t NeuralAgent::select(std::span<const double> context, Rng& rng) {
  const Matrix x = single_row(context);
  switch (kind_) {
    case AgentKind::greedy: return argmax(predict(net_, x).row(0));
    case AgentKind::mc_dropout: return argmax(forward(net_, x, Mode::train, &rng).outputs.row(0));
    case AgentKind::badam_thompson:
      sample_weights_into(posterior_, rng, draw_);
      sampled_.set_params(draw_);
      return argmax(predict(sampled_, x).row(0));
    case AgentKind::uniform: break;
  }
  throw ContractError("NeuralAgent: bad kind");
}

void NeuralAgent::train(const ReplayBuffer& buffer, Rng& rng) {
  const std::size_t actions = net_.output_dim();
  for (std::size_t s = 0; s < cfg_.train_steps; ++s) {
    const Minibatch batch = buffer.sample(cfg_.batch_size, actions, rng);
    train_step(net_, state_, cfg_.optimizer, batch, LossKind::mse, cfg_.clip_norm, rng);
  }
  if (kind_ == AgentKind::badam_thompson) {
    const EffectiveN n = cfg_.effective_n.resolve(state_.t, cfg_.batch_size);
    posterior_ = extract_posterior(net_.params(), state_, cfg_.optimizer, cfg_.prior, n);
  }
}

std::unique_ptr<Agent> make_agent(AgentKind kind, const BanditProblem& problem, const NeuralAgentConfig& cfg,
                                  Rng& init_rng) {
  if (kind == AgentKind::uniform) return std::make_unique<UniformAgent>(problem.num_actions);
  return std::make_unique<NeuralAgent>(kind, problem.context_dim, problem.num_actions, cfg, init_rng);
}

AgentRun run_agent(const BanditProblem& problem, Agent& agent, const BanditLoopConfig& loop, Rng& noise_rng,
                   Rng& agent_rng) {
  const std::size_t arms = problem.num_actions;
  const std::size_t warmup = loop.warmup_pulls * arms;
  if (problem.horizon() < warmup) throw ContractError("bandit horizon is shorter than the warmup rounds");
  if (loop.train_every == 0) throw ContractError("bandit.train_every must be positive");

  ReplayBuffer buffer(problem.context_dim);
  std::normal_distribution<double> noise(0.0, 1.0);
  AgentRun run;
  run.pull_counts.assign(arms, 0);
  run.actions.reserve(problem.horizon());
  for (std::size_t t = 0; t < problem.horizon(); ++t) {
    const BanditRound& round = problem.rounds[t];
    const std::size_t a = t < warmup ? t % arms : agent.select(round.context, agent_rng);
    // One draw per round regardless of the action keeps the stream aligned.
    const double reward = round.mean_rewards[a] + problem.reward_std * noise(noise_rng);
    buffer.add(round.context, a, reward);
    run.cumulative_reward += reward;
    run.optimal_reward += round.mean_rewards[round.optimal_action];
    ++run.pull_counts[a];
    run.actions.push_back(a);
    if ((t + 1) % loop.train_every == 0) agent.train(buffer, agent_rng);
  }
  run.normalized_reward = run.cumulative_reward / run.optimal_reward;
  return run;
}

NeuralAgentConfig agent_config_for(AgentKind kind, const BanditConfig& cfg) {
  NeuralAgentConfig c = cfg.neural;
  if (kind == AgentKind::greedy) c.optimizer.beta1 = cfg.greedy_beta1;
  if (kind == AgentKind::mc_dropout) c.dropout = cfg.mc_dropout_rate;
  return c;
}

std::vector<BanditResult> run_bandit(const BanditConfig& cfg, std::uint64_t master_seed,
                                     std::span<const std::uint64_t> seeds, std::size_t workers) {
  if (cfg.agents.empty()) throw ContractError("bandit.agents must be nonempty");
  if (cfg.horizon == 0) throw ContractError("bandit.horizon must be positive");
  if (cfg.env == EnvKind::csv_dataset && !cfg.dataset) throw ContractError("csv_dataset bandit needs a dataset");

  std::vector<BanditProblem> problems;
  for (std::uint64_t seed : seeds) {
    Rng ctx = derive_rng(master_seed, {"bandit", "context", static_cast<std::int64_t>(seed)});
    problems.push_back(cfg.env == EnvKind::wheel ? make_wheel_problem(cfg.wheel, cfg.horizon, ctx)
                                                 : make_csv_problem(*cfg.dataset, cfg.horizon, ctx));
  }

  const std::size_t n_agents = cfg.agents.size();
  return parallel_map(seeds.size() * n_agents, workers, [&](std::size_t job) {
    const std::size_t s = job / n_agents;
    const std::size_t a = job % n_agents;
    const auto seed = static_cast<std::int64_t>(seeds[s]);
    const auto idx = static_cast<std::int64_t>(a);
    Rng noise = derive_rng(master_seed, {"bandit", "noise", seed, idx});
    Rng agent_rng = derive_rng(master_seed, {"bandit", "agent", seed, idx});
    const AgentKind kind = cfg.agents[a];
    auto agent = make_agent(kind, problems[s], agent_config_for(kind, cfg), agent_rng);
    const AgentRun run = run_agent(problems[s], *agent, cfg.loop, noise, agent_rng);
    return BanditResult{kind, problems[s].env_name(), problems[s].delta, seeds[s], run.cumulative_reward,
                        run.normalized_reward};
  });
}

void write_bandit_csv(const std::filesystem::path& path, std::span<const BanditResult> results) {
  CsvWriter csv(path, {"agent", "env", "delta", "seed", "cumulative_reward", "normalized_reward"});
  for (const auto& r : results)
    csv.write_row({to_string(r.agent), r.env, format_double(r.delta), std::to_string(r.seed),
                   format_double(r.cumulative_reward), format_double(r.normalized_reward)});
}

nlohmann::ordered_json bandit_summary(std::span<const BanditResult> results) {
  std::vector<AgentKind> order;
  std::map<AgentKind, std::vector<double>> normalized, cumulative;
  for (const auto& r : results) {
    if (!normalized.contains(r.agent)) order.push_back(r.agent);
    normalized[r.agent].push_back(r.normalized_reward);
    cumulative[r.agent].push_back(r.cumulative_reward);
  }
  nlohmann::ordered_json doc;
  if (!results.empty()) {
    doc["env"] = results.front().env;
    doc["delta"] = results.front().delta;
  }
  doc["normalization"] = "realized cumulative reward / sum over rounds of the optimal arm's mean reward";
  doc["warmup_rewards_counted"] = true;
  nlohmann::ordered_json agents = nlohmann::ordered_json::object();
  for (auto k : order) {
    const auto [nm, nse] = mean_and_stderr(normalized[k]);
    const auto [cm, cse] = mean_and_stderr(cumulative[k]);
    agents[to_string(k)] = {{"runs", normalized[k].size()},
                            {"normalized_reward_mean", nm},
                            {"normalized_reward_stderr", nse},
                            {"cumulative_reward_mean", cm},
                            {"cumulative_reward_stderr", cse}};
  }
  doc["agents"] = std::move(agents);
  return doc;
}

double wheel_uniform_expected_normalized(const WheelParams& params) {
  // Inside the delta-disk (area fraction delta^2) only arm 0 beats mu_low;
  // outside it one quadrant arm pays mu_high.
  const double inner = params.delta * params.delta;
  const double k = static_cast<double>(kWheelArms);
  const double uniform_in = (params.mu_inner + (k - 1.0) * params.mu_low) / k;
  const double uniform_out = (params.mu_inner + params.mu_high + (k - 2.0) * params.mu_low) / k;
  const double optimal_in = params.mu_inner;
  const double optimal_out = std::max(params.mu_high, params.mu_inner);
  return (inner * uniform_in + (1.0 - inner) * uniform_out) / (inner * optimal_in + (1.0 - inner) * optimal_out);
}

}  // namespace badam
