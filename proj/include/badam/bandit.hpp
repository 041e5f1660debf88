#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "badam/data.hpp"
#include "badam/posterior.hpp"
#include "badam/training.hpp"

namespace badam {

// ---------------------------------------------------------------------------
// Environments

/// Wheel bandit: contexts uniform on the unit disk, five arms. Arm 0 always
/// pays mu_inner. Outside radius delta the arm matching the context's
/// quadrant pays mu_high; every other arm pays mu_low.
///   arm 1: x > 0, y > 0    arm 2: x > 0, y <= 0
///   arm 3: x <= 0, y > 0   arm 4: x <= 0, y <= 0
struct WheelParams {
  double delta = 0.5;
  double mu_inner = 1.2;
  double mu_low = 1.0;
  double mu_high = 50.0;
  double reward_std = 0.01;

  void validate() const;
};

inline constexpr std::size_t kWheelArms = 5;

struct WheelDraw {
  std::array<double, 2> context{};
  std::array<double, kWheelArms> mean_rewards{};
  std::size_t optimal_action = 0;
};

WheelDraw wheel_draw(const WheelParams& params, Rng& rng);
/// Mean rewards and optimal arm for a given context.
WheelDraw wheel_means(const WheelParams& params, std::array<double, 2> context);

/// One round of a contextual bandit. Realized reward of arm a is
/// mean_rewards[a] + reward_std * N(0, 1).
struct BanditRound {
  std::vector<double> context;
  std::vector<double> mean_rewards;
  std::size_t optimal_action = 0;
};

enum class EnvKind { wheel, csv_dataset };

/// A fully drawn context stream. Every agent of a run sees the same rounds.
struct BanditProblem {
  EnvKind kind = EnvKind::wheel;
  std::size_t context_dim = 0;
  std::size_t num_actions = 0;
  double reward_std = 0.0;
  double delta = 0.0;
  std::vector<BanditRound> rounds;

  std::size_t horizon() const { return rounds.size(); }
  std::string env_name() const { return kind == EnvKind::wheel ? "wheel" : "csv_dataset"; }
};

BanditProblem make_wheel_problem(const WheelParams& params, std::size_t horizon, Rng& rng);
/// One pass over a shuffled classification dataset: one arm per class,
/// reward 1 for the true class and 0 otherwise. Horizon is capped at the
/// dataset size.
BanditProblem make_csv_problem(const LabeledDataset& data, std::size_t horizon, Rng& rng);

// ---------------------------------------------------------------------------
// Replay buffer

/// Append-only store of (context, action, reward).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t context_dim) : dim_(context_dim) {}

  void add(std::span<const double> context, std::size_t action, double reward);
  std::size_t size() const { return actions_.size(); }
  std::size_t context_dim() const { return dim_; }
  std::span<const double> context(std::size_t i) const { return {contexts_.data() + i * dim_, dim_}; }
  std::size_t action(std::size_t i) const { return actions_[i]; }
  double reward(std::size_t i) const { return rewards_[i]; }

  /// `batch_size` rows drawn with replacement. Targets are masked so only
  /// the chosen action's output carries a loss.
  Minibatch sample(std::size_t batch_size, std::size_t num_actions, Rng& rng) const;

 private:
  std::size_t dim_;
  std::vector<double> contexts_;
  std::vector<std::size_t> actions_;
  std::vector<double> rewards_;
};

// ---------------------------------------------------------------------------
// Agents

enum class AgentKind { badam_thompson, mc_dropout, greedy, uniform };

std::string to_string(AgentKind kind);
AgentKind agent_kind_from_string(const std::string& s);

struct NeuralAgentConfig {
  std::vector<std::size_t> hidden{100, 100};
  InitScheme init = InitScheme::uniform;
  double init_scale = 0.3;
  /// Adam, initial rate 0.1 with inverse-sqrt decay.
  OptimizerConfig optimizer{.eta = 0.1, .lr_schedule = LrSchedule::inverse_decay};
  double clip_norm = 5.0;
  /// Minibatches per training event and their size.
  std::size_t train_steps = 50;
  std::size_t batch_size = 512;
  double dropout = 0.0;
  PriorConfig prior{.sigma = 0.2};
  EffectiveN effective_n{};
};

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentKind kind() const = 0;
  /// Chooses an action for the context (the Thompson step for BADAM).
  virtual std::size_t select(std::span<const double> context, Rng& rng) = 0;
  /// Retrains from the buffer. Non-learning agents ignore it.
  virtual void train(const ReplayBuffer& buffer, Rng& rng) = 0;
};

class UniformAgent final : public Agent {
 public:
  explicit UniformAgent(std::size_t num_actions) : num_actions_(num_actions) {}
  AgentKind kind() const override { return AgentKind::uniform; }
  std::size_t select(std::span<const double> context, Rng& rng) override;
  void train(const ReplayBuffer&, Rng&) override {}

 private:
  std::size_t num_actions_;
};

/// Network regressing context -> per-action reward. The kind picks how an
/// action is chosen: greedy (eval forward), mc_dropout (one train-mode
/// forward), badam_thompson (one posterior weight draw, then eval forward).
class NeuralAgent final : public Agent {
 public:
  NeuralAgent(AgentKind kind, std::size_t context_dim, std::size_t num_actions, NeuralAgentConfig cfg, Rng& init_rng);

  AgentKind kind() const override { return kind_; }
  std::size_t select(std::span<const double> context, Rng& rng) override;
  void train(const ReplayBuffer& buffer, Rng& rng) override;

  const Network& network() const { return net_; }
  const MomentState& moments() const { return state_; }
  /// Current BADAM posterior; before the first training event this is the
  /// prior N(0, sigma^2 I).
  const GaussianPosterior& posterior() const { return posterior_; }
  /// Replace the posterior (tests use this to pin a point mass).
  void set_posterior(GaussianPosterior post) { posterior_ = std::move(post); }

 private:
  AgentKind kind_;
  NeuralAgentConfig cfg_;
  Network net_;
  Network sampled_;
  ParamVector draw_;
  MomentState state_;
  GaussianPosterior posterior_;
};

std::unique_ptr<Agent> make_agent(AgentKind kind, const BanditProblem& problem, const NeuralAgentConfig& cfg,
                                  Rng& init_rng);

// ---------------------------------------------------------------------------
// Run loop

struct BanditLoopConfig {
  /// Round-robin pulls of every arm before the agent chooses.
  std::size_t warmup_pulls = 3;
  /// Train every this many rounds.
  std::size_t train_every = 20;
};

struct AgentRun {
  double cumulative_reward = 0.0;
  /// Sum over rounds of the optimal arm's mean reward.
  double optimal_reward = 0.0;
  double normalized_reward = 0.0;
  std::vector<std::size_t> pull_counts;
  std::vector<std::size_t> actions;
};

/// Plays every round of `problem` with one agent. `noise_rng` drives the
/// reward noise, `agent_rng` the agent's own sampling and training.
AgentRun run_agent(const BanditProblem& problem, Agent& agent, const BanditLoopConfig& loop, Rng& noise_rng,
                   Rng& agent_rng);

struct BanditConfig {
  EnvKind env = EnvKind::wheel;
  WheelParams wheel{};
  std::size_t horizon = 5000;
  std::vector<AgentKind> agents{AgentKind::badam_thompson, AgentKind::mc_dropout, AgentKind::greedy,
                                AgentKind::uniform};
  BanditLoopConfig loop{};
  NeuralAgentConfig neural{};
  /// beta1 used by the greedy agent (0 gives RMSProp).
  double greedy_beta1 = 0.0;
  double mc_dropout_rate = 0.5;
  /// Dataset for EnvKind::csv_dataset.
  std::optional<LabeledDataset> dataset;
};

struct BanditResult {
  AgentKind agent;
  std::string env;
  double delta = 0.0;
  std::uint64_t seed = 0;
  double cumulative_reward = 0.0;
  double normalized_reward = 0.0;
};

/// Agent configuration actually used for `kind` (greedy and mc_dropout
/// override beta1 or dropout).
NeuralAgentConfig agent_config_for(AgentKind kind, const BanditConfig& cfg);

/// Runs every agent on every seed. Streams derive from the master seed:
/// contexts from (master, "bandit", "context", seed), reward noise from
/// (..., "noise", seed, agent index), agent randomness from
/// (..., "agent", seed, agent index). Results are ordered by seed, then agent.
std::vector<BanditResult> run_bandit(const BanditConfig& cfg, std::uint64_t master_seed,
                                     std::span<const std::uint64_t> seeds, std::size_t workers = 1);

/// Header agent,env,delta,seed,cumulative_reward,normalized_reward.
void write_bandit_csv(const std::filesystem::path& path, std::span<const BanditResult> results);
/// Per-agent mean and standard error of the normalized reward.
nlohmann::ordered_json bandit_summary(std::span<const BanditResult> results);

/// Expected normalized reward of the uniform policy on the wheel, from the
/// disk-area split: E[sum r] / E[sum r*].
double wheel_uniform_expected_normalized(const WheelParams& params);

}  // namespace badam
