#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "badam/bandit.hpp"
#include "badam/errors.hpp"

using namespace badam;

namespace {

// Plays the optimal arm of every wheel context, read off the true means.
class OracleAgent final : public Agent {
 public:
  explicit OracleAgent(WheelParams p) : params_(p) {}
  AgentKind kind() const override { return AgentKind::uniform; }
  std::size_t select(std::span<const double> ctx, Rng&) override {
    return wheel_means(params_, {ctx[0], ctx[1]}).optimal_action;
  }
  void train(const ReplayBuffer&, Rng&) override {}

 private:
  WheelParams params_;
};

// Records the buffer at every training event and checks that earlier
// entries never change.
class RecordingAgent final : public Agent {
 public:
  explicit RecordingAgent(std::size_t arms) : arms_(arms) {}
  AgentKind kind() const override { return AgentKind::uniform; }
  std::size_t select(std::span<const double>, Rng& rng) override {
    std::uniform_int_distribution<std::size_t> pick(0, arms_ - 1);
    return pick(rng);
  }
  void train(const ReplayBuffer& buffer, Rng&) override {
    sizes.push_back(buffer.size());
    for (std::size_t i = 0; i < seen_actions.size(); ++i) {
      if (buffer.action(i) != seen_actions[i] || buffer.reward(i) != seen_rewards[i]) mutated = true;
    }
    for (std::size_t i = seen_actions.size(); i < buffer.size(); ++i) {
      seen_actions.push_back(buffer.action(i));
      seen_rewards.push_back(buffer.reward(i));
    }
  }

  std::vector<std::size_t> sizes;
  std::vector<std::size_t> seen_actions;
  std::vector<double> seen_rewards;
  bool mutated = false;

 private:
  std::size_t arms_;
};

NeuralAgentConfig small_config() {
  NeuralAgentConfig c;
  c.hidden = {16};
  c.batch_size = 64;
  c.train_steps = 20;
  return c;
}

}  // namespace

TEST_CASE("wheel means by region") {
  const WheelParams p;
  const auto inner = wheel_means(p, {0.1, -0.2});
  CHECK(inner.optimal_action == 0);
  CHECK(inner.mean_rewards[0] == 1.2);
  for (std::size_t a = 1; a < kWheelArms; ++a) CHECK(inner.mean_rewards[a] == 1.0);

  const std::array<std::pair<std::array<double, 2>, std::size_t>, 4> quadrants{
      {{{0.6, 0.6}, 1}, {{0.6, -0.6}, 2}, {{-0.6, 0.6}, 3}, {{-0.6, -0.6}, 4}}};
  for (const auto& [ctx, arm] : quadrants) {
    const auto d = wheel_means(p, ctx);
    CHECK(d.optimal_action == arm);
    CHECK(d.mean_rewards[arm] == 50.0);
    CHECK(d.mean_rewards[0] == 1.2);
  }
}

TEST_CASE("wheel contexts lie in the unit disk with the area-ratio inner fraction") {
  const WheelParams p;
  Rng rng(1);
  const std::size_t n = 100000;
  std::size_t inner = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto d = wheel_draw(p, rng);
    const double r = std::hypot(d.context[0], d.context[1]);
    CHECK(r <= 1.0);
    const auto best = std::max_element(d.mean_rewards.begin(), d.mean_rewards.end()) - d.mean_rewards.begin();
    CHECK(static_cast<std::size_t>(best) == d.optimal_action);
    if (r <= p.delta) {
      ++inner;
      CHECK(d.optimal_action == 0);
    }
  }
  const double q = p.delta * p.delta;
  CHECK(std::abs(static_cast<double>(inner) / n - q) <= 3 * std::sqrt(q * (1 - q) / n));
}

TEST_CASE("jackpot contexts vanish as delta approaches one") {
  Rng rng(2);
  WheelParams p{.delta = 0.99};
  std::size_t jackpot = 0;
  for (int i = 0; i < 20000; ++i) jackpot += wheel_draw(p, rng).optimal_action != 0;
  CHECK(static_cast<double>(jackpot) / 20000 < 0.03);
}

TEST_CASE("wheel parameter validation") {
  CHECK_NOTHROW(WheelParams{}.validate());
  CHECK_THROWS_AS((WheelParams{.delta = 1.0}.validate()), ContractError);
  CHECK_THROWS_AS((WheelParams{.mu_inner = 60.0}.validate()), ContractError);
  CHECK_THROWS_AS((WheelParams{.reward_std = 0.0}.validate()), ContractError);
}

TEST_CASE("uniform agent frequencies") {
  UniformAgent agent(5);
  Rng rng(3);
  std::array<std::size_t, 5> counts{};
  const std::size_t n = 10000;
  const std::vector<double> ctx{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) ++counts[agent.select(ctx, rng)];
  const double sd = std::sqrt(0.2 * 0.8 / n);
  for (auto c : counts) CHECK(std::abs(static_cast<double>(c) / n - 0.2) <= 3 * sd);
}

TEST_CASE("uniform closed form agrees with Monte Carlo over the mean rewards") {
  const WheelParams p;
  Rng rng(4);
  double uniform = 0.0, optimal = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const auto d = wheel_draw(p, rng);
    double s = 0.0;
    for (double m : d.mean_rewards) s += m;
    uniform += s / kWheelArms;
    optimal += d.mean_rewards[d.optimal_action];
  }
  CHECK(wheel_uniform_expected_normalized(p) == doctest::Approx(uniform / optimal).epsilon(0.01));
  CHECK(wheel_uniform_expected_normalized(p) == doctest::Approx(0.222).epsilon(0.01));
}

TEST_CASE("oracle agent scores exactly one under mean-based normalization") {
  const WheelParams p;
  Rng rng(5);
  BanditProblem problem = make_wheel_problem(p, 2000, rng);
  problem.reward_std = 0.0;
  OracleAgent oracle(p);
  Rng noise(6), agent_rng(7);
  const auto run = run_agent(problem, oracle, {.warmup_pulls = 0, .train_every = 20}, noise, agent_rng);
  CHECK(run.normalized_reward == 1.0);

  // Any other policy stays below one.
  UniformAgent uniform(kWheelArms);
  const auto u = run_agent(problem, uniform, {}, noise, agent_rng);
  CHECK(u.normalized_reward < 1.0);
}

TEST_CASE("warmup coverage and buffer growth") {
  const WheelParams p;
  Rng rng(8);
  const auto problem = make_wheel_problem(p, 400, rng);
  RecordingAgent agent(kWheelArms);
  Rng noise(9), agent_rng(10);
  const auto run = run_agent(problem, agent, {.warmup_pulls = 3, .train_every = 20}, noise, agent_rng);
  for (std::size_t t = 0; t < 15; ++t) CHECK(run.actions[t] == t % 5);
  for (auto c : run.pull_counts) CHECK(c >= 3);
  REQUIRE(agent.sizes.size() == 20);
  for (std::size_t i = 0; i < agent.sizes.size(); ++i) CHECK(agent.sizes[i] == 20 * (i + 1));
  CHECK_FALSE(agent.mutated);
  CHECK(run.actions.size() == 400);

  std::size_t total = 0;
  for (auto c : run.pull_counts) total += c;
  CHECK(total == 400);
  CHECK_THROWS_AS(run_agent(make_wheel_problem(p, 10, rng), agent, {}, noise, agent_rng), ContractError);
}

TEST_CASE("replay sampling draws full masked batches with replacement") {
  ReplayBuffer buf(2);
  buf.add(std::vector<double>{0.1, 0.2}, 0, 1.5);
  buf.add(std::vector<double>{-0.3, 0.4}, 3, -2.0);
  buf.add(std::vector<double>{0.5, 0.6}, 1, 7.0);
  CHECK(buf.size() == 3);
  CHECK_THROWS_AS(buf.add(std::vector<double>{1.0}, 0, 0.0), ShapeError);

  Rng rng(11);
  const Minibatch b = buf.sample(512, 5, rng);
  CHECK(b.inputs.rows() == 512);
  CHECK(b.targets.values.rows() == 512);
  CHECK(b.targets.is_masked());
  std::array<std::size_t, 3> hits{};
  for (std::size_t r = 0; r < 512; ++r) {
    std::size_t src = 3;
    for (std::size_t i = 0; i < 3; ++i)
      if (b.inputs(r, 0) == buf.context(i)[0] && b.inputs(r, 1) == buf.context(i)[1]) src = i;
    REQUIRE(src < 3);
    ++hits[src];
    double mask_sum = 0.0;
    for (std::size_t a = 0; a < 5; ++a) mask_sum += b.targets.mask(r, a);
    CHECK(mask_sum == 1.0);
    CHECK(b.targets.mask(r, buf.action(src)) == 1.0);
    CHECK(b.targets.values(r, buf.action(src)) == buf.reward(src));
  }
  for (auto h : hits) CHECK(h > 100);
  CHECK_THROWS_AS(ReplayBuffer(2).sample(4, 5, rng), ContractError);
}

TEST_CASE("point-mass posterior makes Thompson sampling greedy") {
  Rng init_a(12), init_b(12);
  auto cfg = small_config();
  NeuralAgent thompson(AgentKind::badam_thompson, 2, 5, cfg, init_a);
  NeuralAgent greedy(AgentKind::greedy, 2, 5, cfg, init_b);
  REQUIRE(thompson.network().params() == greedy.network().params());

  // Before training the posterior is the prior.
  for (std::size_t i = 0; i < thompson.posterior().size(); ++i) {
    CHECK(thompson.posterior().mean[i] == 0.0);
    CHECK(thompson.posterior().variance[i] == doctest::Approx(0.04));
  }

  GaussianPosterior point;
  point.shapes = greedy.network().params().shapes;
  point.mean = greedy.network().params().values;
  point.variance.assign(point.mean.size(), 0.0);
  thompson.set_posterior(point);

  Rng rng(13), ctx_rng(14);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> ctx{u(ctx_rng), u(ctx_rng)};
    CHECK(thompson.select(ctx, rng) == greedy.select(ctx, rng));
  }
}

TEST_CASE("Thompson agent picks the better arm on a two-arm toy problem") {
  // Arm 0 pays 1 when x > 0 and 0 otherwise; arm 1 the reverse.
  Rng rng(15);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BanditProblem problem;
  problem.kind = EnvKind::csv_dataset;
  problem.context_dim = 1;
  problem.num_actions = 2;
  problem.reward_std = 0.05;
  for (int t = 0; t < 1000; ++t) {
    const double x = u(rng);
    const std::size_t best = x > 0 ? 0 : 1;
    BanditRound r{{x}, {0.0, 0.0}, best};
    r.mean_rewards[best] = 1.0;
    problem.rounds.push_back(r);
  }
  auto cfg = small_config();
  cfg.prior.sigma = 0.2;
  Rng init(16), noise(17), agent_rng(18);
  NeuralAgent agent(AgentKind::badam_thompson, 1, 2, cfg, init);
  const auto run = run_agent(problem, agent, {}, noise, agent_rng);
  std::size_t correct = 0;
  for (std::size_t t = 800; t < 1000; ++t) correct += run.actions[t] == problem.rounds[t].optimal_action;
  CHECK(static_cast<double>(correct) / 200 > 0.9);
  CHECK(agent.moments().t > 0);
  // The posterior has moved off the prior.
  double max_abs_mean = 0.0;
  for (double m : agent.posterior().mean) max_abs_mean = std::max(max_abs_mean, std::abs(m));
  CHECK(max_abs_mean > 0.0);
}

TEST_CASE("training on a constant reward regresses to that constant") {
  ReplayBuffer buf(2);
  Rng rng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) buf.add(std::vector<double>{u(rng), u(rng)}, static_cast<std::size_t>(i % 3), 2.5);
  auto cfg = small_config();
  cfg.optimizer = {.eta = 0.01};
  Rng init(20);
  NeuralAgent agent(AgentKind::greedy, 2, 3, cfg, init);
  for (int k = 0; k < 30; ++k) agent.train(buf, rng);
  double worst = 0.0;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    Matrix x(1, 2);
    x(0, 0) = buf.context(i)[0];
    x(0, 1) = buf.context(i)[1];
    worst = std::max(worst, std::abs(predict(agent.network(), x)(0, buf.action(i)) - 2.5));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("agent kinds and configs") {
  for (auto k : {AgentKind::badam_thompson, AgentKind::mc_dropout, AgentKind::greedy, AgentKind::uniform})
    CHECK(agent_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(agent_kind_from_string("bbb"), ContractError);

  BanditConfig cfg;
  CHECK(agent_config_for(AgentKind::greedy, cfg).optimizer.beta1 == 0.0);
  CHECK(agent_config_for(AgentKind::mc_dropout, cfg).dropout == 0.5);
  CHECK(agent_config_for(AgentKind::badam_thompson, cfg).optimizer.beta1 == 0.9);
  CHECK(agent_config_for(AgentKind::badam_thompson, cfg).prior.sigma == 0.2);

  auto improper = small_config();
  improper.prior.improper = true;
  Rng rng(21);
  CHECK_THROWS_AS(NeuralAgent(AgentKind::badam_thompson, 2, 5, improper, rng), ContractError);
  CHECK_THROWS_AS(NeuralAgent(AgentKind::uniform, 2, 5, small_config(), rng), ContractError);
}

TEST_CASE("mc-dropout selection is stochastic") {
  auto cfg = small_config();
  cfg.dropout = 0.5;
  Rng init(22), rng(23);
  NeuralAgent agent(AgentKind::mc_dropout, 2, 5, cfg, init);
  const std::vector<double> ctx{0.3, -0.4};
  std::array<std::size_t, 5> counts{};
  for (int i = 0; i < 300; ++i) ++counts[agent.select(ctx, rng)];
  CHECK(std::count(counts.begin(), counts.end(), 0u) < 4);
}

TEST_CASE("csv dataset environment") {
  LabeledDataset d;
  d.features = Matrix{{0.0, 1.0}, {1.0, 0.0}, {0.5, 0.5}, {0.2, 0.9}};
  d.labels = {0, 1, 2, 0};
  d.num_classes = 3;
  Rng rng(24);
  const auto problem = make_csv_problem(d, 100, rng);
  CHECK(problem.horizon() == 4);
  CHECK(problem.num_actions == 3);
  CHECK(problem.context_dim == 2);
  CHECK(problem.reward_std == 0.0);
  std::vector<std::size_t> labels;
  for (const auto& r : problem.rounds) {
    CHECK(r.mean_rewards[r.optimal_action] == 1.0);
    double total = 0.0;
    for (double m : r.mean_rewards) total += m;
    CHECK(total == 1.0);
    labels.push_back(r.optimal_action);
  }
  std::sort(labels.begin(), labels.end());
  CHECK(labels == std::vector<std::size_t>{0, 0, 1, 2});
  CHECK(make_csv_problem(d, 2, rng).horizon() == 2);

  LabeledDataset reg;
  reg.features = Matrix(2, 1);
  reg.targets = Matrix(2, 1);
  CHECK_THROWS_AS(make_csv_problem(reg, 2, rng), ContractError);
}

TEST_CASE("run_bandit is deterministic and independent of the worker count") {
  BanditConfig cfg;
  cfg.horizon = 200;
  cfg.agents = {AgentKind::uniform, AgentKind::greedy};
  cfg.neural = small_config();
  const std::vector<std::uint64_t> seeds{3, 4};
  const auto a = run_bandit(cfg, 99, seeds, 1);
  const auto b = run_bandit(cfg, 99, seeds, 3);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].agent == b[i].agent);
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].cumulative_reward == b[i].cumulative_reward);
  }
  CHECK(a[0].seed == 3);
  CHECK(a[0].agent == AgentKind::uniform);
  CHECK(a[1].agent == AgentKind::greedy);
  CHECK(a[2].seed == 4);
  CHECK(a[0].cumulative_reward != a[2].cumulative_reward);

  const auto summary = bandit_summary(a);
  CHECK(summary["env"] == "wheel");
  CHECK(summary["agents"]["uniform"]["runs"] == 2);
  CHECK(summary["warmup_rewards_counted"] == true);

  const auto path = std::filesystem::temp_directory_path() / "badam_test_bandit.csv";
  write_bandit_csv(path, a);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "agent,env,delta,seed,cumulative_reward,normalized_reward");
  std::filesystem::remove(path);
}
