#include "badam/training.hpp"

#include <algorithm>
#include <numeric>

#include "badam/errors.hpp"

namespace badam {

Minibatch make_batch(const LabeledDataset& data, std::span<const std::size_t> rows) {
  Minibatch batch;
  batch.inputs = data.features.gather_rows(rows);
  if (data.is_classification()) {
    std::vector<std::size_t> classes;
    classes.reserve(rows.size());
    for (std::size_t r : rows) classes.push_back(data.labels[r]);
    batch.targets = Targets::labels(std::move(classes));
  } else {
    batch.targets = Targets::regression(data.targets.gather_rows(rows));
  }
  return batch;
}

LossKind loss_kind_for(const LabeledDataset& data) {
  return data.is_classification() ? LossKind::softmax_cross_entropy : LossKind::mse;
}

double train_step(Network& net, MomentState& state, const OptimizerConfig& opt, const Minibatch& batch,
                  LossKind kind, double clip_norm, Rng& rng) {
  auto fwd = forward(net, batch.inputs, Mode::train, &rng);
  const double batch_loss = loss(fwd.outputs, batch.targets, kind);
  Gradient g = backward(net, fwd.cache, batch.targets, kind);
  if (clip_norm > 0.0) g = clip_gradient(g, clip_norm);
  update_moments_inplace(state, g, opt);
  net.set_params(step(net.params(), state, opt));
  return batch_loss;
}

std::uint64_t train_epochs(Network& net, MomentState& state, const OptimizerConfig& opt, const LabeledDataset& data,
                           const TrainConfig& cfg, Rng& rng, const EpochCallback& on_epoch) {
  if (cfg.batch_size == 0) throw ContractError("train: batch_size must be >= 1");
  if (data.size() == 0) throw ContractError("train: empty dataset");
  if (state.dim() != net.params().size()) throw ShapeError("train: optimizer state does not match network");
  const LossKind kind = loss_kind_for(data);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t steps = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Minibatch batch = make_batch(data, rows);
      total += train_step(net, state, opt, batch, kind, cfg.clip_norm, rng) * static_cast<double>(rows.size());
      ++steps;
    }
    if (on_epoch) on_epoch(epoch, total / static_cast<double>(order.size()));
  }
  return steps;
}

double accuracy(const Network& net, const LabeledDataset& data) {
  if (!data.is_classification()) throw ContractError("accuracy: dataset has no class labels");
  const auto predicted = argmax_rows(predict(net, data.features));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double mean_squared_error(const Network& net, const LabeledDataset& data) {
  if (data.is_classification()) throw ContractError("mean_squared_error: dataset is a classification set");
  return loss(predict(net, data.features), Targets::regression(data.targets), LossKind::mse);
}

}  // namespace badam
