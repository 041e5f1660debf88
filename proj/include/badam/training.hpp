#pragma once

#include <cstdint>
#include <functional>

#include "badam/data.hpp"
#include "badam/nn.hpp"
#include "badam/optim.hpp"

namespace badam {

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  /// L2 bound on each minibatch gradient; 0 disables clipping.
  double clip_norm = 0.0;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Minibatch of the given rows. Classification datasets produce class-index
/// targets, regression datasets real-valued ones.
Minibatch make_batch(const LabeledDataset& data, std::span<const std::size_t> rows);

LossKind loss_kind_for(const LabeledDataset& data);

/// One optimizer step on a minibatch: forward (train mode), backward,
/// optional clipping, moment update, parameter update. Returns the batch loss.
double train_step(Network& net, MomentState& state, const OptimizerConfig& opt, const Minibatch& batch,
                  LossKind kind, double clip_norm, Rng& rng);

/// Shuffled minibatch passes over `data`. The final batch of an epoch may be
/// short. Returns the number of optimizer steps taken.
std::uint64_t train_epochs(Network& net, MomentState& state, const OptimizerConfig& opt, const LabeledDataset& data,
                           const TrainConfig& cfg, Rng& rng, const EpochCallback& on_epoch = {});

/// Fraction of rows whose argmax prediction equals the label.
double accuracy(const Network& net, const LabeledDataset& data);
/// Eval-mode mean squared error on a regression dataset.
double mean_squared_error(const Network& net, const LabeledDataset& data);

}  // namespace badam
