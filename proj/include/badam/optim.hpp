#pragma once

#include <cstdint>
#include <vector>

#include "badam/nn.hpp"

namespace badam {

enum class Method { ogd, adagrad, adam };
enum class LrSchedule { constant, inverse_decay };

/// Hyperparameters of the generic update theta <- theta - eta_t V^{-1/2} m.
/// RMSProp is adam with beta1 = 0.
struct OptimizerConfig {
  Method method = Method::adam;
  double eta = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// adam only. true: fold the bias corrections into the step size,
  /// eta_t = eta * sqrt(1 - beta2^t) / (1 - beta1^t), applied to the raw
  /// moments. false: plain eta on the raw moments, i.e. no correction.
  bool bias_correct_lr = true;
  LrSchedule lr_schedule = LrSchedule::constant;

  /// Throws ContractError naming the offending field.
  void validate() const;
};

/// The optimizer's sufficient statistics. Moments are stored uncorrected.
/// For ogd and adagrad `m` holds the most recent gradient.
struct MomentState {
  std::vector<double> m;
  std::vector<double> v;
  std::vector<double> accumulated_sq;
  std::uint64_t t = 0;

  MomentState() = default;
  explicit MomentState(std::size_t dim) : m(dim, 0.0), v(dim, 0.0), accumulated_sq(dim, 0.0) {}
  std::size_t dim() const { return m.size(); }
};

struct CorrectedMoments {
  std::vector<double> m_hat;
  std::vector<double> v_hat;
};

/// Folds one gradient into the state and increments t.
MomentState update_moments(MomentState state, const Gradient& g, const OptimizerConfig& cfg);
/// In-place variant used by the training loops.
void update_moments_inplace(MomentState& state, const Gradient& g, const OptimizerConfig& cfg);

/// adam: (m / (1 - beta1^t), v / (1 - beta2^t)); adagrad: (g_t, sum g^2 / t);
/// ogd: (g_t, 1). Requires t >= 1.
CorrectedMoments read_corrected(const MomentState& state, const OptimizerConfig& cfg);

/// Scheduled global rate: eta, or eta / sqrt(t).
double lr_at(const OptimizerConfig& cfg, std::uint64_t t);

/// Step size multiplying m / (sqrt(v) + eps) for the raw-moment adam update.
double adam_step_size(const OptimizerConfig& cfg, std::uint64_t t);

/// theta_{t+1} from theta_t and the state after update_moments. Throws
/// NumericError (and leaves nothing modified) if the result is not finite.
ParamVector step(const ParamVector& theta, const MomentState& state, const OptimizerConfig& cfg);

}  // namespace badam
