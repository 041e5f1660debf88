#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "badam/nn.hpp"
#include "badam/optim.hpp"

namespace badam {

/// Isotropic Gaussian prior N(0, sigma^2 I). `improper` drops the prior
/// precision term (sigma^-2 -> 0).
struct PriorConfig {
  double sigma = 0.1;
  bool improper = false;

  double precision() const { return improper ? 0.0 : 1.0 / (sigma * sigma); }
  void validate() const;
};

/// Sample-count multiplier of the likelihood term.
struct EffectiveN {
  enum class Mode { fixed, t_times_batch };

  Mode mode = Mode::t_times_batch;
  double fixed_value = 1.0;
  /// The N actually used; filled by resolve().
  double resolved = 0.0;

  /// fixed: fixed_value. t_times_batch: steps * batch_size.
  EffectiveN resolve(std::uint64_t steps, std::size_t batch_size) const;
};

/// Smallest variance handed out by extract_posterior.
inline constexpr double kVarianceFloor = 1e-12;

/// Diagonal Gaussian over the flat parameter vector.
struct GaussianPosterior {
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<Shape> shapes;

  std::size_t size() const { return mean.size(); }
  ParamVector mean_params() const { return ParamVector(mean, shapes); }
};

/// Coefficient N s / (N s + sigma^-2) that shrinks the point estimate toward
/// zero. `curvature` is s = sqrt(v_hat). Returns 1 for an improper prior with
/// s > 0 and 0 whenever s == 0.
double shrinkage(double curvature, double n, const PriorConfig& prior);

/// Reads the posterior off the optimizer state. `theta_next` is the
/// parameter vector after the final update. With s_i = sqrt(v_hat_i):
///   variance_i = 1 / (N s_i + sigma^-2)    (floored at kVarianceFloor)
///   mean_i     = N s_i * variance_i * theta_next_i
/// epsilon plays no part. Requires state.t >= 1 and n.resolved > 0.
GaussianPosterior extract_posterior(const ParamVector& theta_next, const MomentState& state,
                                    const OptimizerConfig& cfg, const PriorConfig& prior,
                                    const EffectiveN& n);

/// `count` independent draws theta ~ N(mean, diag(variance)).
std::vector<ParamVector> sample_weights(const GaussianPosterior& post, Rng& rng, std::size_t count);
/// Single draw, written into `out` (resized as needed).
void sample_weights_into(const GaussianPosterior& post, Rng& rng, ParamVector& out);

/// |mean_i| / sqrt(variance_i). Infinite variance (improper prior, zero
/// curvature) scores 0.
std::vector<double> signal_to_noise(const GaussianPosterior& post);

struct PredictiveMoments {
  Matrix mean;
  Matrix std;
};

/// Monte Carlo predictive distribution: `samples` eval-mode forward passes
/// under posterior draws. std = sqrt(sample variance + obs_noise^2).
PredictiveMoments predictive_sample(const Network& net, const GaussianPosterior& post, const Matrix& inputs,
                                    std::size_t samples, double obs_noise, Rng& rng);

/// {"shapes", "mean", "variance", "config"} in that order.
nlohmann::ordered_json posterior_to_json(const GaussianPosterior& post, nlohmann::ordered_json config);
GaussianPosterior posterior_from_json(const nlohmann::json& doc);

}  // namespace badam
