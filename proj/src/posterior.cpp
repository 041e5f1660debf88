#include "badam/posterior.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "badam/errors.hpp"

namespace badam {

void PriorConfig::validate() const {
  if (!(sigma > 0.0)) throw ContractError("prior.sigma must be > 0");
}

EffectiveN EffectiveN::resolve(std::uint64_t steps, std::size_t batch_size) const {
  EffectiveN out = *this;
  out.resolved = mode == Mode::fixed ? fixed_value : static_cast<double>(steps) * static_cast<double>(batch_size);
  return out;
}

double shrinkage(double curvature, double n, const PriorConfig& prior) {
  const double precision = n * curvature;
  if (precision == 0.0) return 0.0;
  return precision / (precision + prior.precision());
}

GaussianPosterior extract_posterior(const ParamVector& theta_next, const MomentState& state,
                                    const OptimizerConfig& cfg, const PriorConfig& prior,
                                    const EffectiveN& n) {
  if (state.t == 0) throw ContractError("extract_posterior: optimizer has taken no steps (t = 0)");
  if (!(n.resolved > 0.0)) throw ContractError("extract_posterior: effective N must be resolved and positive");
  if (theta_next.size() != state.dim()) throw ShapeError("extract_posterior: parameter/state dimension mismatch");

  const CorrectedMoments moments = read_corrected(state, cfg);
  const double prior_precision = prior.precision();
  const std::size_t d = theta_next.size();

  GaussianPosterior post;
  post.shapes = theta_next.shapes;
  post.mean.resize(d);
  post.variance.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double likelihood_precision = n.resolved * std::sqrt(moments.v_hat[i]);
    const double precision = likelihood_precision + prior_precision;
    if (precision == 0.0) {
      // improper prior and flat direction: nothing pins this weight down
      post.variance[i] = std::numeric_limits<double>::infinity();
      post.mean[i] = theta_next.values[i];
      continue;
    }
    post.variance[i] = std::max(1.0 / precision, kVarianceFloor);
    post.mean[i] = likelihood_precision / precision * theta_next.values[i];
  }
  return post;
}

void sample_weights_into(const GaussianPosterior& post, Rng& rng, ParamVector& out) {
  std::normal_distribution<double> z(0.0, 1.0);
  out.shapes = post.shapes;
  out.values.resize(post.size());
  for (std::size_t i = 0; i < post.size(); ++i) {
    const double var = post.variance[i];
    if (!(var >= 0.0) || std::isinf(var))
      throw ContractError("sample_weights: variance must be finite and non-negative");
    out.values[i] = post.mean[i] + std::sqrt(var) * z(rng);
  }
}

std::vector<ParamVector> sample_weights(const GaussianPosterior& post, Rng& rng, std::size_t count) {
  if (count == 0) throw ContractError("sample_weights: count must be >= 1");
  std::vector<ParamVector> out(count);
  for (auto& s : out) sample_weights_into(post, rng, s);
  return out;
}

std::vector<double> signal_to_noise(const GaussianPosterior& post) {
  std::vector<double> snr(post.size());
  for (std::size_t i = 0; i < post.size(); ++i) {
    const double var = post.variance[i];
    if (!(var > 0.0)) throw ContractError("signal_to_noise: variance must be positive");
    snr[i] = std::isinf(var) ? 0.0 : std::abs(post.mean[i]) / std::sqrt(var);
  }
  return snr;
}

PredictiveMoments predictive_sample(const Network& net, const GaussianPosterior& post, const Matrix& inputs,
                                    std::size_t samples, double obs_noise, Rng& rng) {
  if (samples < 2) throw ContractError("predictive_sample: need at least 2 samples");
  if (!(obs_noise >= 0.0)) throw ContractError("predictive_sample: obs_noise must be >= 0");

  Network sampled = net;
  ParamVector weights;
  Matrix mean(inputs.rows(), net.output_dim());
  Matrix m2(inputs.rows(), net.output_dim());
  // Welford accumulation over samples.
  for (std::size_t s = 0; s < samples; ++s) {
    sample_weights_into(post, rng, weights);
    sampled.set_params(weights);
    const Matrix out = predict(sampled, inputs);
    const double k = static_cast<double>(s + 1);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double x = out.values()[i];
      const double delta = x - mean.values()[i];
      mean.values()[i] += delta / k;
      m2.values()[i] += delta * (x - mean.values()[i]);
    }
  }
  Matrix std_dev(inputs.rows(), net.output_dim());
  const double noise_var = obs_noise * obs_noise;
  for (std::size_t i = 0; i < std_dev.size(); ++i)
    std_dev.values()[i] = std::sqrt(m2.values()[i] / static_cast<double>(samples - 1) + noise_var);
  return {std::move(mean), std::move(std_dev)};
}

nlohmann::ordered_json posterior_to_json(const GaussianPosterior& post, nlohmann::ordered_json config) {
  nlohmann::ordered_json doc;
  auto shapes = nlohmann::ordered_json::array();
  for (const auto& s : post.shapes) shapes.push_back({s.rows, s.cols});
  doc["shapes"] = std::move(shapes);
  doc["mean"] = post.mean;
  // JSON has no infinity; improper-prior flat directions are written as null.
  auto variance = nlohmann::ordered_json::array();
  for (double v : post.variance) {
    if (std::isinf(v))
      variance.push_back(nullptr);
    else
      variance.push_back(v);
  }
  doc["variance"] = std::move(variance);
  doc["config"] = std::move(config);
  return doc;
}

GaussianPosterior posterior_from_json(const nlohmann::json& doc) {
  GaussianPosterior post;
  for (const auto& s : doc.at("shapes")) post.shapes.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  post.mean = doc.at("mean").get<std::vector<double>>();
  for (const auto& v : doc.at("variance"))
    post.variance.push_back(v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
  if (post.mean.size() != post.variance.size() || post.mean.size() != ParamVector::total_size(post.shapes))
    throw FormatError("posterior JSON: mean/variance/shapes lengths disagree");
  return post;
}

}  // namespace badam
