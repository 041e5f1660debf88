#include "badam/optim.hpp"

#include <cmath>
#include <string>

#include "badam/errors.hpp"

namespace badam {

void OptimizerConfig::validate() const {
  if (!(eta > 0.0)) throw ContractError("optimizer.eta must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ContractError("optimizer.beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ContractError("optimizer.beta2 must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ContractError("optimizer.epsilon must be > 0");
}

void update_moments_inplace(MomentState& state, const Gradient& g, const OptimizerConfig& cfg) {
  const std::size_t d = state.dim();
  if (g.size() != d)
    throw ShapeError("update_moments: gradient has " + std::to_string(g.size()) + " entries, state has " +
                     std::to_string(d));
  const double* gv = g.values.data();
  switch (cfg.method) {
    case Method::adam: {
      const double b1 = cfg.beta1;
      const double b2 = cfg.beta2;
      double* m = state.m.data();
      double* v = state.v.data();
#pragma omp simd
      for (std::size_t i = 0; i < d; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * gv[i];
        v[i] = b2 * v[i] + (1.0 - b2) * gv[i] * gv[i];
      }
      break;
    }
    case Method::adagrad:
      for (std::size_t i = 0; i < d; ++i) {
        state.m[i] = gv[i];
        state.accumulated_sq[i] += gv[i] * gv[i];
      }
      break;
    case Method::ogd:
      for (std::size_t i = 0; i < d; ++i) state.m[i] = gv[i];
      break;
  }
  ++state.t;
}

MomentState update_moments(MomentState state, const Gradient& g, const OptimizerConfig& cfg) {
  update_moments_inplace(state, g, cfg);
  return state;
}

CorrectedMoments read_corrected(const MomentState& state, const OptimizerConfig& cfg) {
  if (state.t == 0) throw ContractError("read_corrected: no gradient observed yet (t = 0)");
  const std::size_t d = state.dim();
  CorrectedMoments out{std::vector<double>(d), std::vector<double>(d)};
  const auto t = static_cast<double>(state.t);
  switch (cfg.method) {
    case Method::adam: {
      const double c1 = 1.0 - std::pow(cfg.beta1, t);
      const double c2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t i = 0; i < d; ++i) {
        out.m_hat[i] = state.m[i] / c1;
        out.v_hat[i] = state.v[i] / c2;
      }
      break;
    }
    case Method::adagrad:
      for (std::size_t i = 0; i < d; ++i) {
        out.m_hat[i] = state.m[i];
        out.v_hat[i] = state.accumulated_sq[i] / t;
      }
      break;
    case Method::ogd:
      out.m_hat = state.m;
      out.v_hat.assign(d, 1.0);
      break;
  }
  return out;
}

double lr_at(const OptimizerConfig& cfg, std::uint64_t t) {
  if (t == 0) throw ContractError("lr_at: step index starts at 1");
  if (cfg.lr_schedule == LrSchedule::inverse_decay) return cfg.eta / std::sqrt(static_cast<double>(t));
  return cfg.eta;
}

double adam_step_size(const OptimizerConfig& cfg, std::uint64_t t) {
  const double base = lr_at(cfg, t);
  if (!cfg.bias_correct_lr) return base;
  const auto tt = static_cast<double>(t);
  return base * std::sqrt(1.0 - std::pow(cfg.beta2, tt)) / (1.0 - std::pow(cfg.beta1, tt));
}

ParamVector step(const ParamVector& theta, const MomentState& state, const OptimizerConfig& cfg) {
  if (state.t == 0) throw ContractError("step: moments have not been updated (t = 0)");
  const std::size_t d = theta.size();
  if (state.dim() != d) throw ShapeError("step: state dimension differs from parameter dimension");

  ParamVector next = theta;
  double* out = next.values.data();
  const double* m = state.m.data();
  switch (cfg.method) {
    case Method::ogd: {
      const double eta = lr_at(cfg, state.t);
      for (std::size_t i = 0; i < d; ++i) out[i] = out[i] - eta * m[i];
      break;
    }
    case Method::adagrad: {
      const double eta = lr_at(cfg, state.t);
      const auto t = static_cast<double>(state.t);
      for (std::size_t i = 0; i < d; ++i)
        out[i] -= eta * m[i] / (std::sqrt(state.accumulated_sq[i] / t) + cfg.epsilon);
      break;
    }
    case Method::adam: {
      const double eta = adam_step_size(cfg, state.t);
      const double eps = cfg.epsilon;
      const double* v = state.v.data();
#pragma omp simd
      for (std::size_t i = 0; i < d; ++i) out[i] -= eta * m[i] / (std::sqrt(v[i]) + eps);
      break;
    }
  }
  require_finite(next.values, "step");
  return next;
}

}  // namespace badam
