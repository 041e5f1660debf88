#include "badam/nn.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <string>

#include "badam/errors.hpp"
#include "badam/kernels.hpp"

namespace badam {

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw NumericError(std::string(what) + ": non-finite value at index " + std::to_string(i));
  }
}

Network::Network(std::vector<std::size_t> layer_sizes, OutputHead head, double dropout_rate)
    : layer_sizes_(std::move(layer_sizes)), head_(head) {
  if (layer_sizes_.size() < 2) throw ContractError("Network: need at least input and output sizes");
  if (std::find(layer_sizes_.begin(), layer_sizes_.end(), 0u) != layer_sizes_.end())
    throw ContractError("Network: layer sizes must be positive");
  set_dropout_rate(dropout_rate);

  std::vector<Shape> shapes;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    offsets_.push_back(offset);
    shapes.push_back({layer_sizes_[l], layer_sizes_[l + 1]});
    shapes.push_back({1, layer_sizes_[l + 1]});
    offset += (layer_sizes_[l] + 1) * layer_sizes_[l + 1];
  }
  params_ = ParamVector(std::move(shapes));
}

void Network::set_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("Network: dropout rate must be in [0, 1)");
  dropout_rate_ = rate;
}

void Network::set_params(ParamVector params) {
  if (params.shapes != params_.shapes || !params.consistent())
    throw ShapeError("Network::set_params: layout does not match the network");
  require_finite(params.values, "Network::set_params");
  params_ = std::move(params);
  ++version_;
}

ConstMatrixView Network::weight(std::size_t layer) const {
  const std::size_t in = layer_sizes_[layer];
  const std::size_t out = layer_sizes_[layer + 1];
  return {params_.values.data() + offsets_[layer], in, out, out};
}

std::span<const double> Network::bias(std::size_t layer) const {
  const std::size_t in = layer_sizes_[layer];
  const std::size_t out = layer_sizes_[layer + 1];
  return {params_.values.data() + offsets_[layer] + in * out, out};
}

void Network::initialize(InitScheme scheme, double scale, Rng& rng) {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const std::size_t in = layer_sizes_[l];
    const std::size_t out = layer_sizes_[l + 1];
    const double limit = scheme == InitScheme::fan_in ? std::sqrt(6.0 / static_cast<double>(in)) : scale;
    std::uniform_real_distribution<double> dist(-limit, limit);
    double* w = params_.values.data() + offsets_[l];
    for (std::size_t i = 0; i < in * out; ++i) w[i] = dist(rng);
    std::fill_n(w + in * out, out, 0.0);
  }
  ++version_;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  Matrix mask(rows, cols, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::bernoulli_distribution drop(rate);
  for (double& v : mask.values()) v = drop(rng) ? 0.0 : keep_scale;
  return mask;
}

namespace {

// z = a * W_l + b_l
Matrix affine(const Network& net, std::size_t layer, const Matrix& a) {
  Matrix z(a.rows(), net.layer_sizes()[layer + 1]);
  kernels::gemm_nn(a.view(), net.weight(layer), z.view());
  kernels::add_row_vector(z.view(), net.bias(layer));
  return z;
}

void check_input(const Network& net, const Matrix& inputs) {
  if (inputs.cols() != net.input_dim())
    throw ShapeError("forward: input has " + std::to_string(inputs.cols()) + " columns, network expects " +
                     std::to_string(net.input_dim()));
  if (inputs.rows() == 0) throw ShapeError("forward: empty input batch");
}

}  // namespace

ForwardResult forward(const Network& net, const Matrix& inputs, Mode mode, Rng* rng) {
  check_input(net, inputs);
  const bool drop = mode == Mode::train && net.dropout_rate() > 0.0;
  if (drop && rng == nullptr) throw ContractError("forward: train mode with dropout needs a random source");

  ForwardResult result;
  auto& cache = result.cache;
  cache.mode = mode;
  cache.params_version = net.version();
  cache.network = &net;
  cache.activations.reserve(net.num_layers() + 1);
  cache.activations.push_back(inputs);

  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix z = affine(net, l, cache.activations.back());
    const bool hidden = l + 1 < net.num_layers();
    if (hidden) {
      kernels::relu_inplace(z.view());
      if (drop) {
        Matrix mask = dropout_mask(z.rows(), z.cols(), net.dropout_rate(), *rng);
        kernels::multiply_inplace(z.view(), mask.view());
        cache.dropout_scale.push_back(std::move(mask));
      } else {
        cache.dropout_scale.emplace_back();
      }
    } else if (net.head() == OutputHead::softmax) {
      kernels::softmax_rows(z.view());
    }
    cache.activations.push_back(std::move(z));
  }
  result.outputs = cache.activations.back();
  return result;
}

Matrix predict(const Network& net, const Matrix& inputs) {
  check_input(net, inputs);
  Matrix a = affine(net, 0, inputs);
  for (std::size_t l = 1; l < net.num_layers(); ++l) {
    kernels::relu_inplace(a.view());
    a = affine(net, l, a);
  }
  if (net.head() == OutputHead::softmax) kernels::softmax_rows(a.view());
  return a;
}

namespace {

void check_targets(const Matrix& outputs, const Targets& targets, LossKind kind) {
  if (targets.rows() != outputs.rows())
    throw ShapeError("loss: " + std::to_string(targets.rows()) + " target rows for " +
                     std::to_string(outputs.rows()) + " output rows");
  if (kind == LossKind::mse) {
    if (targets.values.cols() != outputs.cols()) throw ShapeError("loss: mse target width differs from output width");
    if (targets.is_masked() && (targets.mask.rows() != outputs.rows() || targets.mask.cols() != outputs.cols()))
      throw ShapeError("loss: mask shape differs from output shape");
  } else {
    if (targets.classes.empty()) throw ShapeError("loss: cross-entropy needs class indices");
    for (std::size_t c : targets.classes)
      if (c >= outputs.cols()) throw ShapeError("loss: class index out of range");
  }
}

// Number of contributing columns in row i.
double row_weight(const Targets& targets, std::size_t i, std::size_t cols) {
  if (!targets.is_masked()) return static_cast<double>(cols);
  double n = 0.0;
  for (std::size_t j = 0; j < cols; ++j) n += targets.mask(i, j) != 0.0 ? 1.0 : 0.0;
  return n;
}

}  // namespace

double loss(const Matrix& outputs, const Targets& targets, LossKind kind) {
  check_targets(outputs, targets, kind);
  const std::size_t n = outputs.rows();
  double total = 0.0;
  if (kind == LossKind::mse) {
    for (std::size_t i = 0; i < n; ++i) {
      const double w = row_weight(targets, i, outputs.cols());
      if (w == 0.0) continue;
      double row = 0.0;
      for (std::size_t j = 0; j < outputs.cols(); ++j) {
        if (targets.is_masked() && targets.mask(i, j) == 0.0) continue;
        const double r = outputs(i, j) - targets.values(i, j);
        row += r * r;
      }
      total += row / w;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) total -= std::log(std::max(outputs(i, targets.classes[i]), DBL_MIN));
  }
  return total / static_cast<double>(n);
}

double softmax_cross_entropy_from_logits(const Matrix& logits, std::span<const std::size_t> classes) {
  if (classes.size() != logits.rows()) throw ShapeError("cross-entropy: label count differs from rows");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    if (classes[i] >= row.size()) throw ShapeError("cross-entropy: class index out of range");
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    total += mx + std::log(s) - row[classes[i]];
  }
  return total / static_cast<double>(logits.rows());
}

Gradient backward(const Network& net, const ForwardCache& cache, const Targets& targets, LossKind kind) {
  if (cache.network != &net || cache.params_version != net.version())
    throw ContractError("backward: cache is stale or belongs to another network");
  if (cache.mode != Mode::train) throw ContractError("backward: cache must come from a train-mode forward pass");
  if (cache.activations.size() != net.num_layers() + 1) throw ContractError("backward: malformed cache");
  if (kind == LossKind::softmax_cross_entropy && net.head() != OutputHead::softmax)
    throw ContractError("backward: cross-entropy requires a softmax head");
  if (kind == LossKind::mse && net.head() != OutputHead::linear)
    throw ContractError("backward: mse requires a linear head");

  const Matrix& out = cache.activations.back();
  check_targets(out, targets, kind);
  const std::size_t n = out.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  // Gradient with respect to the head's pre-activation.
  Matrix dz(n, out.cols());
  if (kind == LossKind::mse) {
    for (std::size_t i = 0; i < n; ++i) {
      const double w = row_weight(targets, i, out.cols());
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < out.cols(); ++j) {
        if (targets.is_masked() && targets.mask(i, j) == 0.0) continue;
        dz(i, j) = 2.0 * (out(i, j) - targets.values(i, j)) * inv_n / w;
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < out.cols(); ++j) dz(i, j) = out(i, j) * inv_n;
      dz(i, targets.classes[i]) -= inv_n;
    }
  }

  Gradient grad(net.params().shapes);
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const Matrix& a = cache.activations[l];
    const std::size_t in = net.layer_sizes()[l];
    const std::size_t width = net.layer_sizes()[l + 1];
    double* gw = grad.values.data() + net.weight_offset(l);
    kernels::gemm_tn(a.view(), dz.view(), MatrixView{gw, in, width, width});
    kernels::column_sums(dz.view(), std::span<double>(gw + in * width, width));
    if (l == 0) break;
    Matrix da(n, in);
    kernels::gemm_nt(dz.view(), net.weight(l), da.view());
    const Matrix& scale = cache.dropout_scale[l - 1];
    kernels::relu_backward(da.view(), a.view(), scale.empty() ? ConstMatrixView{} : scale.view());
    dz = std::move(da);
  }
  return grad;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Gradient clip_gradient(const Gradient& g, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractError("clip_gradient: max_norm must be positive");
  require_finite(g.values, "clip_gradient: gradient");
  double norm = l2_norm(g.values);
  if (norm <= max_norm) return g;
  if (std::isinf(norm)) {
    // Sum of squares overflowed; rescale by the largest magnitude first.
    double top = 0.0;
    for (double x : g.values) top = std::max(top, std::abs(x));
    double s = 0.0;
    for (double x : g.values) s += (x / top) * (x / top);
    norm = top * std::sqrt(s);
  }
  // Shrink the factor until the rescaled norm is within the bound so that a
  // second clip is a no-op.
  double factor = max_norm / norm;
  Gradient out = g;
  for (;;) {
    for (std::size_t i = 0; i < g.values.size(); ++i) out.values[i] = g.values[i] * factor;
    if (l2_norm(out.values) <= max_norm) break;
    factor = std::nextafter(factor, 0.0);
  }
  return out;
}

std::vector<std::size_t> argmax_rows(const Matrix& m) {
  std::vector<std::size_t> idx(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    idx[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return idx;
}

}  // namespace badam
