#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "badam/matrix.hpp"
#include "badam/seed.hpp"

namespace badam {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t count() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Flat parameter-sized vector with the per-block shape metadata of the
/// network it belongs to. Blocks are laid out as W_0, b_0, W_1, b_1, ...
/// where W_l is (fan_in x fan_out) row-major and b_l is (1 x fan_out).
template <class Tag>
struct FlatVector {
  std::vector<double> values;
  std::vector<Shape> shapes;

  FlatVector() = default;
  FlatVector(std::vector<double> v, std::vector<Shape> s) : values(std::move(v)), shapes(std::move(s)) {}
  /// Zero-filled vector with the given layout.
  explicit FlatVector(std::vector<Shape> s) : shapes(std::move(s)) { values.assign(total_size(shapes), 0.0); }

  std::size_t size() const { return values.size(); }

  static std::size_t total_size(const std::vector<Shape>& shapes) {
    std::size_t n = 0;
    for (const auto& s : shapes) n += s.count();
    return n;
  }
  bool consistent() const { return values.size() == total_size(shapes); }

  friend bool operator==(const FlatVector&, const FlatVector&) = default;
};

using ParamVector = FlatVector<struct ParamTag>;
using Gradient = FlatVector<struct GradientTag>;

/// Throws NumericError if any entry is NaN or Inf.
void require_finite(std::span<const double> values, const char* what);

enum class Activation { relu };
enum class OutputHead { linear, softmax };
enum class Mode { train, eval };
enum class LossKind { mse, softmax_cross_entropy };
enum class InitScheme { uniform, fan_in };

/// Dense ReLU MLP. Dropout, when enabled, acts on hidden activations only.
class Network {
 public:
  Network() = default;
  Network(std::vector<std::size_t> layer_sizes, OutputHead head, double dropout_rate = 0.0);

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  std::size_t num_layers() const { return layer_sizes_.size() - 1; }
  std::size_t input_dim() const { return layer_sizes_.front(); }
  std::size_t output_dim() const { return layer_sizes_.back(); }
  Activation activation() const { return Activation::relu; }
  OutputHead head() const { return head_; }
  double dropout_rate() const { return dropout_rate_; }
  void set_dropout_rate(double rate);

  const ParamVector& params() const { return params_; }
  /// Replaces all parameters. Layout must match; entries must be finite.
  void set_params(ParamVector params);
  /// Incremented by every set_params/initialize; forward caches record it.
  std::uint64_t version() const { return version_; }

  /// Weight block of layer l as a (fan_in x fan_out) view into params.
  ConstMatrixView weight(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;
  /// Offset of layer l's weight block (its bias block follows immediately).
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

  /// uniform: W ~ U[-scale, scale]. fan_in: W ~ U[-sqrt(6/fan_in), +sqrt(6/fan_in)].
  /// Biases are set to zero in both cases.
  void initialize(InitScheme scheme, double scale, Rng& rng);

 private:
  std::vector<std::size_t> layer_sizes_;
  OutputHead head_ = OutputHead::linear;
  double dropout_rate_ = 0.0;
  ParamVector params_;
  std::vector<std::size_t> offsets_;
  std::uint64_t version_ = 0;
};

/// Regression targets, class indices, or masked regression targets.
/// For a masked target only entries with mask(i, j) != 0 contribute to the
/// loss; the bandit uses this to train on the chosen action only.
struct Targets {
  Matrix values;
  std::vector<std::size_t> classes;
  Matrix mask;

  static Targets regression(Matrix y) { return {std::move(y), {}, {}}; }
  static Targets labels(std::vector<std::size_t> c) { return {{}, std::move(c), {}}; }
  static Targets masked(Matrix y, Matrix m) { return {std::move(y), {}, std::move(m)}; }

  std::size_t rows() const { return classes.empty() ? values.rows() : classes.size(); }
  bool is_masked() const { return !mask.empty(); }
};

struct Minibatch {
  Matrix inputs;
  Targets targets;
};

/// Everything backward needs from a train-mode forward pass.
struct ForwardCache {
  Mode mode = Mode::eval;
  std::uint64_t params_version = 0;
  const Network* network = nullptr;
  /// activations[0] is the input; activations[l] is the post-ReLU,
  /// post-dropout output of hidden layer l; the last entry is the head output.
  std::vector<Matrix> activations;
  /// Per hidden layer: 0 for dropped units, 1/(1-rate) for kept ones. Empty
  /// matrices when dropout is off.
  std::vector<Matrix> dropout_scale;
};

struct ForwardResult {
  Matrix outputs;
  ForwardCache cache;
};

/// Runs the network. Train mode with dropout_rate > 0 needs `rng`.
ForwardResult forward(const Network& net, const Matrix& inputs, Mode mode, Rng* rng = nullptr);
/// Eval-mode forward without keeping a cache.
Matrix predict(const Network& net, const Matrix& inputs);

/// mse: mean over rows of the squared error averaged over output columns (or
/// over the masked-in columns of each row when the targets are masked).
/// softmax_cross_entropy: mean of -log p[class]; `outputs` are probabilities.
double loss(const Matrix& outputs, const Targets& targets, LossKind kind);

/// Cross-entropy computed from the head's pre-softmax logits via log-sum-exp.
double softmax_cross_entropy_from_logits(const Matrix& logits, std::span<const std::size_t> classes);

/// Exact gradient of loss(outputs, targets, kind) with respect to all
/// parameters, using the dropout masks stored in the cache.
Gradient backward(const Network& net, const ForwardCache& cache, const Targets& targets, LossKind kind);

/// Rescales g so that its L2 norm is at most max_norm. Idempotent.
Gradient clip_gradient(const Gradient& g, double max_norm);
double l2_norm(std::span<const double> v);

/// Inverted-dropout scale matrix: each entry is 0 with probability `rate`,
/// else 1/(1-rate). rate == 0 yields all ones.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

/// Index of the largest entry in each row (first one on ties).
std::vector<std::size_t> argmax_rows(const Matrix& m);

}  // namespace badam
