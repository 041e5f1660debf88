#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "badam/errors.hpp"
#include "badam/nn.hpp"

using namespace badam;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

void set_all(Network& net, std::vector<double> values) {
  net.set_params(ParamVector(std::move(values), net.params().shapes));
}

double loss_at(const Network& net, const Matrix& x, const Targets& y, LossKind kind) {
  return loss(predict(net, x), y, kind);
}

// Central differences, step 1e-5, on a copy of the network.
std::vector<double> numeric_gradient(const Network& net, const Matrix& x, const Targets& y, LossKind kind) {
  const double h = 1e-5;
  Network probe = net;
  std::vector<double> theta = net.params().values;
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    set_all(probe, theta);
    const double up = loss_at(probe, x, y, kind);
    theta[i] = keep - h;
    set_all(probe, theta);
    const double down = loss_at(probe, x, y, kind);
    theta[i] = keep;
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-4});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("forward examples") {
  Network net({1, 1, 1}, OutputHead::linear);
  set_all(net, {1.0, 0.0, 1.0, 0.0});
  CHECK(predict(net, Matrix{{2.0}})(0, 0) == 2.0);
  CHECK(predict(net, Matrix{{-3.0}})(0, 0) == 0.0);

  Network soft({1, 2}, OutputHead::softmax);
  const Matrix p = predict(soft, Matrix{{0.7}});
  CHECK(p(0, 0) == 0.5);
  CHECK(p(0, 1) == 0.5);
}

TEST_CASE("forward rejects bad input widths and missing rng") {
  Network net({3, 4, 2}, OutputHead::linear, 0.5);
  CHECK_THROWS_AS(predict(net, Matrix(2, 4)), ShapeError);
  CHECK_THROWS_AS(forward(net, Matrix(2, 3), Mode::train), ContractError);
  CHECK_THROWS_AS(Network({3}, OutputHead::linear), ContractError);
  CHECK_THROWS_AS(Network({3, 2}, OutputHead::linear, 1.0), ContractError);
}

TEST_CASE("set_params rejects non-finite values and wrong layouts") {
  Network net({2, 2}, OutputHead::linear);
  CHECK_THROWS_AS(set_all(net, {0, 0, 0, std::numeric_limits<double>::quiet_NaN(), 0, 0}), NumericError);
  CHECK_THROWS_AS(net.set_params(ParamVector({1.0, 2.0}, {{1, 2}})), ShapeError);
}

TEST_CASE("parameter layout") {
  Network net({3, 5, 2}, OutputHead::linear);
  const auto& p = net.params();
  CHECK(p.consistent());
  CHECK(p.size() == 3 * 5 + 5 + 5 * 2 + 2);
  REQUIRE(p.shapes.size() == 4);
  CHECK(p.shapes[0] == Shape{3, 5});
  CHECK(p.shapes[1] == Shape{1, 5});
  CHECK(net.weight_offset(1) == 20);
}

TEST_CASE("initialization schemes") {
  Rng rng(1);
  Network net({10, 50, 3}, OutputHead::linear);
  net.initialize(InitScheme::uniform, 0.3, rng);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto w = net.weight(l);
    for (std::size_t i = 0; i < w.rows; ++i)
      for (std::size_t j = 0; j < w.cols; ++j) CHECK(std::abs(w(i, j)) <= 0.3);
    for (double b : net.bias(l)) CHECK(b == 0.0);
  }
  net.initialize(InitScheme::fan_in, 0.0, rng);
  const double bound = std::sqrt(6.0 / 10.0);
  const auto w0 = net.weight(0);
  double biggest = 0.0;
  for (std::size_t i = 0; i < w0.rows; ++i)
    for (std::size_t j = 0; j < w0.cols; ++j) biggest = std::max(biggest, std::abs(w0(i, j)));
  CHECK(biggest <= bound);
  CHECK(biggest > 0.5 * bound);
}

TEST_CASE("loss examples") {
  CHECK(loss(Matrix{{1.0}}, Targets::regression(Matrix{{1.0}}), LossKind::mse) == 0.0);
  CHECK(loss(Matrix{{0.0}, {2.0}}, Targets::regression(Matrix{{1.0}, {0.0}}), LossKind::mse) == 2.5);
  CHECK(loss(Matrix{{1.0, 0.0}}, Targets::labels({0}), LossKind::softmax_cross_entropy) == 0.0);
  CHECK(loss(Matrix{{0.25, 0.75}}, Targets::labels({1}), LossKind::softmax_cross_entropy) ==
        doctest::Approx(-std::log(0.75)));
  CHECK_THROWS_AS(loss(Matrix{{1.0}}, Targets::regression(Matrix{{1.0}, {2.0}}), LossKind::mse), ShapeError);
  CHECK_THROWS_AS(loss(Matrix{{0.5, 0.5}}, Targets::labels({2}), LossKind::softmax_cross_entropy), ShapeError);
}

TEST_CASE("masked mse averages over masked-in entries only") {
  const Matrix out{{1.0, 5.0}, {0.0, 3.0}};
  const Matrix y{{0.0, 100.0}, {0.0, 1.0}};
  const Matrix m{{1.0, 0.0}, {0.0, 1.0}};
  CHECK(loss(out, Targets::masked(y, m), LossKind::mse) == doctest::Approx((1.0 + 4.0) / 2.0));
}

TEST_CASE("cross-entropy from logits matches the probability form") {
  const Matrix logits{{2.0, -1.0, 0.5}, {800.0, 0.0, -800.0}};
  Network soft({1, 3}, OutputHead::softmax);
  const double direct = softmax_cross_entropy_from_logits(logits, std::vector<std::size_t>{0, 0});
  const double expected0 = -(2.0 - std::log(std::exp(2.0) + std::exp(-1.0) + std::exp(0.5)));
  CHECK(direct == doctest::Approx(expected0 / 2.0));
}

TEST_CASE("backward examples") {
  Network net({1, 1}, OutputHead::linear);
  set_all(net, {3.0, 0.0});
  const Matrix x{{1.0}};
  auto fr = forward(net, x, Mode::train);
  const Gradient g = backward(net, fr.cache, Targets::regression(Matrix{{0.0}}), LossKind::mse);
  CHECK(g.values[0] == 6.0);
  CHECK(g.values[1] == 6.0);

  const Gradient zero = backward(net, fr.cache, Targets::regression(Matrix{{3.0}}), LossKind::mse);
  for (double v : zero.values) CHECK(v == 0.0);
}

TEST_CASE("backward rejects stale and eval-mode caches") {
  Network net({2, 3, 1}, OutputHead::linear);
  const Matrix x{{0.1, 0.2}};
  const Targets y = Targets::regression(Matrix{{1.0}});
  auto ev = forward(net, x, Mode::eval);
  CHECK_THROWS_AS(backward(net, ev.cache, y, LossKind::mse), ContractError);
  auto tr = forward(net, x, Mode::train);
  set_all(net, net.params().values);
  CHECK_THROWS_AS(backward(net, tr.cache, y, LossKind::mse), ContractError);
  CHECK_THROWS_AS(backward(net, forward(net, x, Mode::train).cache, Targets::labels({0}),
                           LossKind::softmax_cross_entropy),
                  ContractError);
}

TEST_CASE("gradients match central finite differences on 20 random networks") {
  Rng rng(2024);
  std::uniform_int_distribution<std::size_t> width(1, 6), depth(1, 3), outs(1, 3), rows(1, 6);
  int checked = 0;
  while (checked < 20) {
    std::vector<std::size_t> layers{width(rng)};
    const std::size_t hidden = depth(rng);
    for (std::size_t h = 0; h < hidden; ++h) layers.push_back(width(rng));
    const int variant = checked % 3;
    layers.push_back(variant == 1 ? outs(rng) + 1 : outs(rng));
    const OutputHead head = variant == 1 ? OutputHead::softmax : OutputHead::linear;
    Network net(layers, head);
    if (net.params().size() > 200) continue;
    net.initialize(InitScheme::uniform, 1.0, rng);
    // Nonzero biases so no unit sits exactly at the ReLU kink.
    std::vector<double> theta = net.params().values;
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    for (auto& v : theta) v += 0.1 * jitter(rng);
    set_all(net, theta);

    const std::size_t n = rows(rng);
    const Matrix x = random_matrix(n, layers.front(), rng);
    Targets y;
    LossKind kind = LossKind::mse;
    if (variant == 0) {
      y = Targets::regression(random_matrix(n, layers.back(), rng));
    } else if (variant == 1) {
      std::uniform_int_distribution<std::size_t> cls(0, layers.back() - 1);
      std::vector<std::size_t> c(n);
      for (auto& v : c) v = cls(rng);
      y = Targets::labels(c);
      kind = LossKind::softmax_cross_entropy;
    } else {
      Matrix mask(n, layers.back());
      std::uniform_int_distribution<std::size_t> pick(0, layers.back() - 1);
      for (std::size_t i = 0; i < n; ++i) mask(i, pick(rng)) = 1.0;
      y = Targets::masked(random_matrix(n, layers.back(), rng), mask);
    }

    const auto fr = forward(net, x, Mode::train);
    const Gradient analytic = backward(net, fr.cache, y, kind);
    const auto numeric = numeric_gradient(net, x, y, kind);
    CAPTURE(checked);
    CHECK(max_relative_error(analytic.values, numeric) < 1e-5);
    ++checked;
  }
}

TEST_CASE("gradients respect the cached dropout masks") {
  Rng rng(9);
  Network net({3, 8, 8, 2}, OutputHead::linear, 0.4);
  net.initialize(InitScheme::uniform, 0.8, rng);
  const Matrix x = random_matrix(4, 3, rng);
  const Targets y = Targets::regression(random_matrix(4, 2, rng));
  const auto fr = forward(net, x, Mode::train, &rng);
  const Gradient g = backward(net, fr.cache, y, LossKind::mse);

  // A frozen-mask copy of the network: scale hidden units by the stored
  // masks through a finite-difference loss evaluated with those masks.
  const double h = 1e-5;
  auto masked_loss = [&](const std::vector<double>& theta) {
    Network probe = net;
    set_all(probe, theta);
    Matrix a = x;
    for (std::size_t l = 0; l < probe.num_layers(); ++l) {
      const auto w = probe.weight(l);
      const auto b = probe.bias(l);
      Matrix z(a.rows(), w.cols);
      for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < w.cols; ++j) {
          double s = b[j];
          for (std::size_t k = 0; k < w.rows; ++k) s += a(i, k) * w(k, j);
          z(i, j) = s;
        }
      if (l + 1 < probe.num_layers()) {
        for (std::size_t i = 0; i < z.rows(); ++i)
          for (std::size_t j = 0; j < z.cols(); ++j)
            z(i, j) = std::max(0.0, z(i, j)) * fr.cache.dropout_scale[l](i, j);
      }
      a = z;
    }
    return loss(a, y, LossKind::mse);
  };
  std::vector<double> theta = net.params().values;
  std::vector<double> numeric(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    const double up = masked_loss(theta);
    theta[i] = keep - h;
    const double down = masked_loss(theta);
    theta[i] = keep;
    numeric[i] = (up - down) / (2 * h);
  }
  CHECK(max_relative_error(g.values, numeric) < 1e-5);
}

TEST_CASE("masked outputs receive exactly zero gradient") {
  Rng rng(4);
  Network net({2, 16, 16, 5}, OutputHead::linear);
  net.initialize(InitScheme::uniform, 0.3, rng);
  const std::size_t n = 32;
  const Matrix x = random_matrix(n, 2, rng);
  Matrix mask(n, 5);
  for (std::size_t i = 0; i < n; ++i) mask(i, i % 2 == 0 ? 1 : 3) = 1.0;
  const Targets y = Targets::masked(random_matrix(n, 5, rng, 0, 50), mask);
  const auto fr = forward(net, x, Mode::train);
  const Gradient g = backward(net, fr.cache, y, LossKind::mse);

  const std::size_t last = net.num_layers() - 1;
  const std::size_t off = net.weight_offset(last);
  const std::size_t fan_in = net.layer_sizes()[last];
  for (std::size_t col : {0u, 2u, 4u}) {
    for (std::size_t k = 0; k < fan_in; ++k) CHECK(g.values[off + k * 5 + col] == 0.0);
    CHECK(g.values[off + fan_in * 5 + col] == 0.0);
  }
  bool any_nonzero = false;
  for (std::size_t k = 0; k < fan_in; ++k) any_nonzero |= g.values[off + k * 5 + 1] != 0.0;
  CHECK(any_nonzero);
}

TEST_CASE("softmax rows sum to one with entries in (0, 1]") {
  Rng rng(8);
  Network net({4, 10, 6}, OutputHead::softmax);
  net.initialize(InitScheme::uniform, 3.0, rng);
  const Matrix p = predict(net, random_matrix(200, 4, rng, -5, 5));
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (double v : p.row(i)) {
      CHECK(v > 0.0);
      // A dominant logit rounds its probability to exactly 1.
      CHECK(v <= 1.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("dropout drop fraction is within three binomial standard deviations") {
  Rng rng(77);
  const std::size_t n = 100000;
  for (double r : {0.05, 0.25, 0.5, 0.9}) {
    const Matrix m = dropout_mask(1, n, r, rng);
    std::size_t dropped = 0;
    for (double v : m.values()) {
      if (v == 0.0)
        ++dropped;
      else
        CHECK(v == 1.0 / (1.0 - r));
    }
    const double sd = std::sqrt(r * (1 - r) / static_cast<double>(n));
    CAPTURE(r);
    CHECK(std::abs(static_cast<double>(dropped) / n - r) <= 3 * sd);
  }
}

TEST_CASE("dropout rate zero is an exact identity") {
  Rng rng(5);
  const Matrix m = dropout_mask(3, 7, 0.0, rng);
  for (double v : m.values()) CHECK(v == 1.0);

  Network net({3, 12, 12, 2}, OutputHead::linear, 0.0);
  net.initialize(InitScheme::uniform, 0.5, rng);
  const Matrix x = random_matrix(9, 3, rng);
  CHECK(forward(net, x, Mode::train, &rng).outputs == predict(net, x));
}

TEST_CASE("inverted dropout keeps the expected pre-activation") {
  // One hidden layer and a linear head: the head output is linear in the
  // dropped activations, so its train-mode mean equals the eval output.
  Rng rng(12);
  Network net({2, 20, 1}, OutputHead::linear, 0.25);
  net.initialize(InitScheme::uniform, 0.5, rng);
  const Matrix x{{0.3, -0.7}};
  const double eval = predict(net, x)(0, 0);
  const std::size_t draws = 40000;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double v = forward(net, x, Mode::train, &rng).outputs(0, 0);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / draws;
  const double var = sum_sq / draws - mean * mean;
  CHECK(std::abs(mean - eval) <= 4 * std::sqrt(var / draws));
}

TEST_CASE("eval forward is a pure function") {
  Rng rng(6);
  Network net({5, 30, 30, 4}, OutputHead::softmax, 0.3);
  net.initialize(InitScheme::fan_in, 0.0, rng);
  const Matrix x = random_matrix(64, 5, rng);
  const Matrix a = predict(net, x);
  const Matrix b = forward(net, x, Mode::eval).outputs;
  CHECK(a == b);
  CHECK(predict(net, x) == a);
}

TEST_CASE("clip_gradient examples and idempotence") {
  const Gradient a({3.0, 4.0}, {{1, 2}});
  CHECK(clip_gradient(a, 5.0).values == std::vector<double>{3.0, 4.0});
  const Gradient b({6.0, 8.0}, {{1, 2}});
  const Gradient cb = clip_gradient(b, 5.0);
  CHECK(cb.values[0] == doctest::Approx(3.0));
  CHECK(cb.values[1] == doctest::Approx(4.0));
  CHECK(l2_norm(cb.values) == doctest::Approx(5.0));
  const Gradient z({0.0, 0.0}, {{1, 2}});
  CHECK(clip_gradient(z, 1.0).values == z.values);
  CHECK_THROWS_AS(clip_gradient(a, 0.0), ContractError);

  Rng rng(3);
  std::normal_distribution<double> nd(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    Gradient g(std::vector<Shape>{{1, 17}});
    for (auto& v : g.values) v = nd(rng);
    for (double c : {0.1, 1.0, 5.0, 1e3}) {
      const Gradient once = clip_gradient(g, c);
      CHECK(clip_gradient(once, c).values == once.values);
      CHECK(l2_norm(once.values) <= c * (1 + 1e-12));
    }
  }
}

TEST_CASE("argmax_rows picks the first maximum") {
  const Matrix m{{1.0, 3.0, 3.0}, {-1.0, -2.0, -3.0}};
  CHECK(argmax_rows(m) == std::vector<std::size_t>{1, 0});
}
