// OpenMP kernels against the serial reference, on the shapes that dominate
// training: a minibatch times a hidden layer, forward and both backward GEMMs.

#include <random>

#include <benchmark/benchmark.h>

#include "badam/kernels.hpp"

namespace {

using badam::Matrix;
namespace k = badam::kernels;

Matrix random_matrix(std::size_t rows, std::size_t cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

// Args: batch, fan_in, fan_out.
void shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 784, 400})->Args({128, 400, 400})->Args({512, 100, 100})->Args({32, 100, 100});
}

template <auto Gemm>
void forward(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto kk = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Matrix a = random_matrix(m, kk, 1);
  const Matrix b = random_matrix(kk, n, 2);
  Matrix c(m, n);
  for (auto _ : state) {
    Gemm(a.view(), b.view(), c.view(), false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * m * kk * n));
}

// dW = X^T dY
template <auto Gemm>
void weight_grad(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto kk = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Matrix x = random_matrix(m, kk, 3);
  const Matrix dy = random_matrix(m, n, 4);
  Matrix dw(kk, n);
  for (auto _ : state) {
    Gemm(x.view(), dy.view(), dw.view(), false);
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * m * kk * n));
}

// dX = dY W^T
template <auto Gemm>
void input_grad(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto kk = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Matrix dy = random_matrix(m, n, 5);
  const Matrix w = random_matrix(kk, n, 6);
  Matrix dx(m, kk);
  for (auto _ : state) {
    Gemm(dy.view(), w.view(), dx.view(), false);
    benchmark::DoNotOptimize(dx.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * m * kk * n));
}

template <auto Sums>
void column_sums(benchmark::State& state) {
  const Matrix a = random_matrix(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(2)), 7);
  std::vector<double> out(a.cols());
  for (auto _ : state) {
    Sums(a.view(), out);
    benchmark::DoNotOptimize(out.data());
  }
}

void gemm_nn_omp(benchmark::State& s) { forward<k::gemm_nn>(s); }
void gemm_nn_serial(benchmark::State& s) { forward<k::serial::gemm_nn>(s); }
void gemm_tn_omp(benchmark::State& s) { weight_grad<k::gemm_tn>(s); }
void gemm_tn_serial(benchmark::State& s) { weight_grad<k::serial::gemm_tn>(s); }
void gemm_nt_omp(benchmark::State& s) { input_grad<k::gemm_nt>(s); }
void gemm_nt_serial(benchmark::State& s) { input_grad<k::serial::gemm_nt>(s); }
void column_sums_omp(benchmark::State& s) { column_sums<k::column_sums>(s); }
void column_sums_serial(benchmark::State& s) { column_sums<k::serial::column_sums>(s); }

}  // namespace

BENCHMARK(gemm_nn_omp)->Apply(shapes);
BENCHMARK(gemm_nn_serial)->Apply(shapes);
BENCHMARK(gemm_tn_omp)->Apply(shapes);
BENCHMARK(gemm_tn_serial)->Apply(shapes);
BENCHMARK(gemm_nt_omp)->Apply(shapes);
BENCHMARK(gemm_nt_serial)->Apply(shapes);
BENCHMARK(column_sums_omp)->Apply(shapes);
BENCHMARK(column_sums_serial)->Apply(shapes);

BENCHMARK_MAIN();
