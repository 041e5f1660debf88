#include "badam/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "badam/errors.hpp"

namespace badam::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = std::size_t{1} << 16;

constexpr std::size_t kRowTile = 4;
constexpr std::size_t kColBlock = 512;
constexpr std::size_t kDepthBlock = 256;

// C (+)= op(A) * B where op(A)(i, k) = a[i * row_step + k * depth_step].
// Each C element is accumulated in ascending k, matching the serial loops.
void gemm_strided(const double* a, std::size_t row_step, std::size_t depth_step, ConstMatrixView b,
                  MatrixView c, std::size_t depth, bool accumulate) {
  const std::size_t m = c.rows;
  const std::size_t n = c.cols;
  const std::size_t tiles = (m + kRowTile - 1) / kRowTile;
  const bool parallel = m * n * depth >= kParallelWork && tiles > 1;

#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t tile = 0; tile < tiles; ++tile) {
    const std::size_t i0 = tile * kRowTile;
    const std::size_t i1 = std::min(m, i0 + kRowTile);
    if (!accumulate) {
      for (std::size_t i = i0; i < i1; ++i) std::fill_n(c.data + i * c.stride, n, 0.0);
    }
    for (std::size_t k0 = 0; k0 < depth; k0 += kDepthBlock) {
      const std::size_t k1 = std::min(depth, k0 + kDepthBlock);
      for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
        const std::size_t j1 = std::min(n, j0 + kColBlock);
        if (i1 - i0 == kRowTile) {
          double* __restrict c0 = c.data + i0 * c.stride;
          double* __restrict c1 = c0 + c.stride;
          double* __restrict c2 = c1 + c.stride;
          double* __restrict c3 = c2 + c.stride;
          for (std::size_t k = k0; k < k1; ++k) {
            const double a0 = a[i0 * row_step + k * depth_step];
            const double a1 = a[(i0 + 1) * row_step + k * depth_step];
            const double a2 = a[(i0 + 2) * row_step + k * depth_step];
            const double a3 = a[(i0 + 3) * row_step + k * depth_step];
            const double* __restrict bk = b.data + k * b.stride;
#pragma omp simd
            for (std::size_t j = j0; j < j1; ++j) {
              const double bv = bk[j];
              c0[j] += a0 * bv;
              c1[j] += a1 * bv;
              c2[j] += a2 * bv;
              c3[j] += a3 * bv;
            }
          }
        } else {
          for (std::size_t i = i0; i < i1; ++i) {
            double* __restrict ci = c.data + i * c.stride;
            for (std::size_t k = k0; k < k1; ++k) {
              const double aik = a[i * row_step + k * depth_step];
              const double* __restrict bk = b.data + k * b.stride;
#pragma omp simd
              for (std::size_t j = j0; j < j1; ++j) ci[j] += aik * bk[j];
            }
          }
        }
      }
    }
  }
}

bool parallel_for_size(std::size_t n) { return n >= kParallelWork; }

}  // namespace

void gemm_nn(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw ShapeError("gemm_nn: incompatible shapes");
  gemm_strided(a.data, a.stride, 1, b, c, a.cols, accumulate);
}

void gemm_tn(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols)
    throw ShapeError("gemm_tn: incompatible shapes");
  gemm_strided(a.data, 1, a.stride, b, c, a.rows, accumulate);
}

void gemm_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows)
    throw ShapeError("gemm_nt: incompatible shapes");
  // Materialise B^T so the inner loop runs over contiguous memory.
  std::vector<double> bt(b.cols * b.rows);
  for (std::size_t r = 0; r < b.rows; ++r)
    for (std::size_t k = 0; k < b.cols; ++k) bt[k * b.rows + r] = b(r, k);
  const ConstMatrixView btv{bt.data(), b.cols, b.rows, b.rows};
  gemm_strided(a.data, a.stride, 1, btv, c, a.cols, accumulate);
}

void add_row_vector(MatrixView c, std::span<const double> bias) {
  if (bias.size() != c.cols) throw ShapeError("add_row_vector: bias length mismatch");
#pragma omp parallel for schedule(static) if (parallel_for_size(c.rows * c.cols))
  for (std::size_t i = 0; i < c.rows; ++i) {
    double* __restrict ci = c.data + i * c.stride;
#pragma omp simd
    for (std::size_t j = 0; j < c.cols; ++j) ci[j] += bias[j];
  }
}

void column_sums(ConstMatrixView a, std::span<double> out) {
  if (out.size() != a.cols) throw ShapeError("column_sums: output length mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  constexpr std::size_t kBlock = 64;
  const std::size_t blocks = (a.cols + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static) if (parallel_for_size(a.rows * a.cols) && blocks > 1)
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const std::size_t j0 = blk * kBlock;
    const std::size_t j1 = std::min(a.cols, j0 + kBlock);
    for (std::size_t i = 0; i < a.rows; ++i) {
      const double* __restrict ai = a.data + i * a.stride;
#pragma omp simd
      for (std::size_t j = j0; j < j1; ++j) out[j] += ai[j];
    }
  }
}

void relu_inplace(MatrixView c) {
#pragma omp parallel for schedule(static) if (parallel_for_size(c.rows * c.cols))
  for (std::size_t i = 0; i < c.rows; ++i) {
    double* __restrict ci = c.data + i * c.stride;
#pragma omp simd
    for (std::size_t j = 0; j < c.cols; ++j) ci[j] = ci[j] > 0.0 ? ci[j] : 0.0;
  }
}

void relu_backward(MatrixView grad, ConstMatrixView act, ConstMatrixView scale) {
  if (grad.rows != act.rows || grad.cols != act.cols) throw ShapeError("relu_backward: shape mismatch");
  const bool scaled = scale.data != nullptr;
  if (scaled && (scale.rows != act.rows || scale.cols != act.cols))
    throw ShapeError("relu_backward: mask shape mismatch");
#pragma omp parallel for schedule(static) if (parallel_for_size(grad.rows * grad.cols))
  for (std::size_t i = 0; i < grad.rows; ++i) {
    double* __restrict gi = grad.data + i * grad.stride;
    const double* __restrict ai = act.data + i * act.stride;
    if (scaled) {
      const double* __restrict si = scale.data + i * scale.stride;
#pragma omp simd
      for (std::size_t j = 0; j < grad.cols; ++j) gi[j] = ai[j] > 0.0 ? gi[j] * si[j] : 0.0;
    } else {
#pragma omp simd
      for (std::size_t j = 0; j < grad.cols; ++j) gi[j] = ai[j] > 0.0 ? gi[j] : 0.0;
    }
  }
}

void softmax_rows(MatrixView c) {
#pragma omp parallel for schedule(static) if (parallel_for_size(c.rows * c.cols))
  for (std::size_t i = 0; i < c.rows; ++i) {
    double* ci = c.data + i * c.stride;
    const double mx = *std::max_element(ci, ci + c.cols);
    double total = 0.0;
    for (std::size_t j = 0; j < c.cols; ++j) {
      ci[j] = std::exp(ci[j] - mx);
      total += ci[j];
    }
    for (std::size_t j = 0; j < c.cols; ++j) ci[j] /= total;
  }
}

void multiply_inplace(MatrixView c, ConstMatrixView m) {
  if (c.rows != m.rows || c.cols != m.cols) throw ShapeError("multiply_inplace: shape mismatch");
#pragma omp parallel for schedule(static) if (parallel_for_size(c.rows * c.cols))
  for (std::size_t i = 0; i < c.rows; ++i) {
    double* __restrict ci = c.data + i * c.stride;
    const double* __restrict mi = m.data + i * m.stride;
#pragma omp simd
    for (std::size_t j = 0; j < c.cols; ++j) ci[j] *= mi[j];
  }
}

}  // namespace badam::kernels
