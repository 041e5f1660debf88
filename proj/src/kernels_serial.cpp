#include <algorithm>
#include <cmath>

#include "badam/errors.hpp"
#include "badam/kernels.hpp"

namespace badam::kernels::serial {

void gemm_nn(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw ShapeError("gemm_nn: incompatible shapes");
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) {
      double acc = accumulate ? c(i, j) : 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
}

void gemm_tn(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols)
    throw ShapeError("gemm_tn: incompatible shapes");
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) {
      double acc = accumulate ? c(i, j) : 0.0;
      for (std::size_t k = 0; k < a.rows; ++k) acc += a(k, i) * b(k, j);
      c(i, j) = acc;
    }
}

void gemm_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate) {
  if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows)
    throw ShapeError("gemm_nt: incompatible shapes");
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) {
      double acc = accumulate ? c(i, j) : 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(j, k);
      c(i, j) = acc;
    }
}

void add_row_vector(MatrixView c, std::span<const double> bias) {
  if (bias.size() != c.cols) throw ShapeError("add_row_vector: bias length mismatch");
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) c(i, j) += bias[j];
}

void column_sums(ConstMatrixView a, std::span<double> out) {
  if (out.size() != a.cols) throw ShapeError("column_sums: output length mismatch");
  for (std::size_t j = 0; j < a.cols; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) acc += a(i, j);
    out[j] = acc;
  }
}

void relu_inplace(MatrixView c) {
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) c(i, j) = std::max(c(i, j), 0.0);
}

void relu_backward(MatrixView grad, ConstMatrixView act, ConstMatrixView scale) {
  if (grad.rows != act.rows || grad.cols != act.cols) throw ShapeError("relu_backward: shape mismatch");
  for (std::size_t i = 0; i < grad.rows; ++i)
    for (std::size_t j = 0; j < grad.cols; ++j) {
      if (act(i, j) <= 0.0) {
        grad(i, j) = 0.0;
      } else if (scale.data != nullptr) {
        grad(i, j) *= scale(i, j);
      }
    }
}

void softmax_rows(MatrixView c) {
  for (std::size_t i = 0; i < c.rows; ++i) {
    double mx = c(i, 0);
    for (std::size_t j = 1; j < c.cols; ++j) mx = std::max(mx, c(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < c.cols; ++j) {
      c(i, j) = std::exp(c(i, j) - mx);
      total += c(i, j);
    }
    for (std::size_t j = 0; j < c.cols; ++j) c(i, j) /= total;
  }
}

void multiply_inplace(MatrixView c, ConstMatrixView m) {
  if (c.rows != m.rows || c.cols != m.cols) throw ShapeError("multiply_inplace: shape mismatch");
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) c(i, j) *= m(i, j);
}

}  // namespace badam::kernels::serial
