#pragma once

#include <span>

#include "badam/matrix.hpp"

// Dense kernels behind the network engine.
//
// `badam::kernels` holds the OpenMP versions used by training. Work is split
// over output rows (or output columns for reductions) only, so every output
// element is accumulated in the same order whatever the thread count and
// results are reproducible bit for bit across OMP_NUM_THREADS settings.
//
// `badam::kernels::serial` holds straightforward loop nests with the same
// signatures. They are kept as the reference the tests compare against and
// as the baseline in bench/.

namespace badam::kernels {

/// C = A * B, or C += A * B when `accumulate`. A is M x K, B is K x N.
void gemm_nn(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate = false);
/// C = A^T * B (or +=). A is K x M, B is K x N.
void gemm_tn(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate = false);
/// C = A * B^T (or +=). A is M x K, B is N x K.
void gemm_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate = false);

/// Adds `bias` to every row of C.
void add_row_vector(MatrixView c, std::span<const double> bias);
/// out[j] = sum_i A(i, j), summed in ascending row order.
void column_sums(ConstMatrixView a, std::span<double> out);
void relu_inplace(MatrixView c);
/// grad(i,j) *= scale(i,j) if act(i,j) > 0, else 0. `scale` may be empty
/// (no dropout), in which case the factor is 1.
void relu_backward(MatrixView grad, ConstMatrixView act, ConstMatrixView scale);
/// Row-wise softmax with max subtraction.
void softmax_rows(MatrixView c);
/// c *= m element-wise.
void multiply_inplace(MatrixView c, ConstMatrixView m);

namespace serial {

void gemm_nn(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate = false);
void gemm_tn(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate = false);
void gemm_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c, bool accumulate = false);
void add_row_vector(MatrixView c, std::span<const double> bias);
void column_sums(ConstMatrixView a, std::span<double> out);
void relu_inplace(MatrixView c);
void relu_backward(MatrixView grad, ConstMatrixView act, ConstMatrixView scale);
void softmax_rows(MatrixView c);
void multiply_inplace(MatrixView c, ConstMatrixView m);

}  // namespace serial

}  // namespace badam::kernels
