#pragma once

#include "vpf/matrix.hpp"

/// Dense linear-algebra kernels used by the network layers.
///
/// The top-level functions are OpenMP-parallel over output rows. Every output
/// element is produced by exactly one thread with a fixed summation order, so
/// results do not depend on the thread count. `vpf::kernels::serial` holds the
/// plain triple-loop reference versions the tests and benchmarks compare
/// against.
namespace vpf::kernels {

/// C = A * B  (or C += A * B when accumulate). A: m x k, B: k x n.
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

/// C = A^T * B  (or +=). A: k x m, B: k x n.
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

/// C = A * B^T  (or +=). A: m x k, B: n x k.
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

/// c[r, :] += bias for every row r. bias: 1 x n.
void add_row_bias(Matrix& c, const Matrix& bias);

/// out[0, j] += sum_r a[r, j], rows summed in ascending order.
void accumulate_column_sums(const Matrix& a, Matrix& out);

namespace serial {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

}  // namespace serial

}  // namespace vpf::kernels
