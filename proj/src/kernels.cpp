#include "vpf/kernels.hpp"

#include <cstddef>

namespace vpf::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelThreshold = 1u << 15;

void check_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.cols() != b.rows())
    throw Error(ErrorKind::Dimension, "gemm_nn: " + shape_string(a) + " * " + shape_string(b));
  if (accumulate)
    require_shape(c, a.rows(), b.cols(), "gemm_nn output");
  else if (c.rows() != a.rows() || c.cols() != b.cols())
    c.resize(a.rows(), b.cols());
}

void check_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.rows() != b.rows())
    throw Error(ErrorKind::Dimension, "gemm_tn: " + shape_string(a) + "^T * " + shape_string(b));
  if (accumulate)
    require_shape(c, a.cols(), b.cols(), "gemm_tn output");
  else if (c.rows() != a.cols() || c.cols() != b.cols())
    c.resize(a.cols(), b.cols());
}

void check_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  if (a.cols() != b.cols())
    throw Error(ErrorKind::Dimension, "gemm_nt: " + shape_string(a) + " * " + shape_string(b) + "^T");
  if (accumulate)
    require_shape(c, a.rows(), b.rows(), "gemm_nt output");
  else if (c.rows() != a.rows() || c.cols() != b.rows())
    c.resize(a.rows(), b.rows());
}

inline double dot4(const double* __restrict x, const double* __restrict y, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc[0] += x[i] * y[i];
    acc[1] += x[i + 1] * y[i + 1];
    acc[2] += x[i + 2] * y[i + 2];
    acc[3] += x[i + 3] * y[i + 3];
  }
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_nn(a, b, c, accumulate);
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t k = a.cols(), n = b.cols();
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel for schedule(static) if (static_cast<std::size_t>(m) * k * n > kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    double* __restrict crow = pc + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    const double* arow = pa + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* __restrict brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_tn(a, b, c, accumulate);
  const std::size_t k = a.rows(), n = b.cols();
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.cols());
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel for schedule(static) if (static_cast<std::size_t>(m) * k * n > kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    double* __restrict crow = pc + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[p * static_cast<std::size_t>(m) + i];
      if (av == 0.0) continue;
      const double* __restrict brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_nt(a, b, c, accumulate);
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t k = a.cols(), n = b.rows();
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
#pragma omp parallel for schedule(static) if (static_cast<std::size_t>(m) * k * n > kParallelThreshold)
  for (std::ptrdiff_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* crow = pc + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double s = dot4(arow, pb + j * k, k);
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void add_row_bias(Matrix& c, const Matrix& bias) {
  require_shape(bias, 1, c.cols(), "row bias");
  const std::size_t n = c.cols();
  for (std::size_t r = 0; r < c.rows(); ++r) {
    double* __restrict crow = c.data() + r * n;
    const double* __restrict pb = bias.data();
    for (std::size_t j = 0; j < n; ++j) crow[j] += pb[j];
  }
}

void accumulate_column_sums(const Matrix& a, Matrix& out) {
  require_shape(out, 1, a.cols(), "column sums");
  const std::size_t n = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* __restrict arow = a.data() + r * n;
    double* __restrict po = out.data();
    for (std::size_t j = 0; j < n; ++j) po[j] += arow[j];
  }
}

namespace serial {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_nn(a, b, c, accumulate);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = accumulate ? c(i, j) : 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_tn(a, b, c, accumulate);
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = accumulate ? c(i, j) : 0.0;
      for (std::size_t p = 0; p < a.rows(); ++p) s += a(p, i) * b(p, j);
      c(i, j) = s;
    }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check_nt(a, b, c, accumulate);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = accumulate ? c(i, j) : 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(j, p);
      c(i, j) = s;
    }
}

}  // namespace serial

}  // namespace vpf::kernels
