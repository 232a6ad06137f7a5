#include "vpf/matrix.hpp"

#include <algorithm>
#include <string>

namespace vpf {

Matrix Matrix::row_block(std::size_t first, std::size_t last) const {
  if (first > last || last > rows_)
    throw Error(ErrorKind::Range, "row block [" + std::to_string(first) + ", " + std::to_string(last) + ") of " +
                                      shape_string(*this));
  Matrix out(last - first, cols_);
  std::copy(data_.begin() + static_cast<std::ptrdiff_t>(first * cols_),
            data_.begin() + static_cast<std::ptrdiff_t>(last * cols_), out.data_.begin());
  return out;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::resize(std::size_t rows, std::size_t cols, double fill) {
  rows_ = rows;
  cols_ = cols;
  data_.assign(rows * cols, fill);
}

std::string shape_string(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void require_shape(const Matrix& a, std::size_t rows, std::size_t cols, const char* what) {
  if (a.rows() != rows || a.cols() != cols) {
    throw Error(ErrorKind::Dimension, std::string(what) + ": expected " + std::to_string(rows) + "x" +
                                          std::to_string(cols) + ", got " + shape_string(a));
  }
}

}  // namespace vpf
