#pragma once

#include <cstddef>
#include <vector>

#include "blv/errors.hpp"

namespace blv {

// Minimal dense row-major matrix of double; all the linear algebra this
// library needs is element access, column extraction and dot products.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }

  std::vector<double> column(int c) const {
    std::vector<double> out(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) out[static_cast<std::size_t>(r)] = (*this)(r, c);
    return out;
  }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Matrix&) const = default;
};

}  // namespace blv
