#pragma once

#include <cmath>
#include <initializer_list>
#include <vector>

#include "banet/common.hpp"

namespace banet::nn {

// Dense row-major double matrix.
class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw usage_error("Matrix: negative dimension");
  }

  static Matrix of(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<int>(rows.size()),
             rows.size() ? static_cast<int>(rows.begin()->size()) : 0);
    int r = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != m.cols_)
        throw usage_error("Matrix::of: ragged rows");
      int c = 0;
      for (double v : row) m(r, c++) = v;
      ++r;
    }
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return d_.size(); }

  double& operator()(int r, int c) { return d_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return d_[static_cast<size_t>(r) * cols_ + c]; }

  double* row(int r) { return d_.data() + static_cast<size_t>(r) * cols_; }
  const double* row(int r) const { return d_.data() + static_cast<size_t>(r) * cols_; }

  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }

  bool all_finite() const {
    for (double v : d_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Matrix&) const = default;

private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> d_;
};

} // namespace banet::nn
