#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tsdrd {

// Dense row-major matrix of doubles. Deliberately minimal: the numeric
// modules write their loops directly against it.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
  bool empty() const { return rows == 0 || cols == 0; }
};

bool all_finite(const Matrix& m);
bool all_finite(const std::vector<double>& v);

// out[b,c] = sum_k x[b,k] * w[c,k] + bias[c]   (w is [fan_out x fan_in])
Matrix affine_forward(const Matrix& x, const Matrix& w,
                      const std::vector<double>& bias);

}  // namespace tsdrd
