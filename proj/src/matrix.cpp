#include "tsdrd/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace tsdrd {

bool all_finite(const Matrix& m) {
  for (double v : m.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix affine_forward(const Matrix& x, const Matrix& w,
                      const std::vector<double>& bias) {
  if (x.cols != w.cols) {
    throw std::runtime_error("affine_forward: input width " +
                             std::to_string(x.cols) + " != fan_in " +
                             std::to_string(w.cols));
  }
  if (bias.size() != w.rows) {
    throw std::runtime_error("affine_forward: bias size mismatch");
  }
  Matrix out(x.rows, w.rows);
  for (std::size_t b = 0; b < x.rows; ++b) {
    const double* xb = x.data.data() + b * x.cols;
    double* ob = out.data.data() + b * out.cols;
    for (std::size_t c = 0; c < w.rows; ++c) {
      const double* wc = w.data.data() + c * w.cols;
      double acc = bias[c];
      for (std::size_t k = 0; k < x.cols; ++k) acc += xb[k] * wc[k];
      ob[c] = acc;
    }
  }
  return out;
}

}  // namespace tsdrd
