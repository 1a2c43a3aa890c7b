#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tsdrd/matrix.hpp"
#include "tsdrd/rng.hpp"

namespace testutil {

// Max absolute difference scaled by the overall gradient magnitude. Robust to
// individual entries near zero while staying tight for healthy gradients.
inline double max_rel_err(const std::vector<double>& a,
                          const std::vector<double>& b) {
  double scale = 1e-8;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst / scale;
}

// Central finite difference of f() w.r.t. the value behind `slot`.
template <typename F>
double central_diff(double& slot, F&& f, double h = 1e-5) {
  const double orig = slot;
  slot = orig + h;
  const double fp = f();
  slot = orig - h;
  const double fm = f();
  slot = orig;
  return (fp - fm) / (2.0 * h);
}

inline tsdrd::Matrix random_matrix(std::size_t rows, std::size_t cols,
                                   tsdrd::Rng& rng, double lo = -1.0,
                                   double hi = 1.0) {
  tsdrd::Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(lo, hi);
  return m;
}

// Random batch of probability rows (softmax of random logits).
tsdrd::Matrix random_prob_rows(std::size_t rows, std::size_t cols,
                               tsdrd::Rng& rng, double spread = 2.0);

}  // namespace testutil
