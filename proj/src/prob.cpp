#include "tsdrd/prob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tsdrd {

void softmax_into(std::span<const double> logits, std::span<double> out) {
  if (logits.empty()) throw std::runtime_error("softmax: empty input");
  double hi = logits[0];
  for (double v : logits) hi = std::max(hi, v);
  if (!std::isfinite(hi)) throw std::runtime_error("softmax: non-finite input");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    sum += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  softmax_into(logits, out);
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (std::size_t b = 0; b < logits.rows; ++b) {
    softmax_into(logits.row(b), out.row(b));
  }
  return out;
}

void softmax_backward_row(std::span<const double> q, std::span<const double> g,
                          std::span<double> dlogits) {
  double dot = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) dot += g[k] * q[k];
  for (std::size_t j = 0; j < q.size(); ++j) dlogits[j] = q[j] * (g[j] - dot);
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::runtime_error("jsd: length mismatch");
  const double inv_ln2 = 1.0 / std::log(2.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double m = 0.5 * (p[i] + q[i]);
    double lm = std::log(std::max(m, kProbEps));
    if (p[i] > 0.0) {
      acc += 0.5 * p[i] * (std::log(std::max(p[i], kProbEps)) - lm);
    }
    if (q[i] > 0.0) {
      acc += 0.5 * q[i] * (std::log(std::max(q[i], kProbEps)) - lm);
    }
  }
  return acc * inv_ln2;
}

void require_prob_rows(const Matrix& m, double tol, const char* what) {
  for (std::size_t b = 0; b < m.rows; ++b) {
    double sum = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) {
      double v = m(b, c);
      if (!(v >= 0.0)) {
        throw std::runtime_error(std::string(what) + ": negative entry in row " +
                                 std::to_string(b));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw std::runtime_error(std::string(what) + ": row " + std::to_string(b) +
                               " sums to " + std::to_string(sum));
    }
  }
}

}  // namespace tsdrd
