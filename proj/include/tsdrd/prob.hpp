#pragma once

#include <span>
#include <vector>

#include "tsdrd/matrix.hpp"

namespace tsdrd {

// Clamp floor used in every log of a probability.
inline constexpr double kProbEps = 1e-12;

// Numerically stable softmax (max-subtraction). Output is a valid
// distribution: positive components summing to 1.
std::vector<double> softmax(std::span<const double> logits);
void softmax_into(std::span<const double> logits, std::span<double> out);

// Row-wise softmax of a [B x C] logits batch.
Matrix softmax_rows(const Matrix& logits);

// Given q = softmax(logits) for one row and g = dL/dq, writes
// dL/dlogits[j] = q[j] * (g[j] - sum_k g[k] q[k]).
void softmax_backward_row(std::span<const double> q, std::span<const double> g,
                          std::span<double> dlogits);

// Argmax with deterministic tie-breaking: lowest index wins.
std::size_t argmax_lowest(std::span<const double> v);

// Jensen-Shannon divergence, log base 2, range [0, 1].
double jsd(std::span<const double> p, std::span<const double> q);

// Checks every row sums to 1 within tol and entries are non-negative;
// throws std::runtime_error naming the offending row otherwise.
void require_prob_rows(const Matrix& m, double tol, const char* what);

}  // namespace tsdrd
