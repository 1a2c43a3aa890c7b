#pragma once

#include <vector>

#include "tsdrd/matrix.hpp"

namespace tsdrd {

// Joint assignment matrix underlying the mutual-information objective.
struct JointMatrix {
  Matrix joint;                       // [C x C], symmetrized, sums to 1
  std::vector<double> row_marginal;   // [C]
  std::vector<double> col_marginal;   // [C]
};

struct MutualInformationResult {
  double value = 0.0;
  JointMatrix joint;
};

// I(P, Q) over two [B x C] probability batches:
//   J = (1/B) sum_b p_b q_b^T, symmetrized J <- (J + J^T)/2,
//   I = sum_ij J_ij ln(J_ij / (r_i c_j)) with 1e-12 clamping.
// Symmetric in its arguments and bounded in [-1e-9, ln C + 1e-9].
MutualInformationResult mutual_information(const Matrix& p, const Matrix& q);

// sum_c qbar_c ln qbar_c where qbar is the batch-mean distribution.
// Range [-ln C, 0]; minimized by a uniform batch mean.
double entropy_balance(const Matrix& q);

// Mean over the batch of -ln q[b, label_b] with clamped log.
double pseudo_label_ce(const Matrix& probs, const std::vector<int>& labels);

// The three terms of the student objective, stored unweighted:
//   total = alpha*l_mu + gamma*l_en + beta*l_pl
// with l_mu = -I(q_d, q_i), l_en = entropy_balance(q_i), l_pl = CE.
struct LossBreakdown {
  double l_mu = 0.0;
  double l_en = 0.0;
  double l_pl = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

struct StudentLossResult {
  LossBreakdown parts;
  Matrix dlogits;                   // dL/d(student logits), exact
  std::vector<int> pseudo_labels;   // argmax of the region distribution
};

// Composite student loss. Region logits are constants: gradients flow into
// the student logits only, through q_i = softmax(student_logits).
StudentLossResult student_loss(const Matrix& region_logits,
                               const Matrix& student_logits, double alpha,
                               double beta, double gamma);

struct TeacherLossResult {
  double value = 0.0;
  Matrix dlogits;  // dL/d(teacher logits), exact
};

// L_v = -I(q_v, q_i) with q_i held constant; gradient w.r.t. the teacher
// logits through q_v.
TeacherLossResult teacher_loss(const Matrix& q_v, const Matrix& q_i);

}  // namespace tsdrd
