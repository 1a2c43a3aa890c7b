#include "tsdrd/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tsdrd/prob.hpp"

namespace tsdrd {

namespace {

// Value of I and its exact partial derivatives w.r.t. the (unsymmetrized)
// joint entries. The value differentiates the clamped expression itself, so
// analytic and finite-difference gradients agree even at the clamp boundary.
struct JointGrad {
  double value;
  Matrix d_joint;  // dI/dJ (pre-symmetrization)
  JointMatrix joint;
};

JointGrad mi_from_joint(const Matrix& j_raw) {
  const std::size_t c = j_raw.rows;
  JointGrad out;
  Matrix sym(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      sym(i, k) = 0.5 * (j_raw(i, k) + j_raw(k, i));
    }
  }
  std::vector<double> row(c, 0.0), col(c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      row[i] += sym(i, k);
      col[k] += sym(i, k);
    }
  }

  double value = 0.0;
  Matrix g_sym(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      const double jv = sym(i, k);
      const double a = std::log(std::max(jv, kProbEps)) -
                       std::log(std::max(row[i], kProbEps)) -
                       std::log(std::max(col[k], kProbEps));
      value += jv * a;
      g_sym(i, k) = a + (jv > kProbEps ? 1.0 : 0.0) -
                    (row[i] > kProbEps ? 1.0 : 0.0) -
                    (col[k] > kProbEps ? 1.0 : 0.0);
    }
  }

  out.value = value;
  out.d_joint = Matrix(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      out.d_joint(i, k) = 0.5 * (g_sym(i, k) + g_sym(k, i));
    }
  }
  out.joint.joint = std::move(sym);
  out.joint.row_marginal = std::move(row);
  out.joint.col_marginal = std::move(col);
  return out;
}

Matrix outer_joint(const Matrix& p, const Matrix& q) {
  const std::size_t c = p.cols;
  Matrix j(c, c);
  const double inv_b = 1.0 / static_cast<double>(p.rows);
  for (std::size_t b = 0; b < p.rows; ++b) {
    const double* pb = p.data.data() + b * c;
    const double* qb = q.data.data() + b * c;
    for (std::size_t i = 0; i < c; ++i) {
      const double w = pb[i] * inv_b;
      double* jr = j.data.data() + i * c;
      for (std::size_t k = 0; k < c; ++k) jr[k] += w * qb[k];
    }
  }
  return j;
}

// dI/dq[b, n] = (1/B) sum_m dI/dJ[m, n] * p[b, m]   (q is the second factor)
Matrix mi_grad_wrt_second(const Matrix& p, const Matrix& d_joint) {
  const std::size_t c = p.cols;
  Matrix g(p.rows, c);
  const double inv_b = 1.0 / static_cast<double>(p.rows);
  for (std::size_t b = 0; b < p.rows; ++b) {
    const double* pb = p.data.data() + b * c;
    double* gb = g.data.data() + b * c;
    for (std::size_t n = 0; n < c; ++n) {
      double acc = 0.0;
      for (std::size_t m = 0; m < c; ++m) acc += d_joint(m, n) * pb[m];
      gb[n] = acc * inv_b;
    }
  }
  return g;
}

void check_mi_inputs(const Matrix& p, const Matrix& q) {
  if (!p.same_shape(q)) {
    throw std::runtime_error("mutual_information: shape mismatch");
  }
  if (p.rows == 0 || p.cols == 0) {
    throw std::runtime_error("mutual_information: empty batch");
  }
  require_prob_rows(p, 1e-6, "mutual_information: first batch");
  require_prob_rows(q, 1e-6, "mutual_information: second batch");
}

}  // namespace

MutualInformationResult mutual_information(const Matrix& p, const Matrix& q) {
  check_mi_inputs(p, q);
  JointGrad jg = mi_from_joint(outer_joint(p, q));
  MutualInformationResult out;
  out.value = jg.value;
  out.joint = std::move(jg.joint);
  return out;
}

double entropy_balance(const Matrix& q) {
  require_prob_rows(q, 1e-6, "entropy_balance");
  const std::size_t c = q.cols;
  std::vector<double> mean(c, 0.0);
  for (std::size_t b = 0; b < q.rows; ++b) {
    for (std::size_t k = 0; k < c; ++k) mean[k] += q(b, k);
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    mean[k] /= static_cast<double>(q.rows);
    acc += mean[k] * std::log(std::max(mean[k], kProbEps));
  }
  return acc;
}

double pseudo_label_ce(const Matrix& probs, const std::vector<int>& labels) {
  if (labels.size() != probs.rows) {
    throw std::runtime_error("pseudo_label_ce: label count mismatch");
  }
  double acc = 0.0;
  for (std::size_t b = 0; b < probs.rows; ++b) {
    int y = labels[b];
    if (y < 0 || y >= static_cast<int>(probs.cols)) {
      throw std::runtime_error("pseudo_label_ce: label " + std::to_string(y) +
                               " out of range at row " + std::to_string(b));
    }
    acc -= std::log(std::max(probs(b, static_cast<std::size_t>(y)), kProbEps));
  }
  return acc / static_cast<double>(probs.rows);
}

StudentLossResult student_loss(const Matrix& region_logits,
                               const Matrix& student_logits, double alpha,
                               double beta, double gamma) {
  if (!region_logits.same_shape(student_logits)) {
    throw std::runtime_error("student_loss: shape mismatch");
  }
  const std::size_t batch = student_logits.rows;
  const std::size_t c = student_logits.cols;

  Matrix q_d = softmax_rows(region_logits);
  Matrix q_i = softmax_rows(student_logits);

  StudentLossResult out;
  out.pseudo_labels.resize(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out.pseudo_labels[b] = static_cast<int>(argmax_lowest(q_d.row(b)));
  }

  // dL/dq_i accumulated over the three terms, then pushed through softmax.
  Matrix dq(batch, c);

  JointGrad mi = mi_from_joint(outer_joint(q_d, q_i));
  if (!std::isfinite(mi.value)) {
    throw std::runtime_error("student_loss: non-finite mutual-information term");
  }
  Matrix mi_g = mi_grad_wrt_second(q_d, mi.d_joint);
  for (std::size_t idx = 0; idx < dq.data.size(); ++idx) {
    dq.data[idx] = -alpha * mi_g.data[idx];
  }

  std::vector<double> mean(c, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < c; ++k) mean[k] += q_i(b, k);
  }
  double l_en = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t k = 0; k < c; ++k) {
    mean[k] *= inv_b;
    l_en += mean[k] * std::log(std::max(mean[k], kProbEps));
  }
  if (!std::isfinite(l_en)) {
    throw std::runtime_error("student_loss: non-finite entropy term");
  }
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < c; ++k) {
      double d = std::log(std::max(mean[k], kProbEps)) +
                 (mean[k] > kProbEps ? 1.0 : 0.0);
      dq(b, k) += gamma * d * inv_b;
    }
  }

  double l_pl = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto y = static_cast<std::size_t>(out.pseudo_labels[b]);
    const double qy = q_i(b, y);
    l_pl -= std::log(std::max(qy, kProbEps));
    if (qy > kProbEps) {
      dq(b, y) += beta * (-1.0 / qy) * inv_b;
    }
  }
  l_pl *= inv_b;
  if (!std::isfinite(l_pl)) {
    throw std::runtime_error("student_loss: non-finite pseudo-label term");
  }

  out.dlogits = Matrix(batch, c);
  for (std::size_t b = 0; b < batch; ++b) {
    softmax_backward_row(q_i.row(b), dq.row(b), out.dlogits.row(b));
  }

  out.parts.l_mu = -mi.value;
  out.parts.l_en = l_en;
  out.parts.l_pl = l_pl;
  out.parts.alpha = alpha;
  out.parts.beta = beta;
  out.parts.gamma = gamma;
  out.parts.total = alpha * out.parts.l_mu + gamma * l_en + beta * l_pl;
  if (!std::isfinite(out.parts.total)) {
    throw std::runtime_error("student_loss: non-finite total");
  }
  return out;
}

TeacherLossResult teacher_loss(const Matrix& q_v, const Matrix& q_i) {
  check_mi_inputs(q_v, q_i);
  // I is symmetric under symmetrization, so compute the joint with q_i as the
  // constant first factor and differentiate the second (teacher) factor.
  JointGrad mi = mi_from_joint(outer_joint(q_i, q_v));
  if (!std::isfinite(mi.value)) {
    throw std::runtime_error("teacher_loss: non-finite mutual information");
  }
  Matrix g = mi_grad_wrt_second(q_i, mi.d_joint);

  TeacherLossResult out;
  out.value = -mi.value;
  out.dlogits = Matrix(q_v.rows, q_v.cols);
  for (std::size_t b = 0; b < q_v.rows; ++b) {
    std::vector<double> neg(q_v.cols);
    for (std::size_t k = 0; k < q_v.cols; ++k) neg[k] = -g(b, k);
    softmax_backward_row(q_v.row(b), neg, out.dlogits.row(b));
  }
  return out;
}

}  // namespace tsdrd
