#pragma once

#include <cstdint>
#include <string>

#include "tsdrd/domains.hpp"
#include "tsdrd/matrix.hpp"

namespace tsdrd {

// Frozen-encoder prototype classifier standing in for a vision-language
// model: logit[b,c] = tau * cos(encoder(x_b), normalize(prototype_c +
// prompt_offset_c)). Only the prompt offsets (and their velocity) change
// during training.
struct TeacherModel {
  Matrix encoder;          // [emb x dim], orthonormal columns, frozen
  Matrix prototypes;       // [C x emb], unit rows, frozen
  Matrix prompt_offsets;   // [C x emb], learnable, zero-initialized
  Matrix prompt_velocity;  // [C x emb]
  double tau = 30.0;
  std::uint64_t seed = 0;

  int input_dim() const { return static_cast<int>(encoder.cols); }
  int embed_dim() const { return static_cast<int>(encoder.rows); }
  int classes() const { return static_cast<int>(prototypes.rows); }
};

// Forward intermediates needed for the prompt gradient.
struct TeacherCache {
  Matrix feat_unit;               // [B x emb], normalized encoded features
  Matrix proto_unit;              // [C x emb], normalized effective prototypes
  std::vector<double> proto_norm; // [C], norms of prototype + offset
};

Matrix teacher_forward(const TeacherModel& model, const Matrix& x,
                       TeacherCache* cache = nullptr);

// Encoder = QR-orthonormalized Gaussian map (requires emb >= dim);
// prototypes = normalized encoded per-class means of vil_ds; offsets zero.
TeacherModel pretrain_teacher(const LabeledDataset& vil_ds, int emb, double tau,
                              std::uint64_t seed);

// Exact dL/d(prompt offsets) from dL/d(teacher logits), including the
// prototype-normalization Jacobian.
Matrix prompt_gradient(const TeacherModel& model, const Matrix& dloss_dlogits,
                       const TeacherCache& cache);

// SGD-momentum update of the prompt offsets from dL/d(teacher logits).
// Encoder and base prototypes are untouched.
void tune_prompts(TeacherModel& model, const Matrix& dloss_dlogits,
                  const TeacherCache& cache, double lr, double momentum);

bool teachers_bitwise_equal(const TeacherModel& a, const TeacherModel& b);

void save_teacher_checkpoint(const TeacherModel& model, const std::string& path);
TeacherModel load_teacher_checkpoint(const std::string& path);

}  // namespace tsdrd
