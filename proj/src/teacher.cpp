#include "tsdrd/teacher.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tsdrd/rng.hpp"

namespace tsdrd {

namespace {

constexpr double kNormFloor = 1e-12;

double row_norm(const Matrix& m, std::size_t i) {
  double acc = 0.0;
  for (std::size_t k = 0; k < m.cols; ++k) acc += m(i, k) * m(i, k);
  return std::sqrt(acc);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  char buf[40];
  for (double x : m.data) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out << buf << '\n';
  }
}

Matrix read_matrix(std::istream& in, std::size_t rows, std::size_t cols,
                   const char* what) {
  Matrix m(rows, cols);
  for (double& x : m.data) {
    if (!(in >> x)) {
      throw std::runtime_error(std::string("teacher checkpoint truncated at ") +
                               what);
    }
  }
  return m;
}

}  // namespace

Matrix teacher_forward(const TeacherModel& model, const Matrix& x,
                       TeacherCache* cache) {
  if (static_cast<int>(x.cols) != model.input_dim()) {
    throw std::runtime_error("teacher_forward: feature dim " +
                             std::to_string(x.cols) + " != encoder input " +
                             std::to_string(model.input_dim()));
  }
  const std::size_t batch = x.rows;
  const auto emb = static_cast<std::size_t>(model.embed_dim());
  const auto classes = static_cast<std::size_t>(model.classes());

  Matrix feat(batch, emb);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t e = 0; e < emb; ++e) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) acc += model.encoder(e, k) * x(b, k);
      feat(b, e) = acc;
    }
    double norm = row_norm(feat, b);
    if (norm < kNormFloor) {
      throw std::runtime_error("teacher_forward: zero-norm encoded feature at row " +
                               std::to_string(b));
    }
    for (std::size_t e = 0; e < emb; ++e) feat(b, e) /= norm;
  }

  Matrix proto(classes, emb);
  std::vector<double> proto_norm(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t e = 0; e < emb; ++e) {
      proto(c, e) = model.prototypes(c, e) + model.prompt_offsets(c, e);
    }
    proto_norm[c] = row_norm(proto, c);
    if (proto_norm[c] < kNormFloor) {
      throw std::runtime_error("teacher_forward: zero-norm effective prototype for class " +
                               std::to_string(c));
    }
    for (std::size_t e = 0; e < emb; ++e) proto(c, e) /= proto_norm[c];
  }

  Matrix logits(batch, classes);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < classes; ++c) {
      double cosine = 0.0;
      for (std::size_t e = 0; e < emb; ++e) cosine += feat(b, e) * proto(c, e);
      logits(b, c) = model.tau * cosine;
    }
  }

  if (cache != nullptr) {
    cache->feat_unit = std::move(feat);
    cache->proto_unit = std::move(proto);
    cache->proto_norm = std::move(proto_norm);
  }
  return logits;
}

TeacherModel pretrain_teacher(const LabeledDataset& vil_ds, int emb, double tau,
                              std::uint64_t seed) {
  if (!(tau > 0.0)) throw std::runtime_error("pretrain_teacher: tau must be > 0");
  const int dim = static_cast<int>(vil_ds.features.cols);
  if (emb < dim) {
    throw std::runtime_error("pretrain_teacher: emb (" + std::to_string(emb) +
                             ") must be >= feature dim (" + std::to_string(dim) + ")");
  }

  TeacherModel model;
  model.tau = tau;
  model.seed = seed;

  // Gaussian map with Gram-Schmidt orthonormalized columns: norm-preserving,
  // so cosine geometry in the embedding matches the input space.
  Rng rng(seed);
  const auto e_rows = static_cast<std::size_t>(emb);
  const auto d_cols = static_cast<std::size_t>(dim);
  model.encoder = Matrix(e_rows, d_cols);
  for (double& v : model.encoder.data) v = rng.normal();
  for (std::size_t j = 0; j < d_cols; ++j) {
    for (std::size_t prev = 0; prev < j; ++prev) {
      double dot = 0.0;
      for (std::size_t e = 0; e < e_rows; ++e) {
        dot += model.encoder(e, j) * model.encoder(e, prev);
      }
      for (std::size_t e = 0; e < e_rows; ++e) {
        model.encoder(e, j) -= dot * model.encoder(e, prev);
      }
    }
    double norm2 = 0.0;
    for (std::size_t e = 0; e < e_rows; ++e) {
      norm2 += model.encoder(e, j) * model.encoder(e, j);
    }
    if (norm2 < kNormFloor) {
      throw std::runtime_error("pretrain_teacher: degenerate encoder column");
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t e = 0; e < e_rows; ++e) model.encoder(e, j) *= inv;
  }

  // Prototypes: normalized encoded per-class means of the reference set.
  const auto classes = static_cast<std::size_t>(vil_ds.classes);
  Matrix mean(classes, d_cols);
  std::vector<long> counts(classes, 0);
  for (std::size_t i = 0; i < vil_ds.size(); ++i) {
    const auto y = static_cast<std::size_t>(vil_ds.labels[i]);
    ++counts[y];
    for (std::size_t k = 0; k < d_cols; ++k) mean(y, k) += vil_ds.features(i, k);
  }
  for (std::size_t y = 0; y < classes; ++y) {
    if (counts[y] == 0) {
      throw std::runtime_error("pretrain_teacher: reference set missing class " +
                               std::to_string(y));
    }
    for (std::size_t k = 0; k < d_cols; ++k) {
      mean(y, k) /= static_cast<double>(counts[y]);
    }
  }
  model.prototypes = Matrix(classes, e_rows);
  for (std::size_t y = 0; y < classes; ++y) {
    for (std::size_t e = 0; e < e_rows; ++e) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d_cols; ++k) acc += model.encoder(e, k) * mean(y, k);
      model.prototypes(y, e) = acc;
    }
    double norm = row_norm(model.prototypes, y);
    if (norm < kNormFloor) {
      throw std::runtime_error("pretrain_teacher: zero-norm prototype for class " +
                               std::to_string(y));
    }
    for (std::size_t e = 0; e < e_rows; ++e) model.prototypes(y, e) /= norm;
  }

  model.prompt_offsets = Matrix(classes, e_rows);
  model.prompt_velocity = Matrix(classes, e_rows);
  return model;
}

Matrix prompt_gradient(const TeacherModel& model, const Matrix& dloss_dlogits,
                       const TeacherCache& cache) {
  const std::size_t batch = dloss_dlogits.rows;
  const auto classes = static_cast<std::size_t>(model.classes());
  const auto emb = static_cast<std::size_t>(model.embed_dim());
  if (dloss_dlogits.cols != classes || cache.feat_unit.rows != batch ||
      cache.proto_unit.rows != classes) {
    throw std::runtime_error("prompt_gradient: gradient/cache shape mismatch");
  }

  // logit[b,c] = tau * g_b . u_c with u_c = v_c/|v_c|, v_c = proto_c + offset_c.
  // dL/dv_c = (tau/|v_c|) * (I - u_c u_c^T) * sum_b dL/dlogit[b,c] g_b.
  Matrix grad(classes, emb);
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> acc(emb, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const double d = dloss_dlogits(b, c);
      if (d == 0.0) continue;
      for (std::size_t e = 0; e < emb; ++e) acc[e] += d * cache.feat_unit(b, e);
    }
    double proj = 0.0;
    for (std::size_t e = 0; e < emb; ++e) proj += acc[e] * cache.proto_unit(c, e);
    const double scale = model.tau / cache.proto_norm[c];
    for (std::size_t e = 0; e < emb; ++e) {
      grad(c, e) = scale * (acc[e] - proj * cache.proto_unit(c, e));
    }
  }
  return grad;
}

void tune_prompts(TeacherModel& model, const Matrix& dloss_dlogits,
                  const TeacherCache& cache, double lr, double momentum) {
  if (!(lr >= 0.0)) throw std::runtime_error("tune_prompts: lr must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::runtime_error("tune_prompts: momentum must be in [0, 1)");
  }
  Matrix grad = prompt_gradient(model, dloss_dlogits, cache);
  if (!all_finite(grad)) {
    throw std::runtime_error("tune_prompts: non-finite prompt gradient");
  }

  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    model.prompt_velocity.data[i] =
        momentum * model.prompt_velocity.data[i] + grad.data[i];
    model.prompt_offsets.data[i] -= lr * model.prompt_velocity.data[i];
  }
}

bool teachers_bitwise_equal(const TeacherModel& a, const TeacherModel& b) {
  return a.encoder.same_shape(b.encoder) && a.encoder.data == b.encoder.data &&
         a.prototypes.data == b.prototypes.data &&
         a.prompt_offsets.data == b.prompt_offsets.data &&
         a.prompt_velocity.data == b.prompt_velocity.data && a.tau == b.tau;
}

namespace {
constexpr const char* kTeacherMagic = "tsdrd-teacher";
constexpr int kTeacherVersion = 1;
}  // namespace

void save_teacher_checkpoint(const TeacherModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", model.tau);
  out << kTeacherMagic << ' ' << kTeacherVersion << '\n';
  out << "seed " << model.seed << '\n';
  out << "dims " << model.embed_dim() << ' ' << model.input_dim() << ' '
      << model.classes() << '\n';
  out << "tau " << buf << '\n';
  write_matrix(out, model.encoder);
  write_matrix(out, model.prototypes);
  write_matrix(out, model.prompt_offsets);
  write_matrix(out, model.prompt_velocity);
  if (!out) throw std::runtime_error("write failed: " + path);
}

TeacherModel load_teacher_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kTeacherMagic) {
    throw std::runtime_error("not a teacher checkpoint: " + path);
  }
  if (version != kTeacherVersion) {
    throw std::runtime_error("unsupported teacher checkpoint version " +
                             std::to_string(version) + " in " + path);
  }
  std::string key;
  TeacherModel model;
  int emb = 0, dim = 0, classes = 0;
  if (!(in >> key >> model.seed) || key != "seed") {
    throw std::runtime_error("malformed teacher checkpoint: " + path);
  }
  if (!(in >> key >> emb >> dim >> classes) || key != "dims" || emb < 1 ||
      dim < 1 || classes < 1) {
    throw std::runtime_error("malformed teacher checkpoint: " + path);
  }
  if (!(in >> key >> model.tau) || key != "tau" || !(model.tau > 0.0)) {
    throw std::runtime_error("malformed teacher checkpoint: " + path);
  }
  const auto e = static_cast<std::size_t>(emb);
  const auto d = static_cast<std::size_t>(dim);
  const auto c = static_cast<std::size_t>(classes);
  model.encoder = read_matrix(in, e, d, "encoder");
  model.prototypes = read_matrix(in, c, e, "prototypes");
  model.prompt_offsets = read_matrix(in, c, e, "prompt offsets");
  model.prompt_velocity = read_matrix(in, c, e, "prompt velocity");
  return model;
}

}  // namespace tsdrd
