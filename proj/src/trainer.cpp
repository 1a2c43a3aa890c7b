#include "tsdrd/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tsdrd/prob.hpp"
#include "tsdrd/region.hpp"
#include "tsdrd/rng.hpp"

namespace tsdrd {

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t count) {
  Matrix out(count, src.cols);
  for (std::size_t i = 0; i < count; ++i) {
    const double* row = src.data.data() + idx[begin + i] * src.cols;
    std::copy(row, row + src.cols, out.data.data() + i * src.cols);
  }
  return out;
}

double accuracy_of_logits(const Matrix& logits, const std::vector<int>& labels) {
  long hits = 0;
  for (std::size_t b = 0; b < logits.rows; ++b) {
    if (static_cast<int>(argmax_lowest(logits.row(b))) == labels[b]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.rows);
}

std::vector<long> prediction_counts(const Matrix& logits, int classes) {
  std::vector<long> counts(static_cast<std::size_t>(classes), 0);
  for (std::size_t b = 0; b < logits.rows; ++b) {
    ++counts[argmax_lowest(logits.row(b))];
  }
  return counts;
}

double mean_noise_jsd(const Matrix& student_logits, const Matrix& teacher_logits,
                      const std::vector<int>& labels) {
  double acc = 0.0;
  for (std::size_t b = 0; b < student_logits.rows; ++b) {
    auto nd_s = noise_distribution(student_logits.row(b), labels[b]);
    auto nd_t = noise_distribution(teacher_logits.row(b), labels[b]);
    acc += jsd(nd_s, nd_t);
  }
  return acc / static_cast<double>(student_logits.rows);
}

}  // namespace

void validate_config(const TrainConfig& cfg) {
  if (cfg.total_epochs < 0) throw std::runtime_error("config: total_epochs must be >= 0");
  if (cfg.warm_up_epochs < 0 || cfg.warm_up_epochs > cfg.total_epochs) {
    throw std::runtime_error("config: need 0 <= warm_up_epochs <= total_epochs");
  }
  if (cfg.batch_size < 1) throw std::runtime_error("config: batch_size must be >= 1");
  if (cfg.alpha < 0.0 || cfg.beta < 0.0 || cfg.gamma < 0.0) {
    throw std::runtime_error("config: loss weights must be >= 0");
  }
  if (!(cfg.lr_student > 0.0) || !(cfg.lr_teacher > 0.0)) {
    throw std::runtime_error("config: learning rates must be > 0");
  }
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw std::runtime_error("config: momentum must be in [0, 1)");
  }
  if (cfg.start_mode != "random" && cfg.start_mode != "source") {
    throw std::runtime_error("config: start_mode must be `random` or `source`");
  }
  if (cfg.start_mode == "source" && cfg.source_checkpoint.empty()) {
    throw std::runtime_error("config: start_mode=source requires source_checkpoint");
  }
  if (cfg.iterations_per_epoch < 0) {
    throw std::runtime_error("config: iterations_per_epoch must be >= 0");
  }
  for (int h : cfg.hidden) {
    if (h < 1) throw std::runtime_error("config: hidden sizes must be >= 1");
  }
  if (cfg.embed_dim < 1) throw std::runtime_error("config: embed_dim must be >= 1");
  if (!(cfg.tau > 0.0)) throw std::runtime_error("config: tau must be > 0");
}

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) out.push_back(std::stoi(cell));
  }
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "on") return true;
  if (s == "0" || s == "false" || s == "off") return false;
  throw std::runtime_error("config: bad boolean value `" + s + "`");
}

}  // namespace

void apply_override(TrainConfig& cfg, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::runtime_error("override must be key=value, got `" + assignment + "`");
  }
  std::string key = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);
  if (key == "total_epochs") cfg.total_epochs = std::stoi(value);
  else if (key == "warm_up_epochs") cfg.warm_up_epochs = std::stoi(value);
  else if (key == "iterations_per_epoch") cfg.iterations_per_epoch = std::stoi(value);
  else if (key == "batch_size") cfg.batch_size = std::stoi(value);
  else if (key == "alpha") cfg.alpha = std::stod(value);
  else if (key == "beta") cfg.beta = std::stod(value);
  else if (key == "gamma") cfg.gamma = std::stod(value);
  else if (key == "lr_student") cfg.lr_student = std::stod(value);
  else if (key == "lr_teacher") cfg.lr_teacher = std::stod(value);
  else if (key == "momentum") cfg.momentum = std::stod(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "start_mode") cfg.start_mode = value;
  else if (key == "source_checkpoint") cfg.source_checkpoint = value;
  else if (key == "hidden") cfg.hidden = parse_int_list(value);
  else if (key == "embed_dim") cfg.embed_dim = std::stoi(value);
  else if (key == "tau") cfg.tau = std::stod(value);
  else if (key == "prompt_tuning") cfg.flags.prompt_tuning = parse_bool(value);
  else if (key == "region_fusion") cfg.flags.region_fusion = parse_bool(value);
  else if (key == "use_l_mu") cfg.flags.use_l_mu = parse_bool(value);
  else if (key == "use_l_en") cfg.flags.use_l_en = parse_bool(value);
  else if (key == "use_l_pl") cfg.flags.use_l_pl = parse_bool(value);
  else if (key == "defer_prompts_past_warmup")
    cfg.flags.defer_prompts_past_warmup = parse_bool(value);
  else throw std::runtime_error("unknown config key `" + key + "`");
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  TrainConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string squeezed;
    for (char ch : line) {
      if (ch != ' ' && ch != '\t' && ch != '\r') squeezed += ch;
    }
    if (squeezed.empty()) continue;
    try {
      apply_override(cfg, squeezed);
    } catch (const std::exception& e) {
      throw std::runtime_error("config parse error at line " +
                               std::to_string(line_no) + " of " + path + ": " +
                               e.what());
    }
  }
  return cfg;
}

void save_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "total_epochs = " << cfg.total_epochs << '\n';
  out << "warm_up_epochs = " << cfg.warm_up_epochs << '\n';
  out << "iterations_per_epoch = " << cfg.iterations_per_epoch << '\n';
  out << "batch_size = " << cfg.batch_size << '\n';
  out << "alpha = " << fmt17(cfg.alpha) << '\n';
  out << "beta = " << fmt17(cfg.beta) << '\n';
  out << "gamma = " << fmt17(cfg.gamma) << '\n';
  out << "lr_student = " << fmt17(cfg.lr_student) << '\n';
  out << "lr_teacher = " << fmt17(cfg.lr_teacher) << '\n';
  out << "momentum = " << fmt17(cfg.momentum) << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "start_mode = " << cfg.start_mode << '\n';
  if (!cfg.source_checkpoint.empty()) {
    out << "source_checkpoint = " << cfg.source_checkpoint << '\n';
  }
  out << "hidden = ";
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) {
    out << (i ? "," : "") << cfg.hidden[i];
  }
  out << '\n';
  out << "embed_dim = " << cfg.embed_dim << '\n';
  out << "tau = " << fmt17(cfg.tau) << '\n';
  out << "prompt_tuning = " << (cfg.flags.prompt_tuning ? 1 : 0) << '\n';
  out << "region_fusion = " << (cfg.flags.region_fusion ? 1 : 0) << '\n';
  out << "use_l_mu = " << (cfg.flags.use_l_mu ? 1 : 0) << '\n';
  out << "use_l_en = " << (cfg.flags.use_l_en ? 1 : 0) << '\n';
  out << "use_l_pl = " << (cfg.flags.use_l_pl ? 1 : 0) << '\n';
  out << "defer_prompts_past_warmup = "
      << (cfg.flags.defer_prompts_past_warmup ? 1 : 0) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string metrics_csv_header(int classes) {
  std::string h =
      "epoch,student_acc,teacher_acc,region_acc,l_mu,l_en,l_pl,l_total,"
      "noise_jsd,prediction_jsd";
  for (int c = 0; c < classes; ++c) h += ",count_" + std::to_string(c);
  return h;
}

std::string metrics_csv_row(const MetricsRecord& rec) {
  std::string row = std::to_string(rec.epoch);
  for (double v : {rec.student_acc, rec.teacher_acc, rec.region_acc, rec.l_mu,
                   rec.l_en, rec.l_pl, rec.l_total, rec.noise_jsd,
                   rec.prediction_jsd}) {
    row += ',';
    row += fmt17(v);
  }
  for (long c : rec.per_class_counts) row += ',' + std::to_string(c);
  return row;
}

void save_metrics_csv(const std::vector<MetricsRecord>& records, int classes,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << metrics_csv_header(classes) << '\n';
  for (const auto& rec : records) out << metrics_csv_row(rec) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

MlpModel pretrain_source_model(const LabeledDataset& source_ds,
                               const std::vector<int>& arch, int epochs,
                               std::uint64_t seed, double lr, double momentum,
                               int batch_size) {
  MlpModel model = init_mlp(arch, derive_seed(seed, 0));
  if (epochs == 0) return model;
  if (static_cast<int>(source_ds.features.cols) != model.input_dim() ||
      source_ds.classes != model.output_dim()) {
    throw std::runtime_error("pretrain_source_model: arch does not match data");
  }
  Rng shuffle_rng(derive_seed(seed, 1));
  const std::size_t n = source_ds.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  const auto bs = static_cast<std::size_t>(batch_size);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t count = std::min(bs, n - start);
      Matrix x = gather_rows(source_ds.features, order, start, count);
      ForwardCache cache;
      Matrix logits = forward(model, x, cache);
      Matrix q = softmax_rows(logits);
      // d(mean CE)/dlogits = (q - onehot)/B
      Matrix dlogits = q;
      const double inv_b = 1.0 / static_cast<double>(count);
      double loss = 0.0;
      for (std::size_t b = 0; b < count; ++b) {
        const auto y = static_cast<std::size_t>(source_ds.labels[order[start + b]]);
        loss -= std::log(std::max(q(b, y), kProbEps));
        dlogits(b, y) -= 1.0;
      }
      loss *= inv_b;
      if (!std::isfinite(loss)) {
        throw std::runtime_error("pretrain_source_model: loss diverged at epoch " +
                                 std::to_string(epoch));
      }
      for (double& v : dlogits.data) v *= inv_b;
      sgd_momentum_step(model, backward(model, cache, dlogits), lr, momentum);
    }
  }
  return model;
}

RunResult run_tsdrd(const TrainConfig& cfg, const Matrix& target_features,
                    const TeacherModel& teacher0, const LabeledDataset& eval_set,
                    const EpochHook& hook, const MlpModel* start_override) {
  validate_config(cfg);
  const std::size_t n = target_features.rows;
  if (n == 0) throw std::runtime_error("run_tsdrd: empty target set");
  if (eval_set.classes != teacher0.classes()) {
    throw std::runtime_error("run_tsdrd: eval classes != teacher classes");
  }

  RunResult result;
  result.teacher = teacher0;

  std::vector<int> arch;
  arch.push_back(static_cast<int>(target_features.cols));
  for (int h : cfg.hidden) arch.push_back(h);
  arch.push_back(teacher0.classes());

  if (start_override != nullptr) {
    result.student = *start_override;
  } else if (cfg.start_mode == "source") {
    result.student = load_mlp_checkpoint(cfg.source_checkpoint);
  } else {
    result.student = init_mlp(arch, derive_seed(cfg.seed, 100));
  }
  if (result.student.input_dim() != arch.front() ||
      result.student.output_dim() != arch.back()) {
    throw std::runtime_error(
        "run_tsdrd: starting model dims (" +
        std::to_string(result.student.input_dim()) + "->" +
        std::to_string(result.student.output_dim()) +
        ") do not match data/teacher (" + std::to_string(arch.front()) + "->" +
        std::to_string(arch.back()) + ")");
  }

  // The shuffle stream depends only on cfg.seed, so paired runs that differ
  // in start_mode see the identical batch schedule.
  Rng shuffle_rng(derive_seed(cfg.seed, 200));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const int iters = cfg.iterations_per_epoch > 0
                        ? cfg.iterations_per_epoch
                        : static_cast<int>((n + bs - 1) / bs);

  auto eval_epoch = [&](int epoch, double mu, double en, double pl,
                        double total) {
    Matrix s_logits = forward(result.student, eval_set.features);
    Matrix t_logits = teacher_forward(result.teacher, eval_set.features);
    RegionBatch region = build_region(t_logits, s_logits, std::max(epoch, 1),
                                      cfg.flags.region_fusion ? cfg.warm_up_epochs
                                                              : cfg.total_epochs);
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.student_acc = accuracy_of_logits(s_logits, eval_set.labels);
    rec.teacher_acc = accuracy_of_logits(t_logits, eval_set.labels);
    rec.region_acc = accuracy_of_logits(region.d, eval_set.labels);
    rec.l_mu = mu;
    rec.l_en = en;
    rec.l_pl = pl;
    rec.l_total = total;
    rec.noise_jsd = mean_noise_jsd(s_logits, t_logits, eval_set.labels);
    rec.per_class_counts = prediction_counts(s_logits, eval_set.classes);
    result.metrics.push_back(std::move(rec));
  };

  if (hook) hook(0, result.student, result.teacher);

  for (int epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double sum_mu = 0.0, sum_en = 0.0, sum_pl = 0.0, sum_total = 0.0;
    std::size_t cursor = 0;
    for (int it = 0; it < iters; ++it) {
      if (cursor >= n) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      const std::size_t count = std::min(bs, n - cursor);
      Matrix x = gather_rows(target_features, order, cursor, count);
      cursor += count;

      try {
        // Synchronous reads: both updates consume outputs computed before
        // either model changes.
        ForwardCache student_cache;
        Matrix student_logits = forward(result.student, x, student_cache);
        TeacherCache teacher_cache;
        Matrix teacher_logits = teacher_forward(result.teacher, x, &teacher_cache);

        RegionBatch region = build_region(
            teacher_logits, student_logits, epoch,
            cfg.flags.region_fusion ? cfg.warm_up_epochs : cfg.total_epochs);

        const bool tune = cfg.flags.prompt_tuning &&
                          !(cfg.flags.defer_prompts_past_warmup &&
                            epoch <= cfg.warm_up_epochs);
        if (tune) {
          Matrix q_v = softmax_rows(teacher_logits);
          Matrix q_i = softmax_rows(student_logits);
          TeacherLossResult tl = teacher_loss(q_v, q_i);
          tune_prompts(result.teacher, tl.dlogits, teacher_cache, cfg.lr_teacher,
                       cfg.momentum);
        }

        const double alpha = cfg.flags.use_l_mu ? cfg.alpha : 0.0;
        const double beta = cfg.flags.use_l_pl ? cfg.beta : 0.0;
        const double gamma = cfg.flags.use_l_en ? cfg.gamma : 0.0;
        StudentLossResult sl =
            student_loss(region.d, student_logits, alpha, beta, gamma);
        sum_mu += sl.parts.l_mu;
        sum_en += sl.parts.l_en;
        sum_pl += sl.parts.l_pl;
        sum_total += sl.parts.total;
        sgd_momentum_step(result.student,
                          backward(result.student, student_cache, sl.dlogits),
                          cfg.lr_student, cfg.momentum);
      } catch (const std::exception& e) {
        throw std::runtime_error("run_tsdrd aborted at epoch " +
                                 std::to_string(epoch) + ", iteration " +
                                 std::to_string(it + 1) + ": " + e.what());
      }
    }

    const double inv = 1.0 / static_cast<double>(iters);
    eval_epoch(epoch, sum_mu * inv, sum_en * inv, sum_pl * inv, sum_total * inv);
    if (hook) hook(epoch, result.student, result.teacher);
  }

  return result;
}

}  // namespace tsdrd
