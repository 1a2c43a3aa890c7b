#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsdrd/domains.hpp"
#include "tsdrd/losses.hpp"
#include "tsdrd/mlp.hpp"
#include "tsdrd/teacher.hpp"

namespace tsdrd {

struct TrainFlags {
  bool prompt_tuning = true;
  bool region_fusion = true;
  bool use_l_mu = true;
  bool use_l_en = true;
  bool use_l_pl = true;
  bool defer_prompts_past_warmup = false;
};

struct TrainConfig {
  int total_epochs = 30;
  int warm_up_epochs = 4;
  int iterations_per_epoch = 0;  // 0 = ceil(n / batch_size), one pass
  int batch_size = 64;
  double alpha = 1.3;
  double beta = 0.4;
  double gamma = 1.0;
  double lr_student = 1e-3;
  double lr_teacher = 1e-4;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  std::string start_mode = "random";  // "random" or "source"
  std::string source_checkpoint;
  std::vector<int> hidden{64, 64};
  int embed_dim = 32;
  double tau = 30.0;
  TrainFlags flags;
};

void validate_config(const TrainConfig& cfg);
TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& cfg, const std::string& path);

// Applies a `key=value` override; throws if the key names no config field.
void apply_override(TrainConfig& cfg, const std::string& assignment);

struct MetricsRecord {
  int epoch = 0;
  double student_acc = 0.0;
  double teacher_acc = 0.0;
  double region_acc = 0.0;
  double l_mu = 0.0;      // per-epoch means of the loss terms
  double l_en = 0.0;
  double l_pl = 0.0;
  double l_total = 0.0;
  double noise_jsd = 0.0;       // student-vs-teacher noise JSD on the eval set
  double prediction_jsd = -1.0; // vs a paired run; -1 when not applicable
  std::vector<long> per_class_counts;  // student predictions on the eval set
};

std::string metrics_csv_header(int classes);
std::string metrics_csv_row(const MetricsRecord& rec);
void save_metrics_csv(const std::vector<MetricsRecord>& records, int classes,
                      const std::string& path);

// Plain cross-entropy pretraining of a student on labeled data.
MlpModel pretrain_source_model(const LabeledDataset& source_ds,
                               const std::vector<int>& arch, int epochs,
                               std::uint64_t seed, double lr = 1e-3,
                               double momentum = 0.9, int batch_size = 64);

struct RunResult {
  MlpModel student;
  TeacherModel teacher;
  std::vector<MetricsRecord> metrics;
};

// Observer called after evaluating each epoch (and once for epoch 0, the
// untrained state). Used by the experiment runners to pair runs.
using EpochHook =
    std::function<void(int epoch, const MlpModel& student, const TeacherModel& teacher)>;

// The two-stage adaptation loop. Training touches only target_features; the
// eval set is used for per-epoch metrics exclusively. start_override, when
// given, supplies the initial student in memory (the experiment runners use
// it for source-start runs without a checkpoint file).
RunResult run_tsdrd(const TrainConfig& cfg, const Matrix& target_features,
                    const TeacherModel& teacher, const LabeledDataset& eval_set,
                    const EpochHook& hook = {},
                    const MlpModel* start_override = nullptr);

}  // namespace tsdrd
