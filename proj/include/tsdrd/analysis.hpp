#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsdrd/domains.hpp"
#include "tsdrd/trainer.hpp"

namespace tsdrd {

using ForwardFn = std::function<Matrix(const Matrix&)>;

struct EvalResult {
  double accuracy = 0.0;
  std::vector<long> per_class_counts;
};

EvalResult evaluate(const ForwardFn& forward_fn, const LabeledDataset& eval_set);

// Mean over samples of the base-2 JSD between the two models' predictive
// distributions.
double prediction_jsd(const ForwardFn& model_a, const ForwardFn& model_b,
                      const LabeledDataset& eval_set);

// Runs fn(0..count-1), optionally across `jobs` threads. Each index owns its
// output slot, so results are independent of scheduling.
void parallel_for_indexed(int jobs, std::size_t count,
                          const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Experiment runners
// ---------------------------------------------------------------------------

// Paired adaptation from a random start and from a source-pretrained start on
// the identical batch schedule. Index 0 of each per-epoch series is the
// untrained state (the pre-training baseline).
struct DualRunReport {
  std::uint64_t seed = 0;
  std::vector<double> acc_random_start;
  std::vector<double> acc_source_start;
  std::vector<double> prediction_jsd_per_epoch;
  std::vector<long> final_counts_random;
  std::vector<long> final_counts_source;
  double baseline_jsd = 0.0;
  double final_jsd = 0.0;
  double final_gap = 0.0;   // |final random acc - final source acc|
  double counts_l1 = 0.0;   // L1 distance between final count vectors
};

struct Hypothesis1Report {
  std::vector<DualRunReport> per_seed;
  double mean_final_gap = 0.0;
  double mean_final_jsd = 0.0;
  double mean_baseline_jsd = 0.0;
  double mean_counts_l1 = 0.0;
};

Hypothesis1Report hypothesis1_experiment(const BenchmarkScenario& scenario,
                                         const TrainConfig& cfg,
                                         const std::vector<std::uint64_t>& seeds,
                                         int jobs = 1,
                                         int source_pretrain_epochs = 30);

// Per-epoch accuracy of teacher, student and region plus the student-teacher
// noise JSD, with the gain/JSD correlation over post-warm-up epochs.
struct RegionStudyReport {
  std::vector<MetricsRecord> epochs;
  double gain_jsd_correlation = 0.0;
  double min_post_warmup_margin = 0.0;  // min(region - max(teacher, student))
};

RegionStudyReport denoised_region_experiment(const BenchmarkScenario& scenario,
                                             const TrainConfig& cfg);

struct AblationRow {
  std::string label;
  double final_accuracy = 0.0;
  double delta_vs_full = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

// One run per toggle per seed; accuracies averaged over seeds. Toggle labels
// mirror the component ablation: wo_l_pl, wo_l_mu, wo_l_en, wo_region,
// wo_prompt_tuning, wo_warm_up, source_start, full.
AblationReport ablation_runner(const BenchmarkScenario& scenario,
                               const TrainConfig& base,
                               const std::vector<std::uint64_t>& seeds,
                               int jobs = 1, int source_pretrain_epochs = 30);

struct SweepGrid {
  std::vector<double> alphas{0.5, 1.3, 3.0};
  std::vector<double> gammas{0.1, 1.0, 2.0};
  std::vector<double> betas{0.1, 0.2, 0.4, 1.0};
  std::vector<int> warmups{1, 4, 8, 20};
};

struct SweepPoint {
  double alpha = 0.0;
  double gamma = 0.0;
  double beta = 0.0;
  int warm_up = 0;
  double mean_accuracy = 0.0;
};

// Two blocks: (alpha x gamma) at the base beta/N, then (beta x N) at the
// base alpha/gamma. Each point is the mean final accuracy over the seeds.
std::vector<SweepPoint> sweep_runner(const BenchmarkScenario& scenario,
                                     const TrainConfig& base,
                                     const SweepGrid& grid,
                                     const std::vector<std::uint64_t>& seeds,
                                     int jobs = 1);

// ---------------------------------------------------------------------------
// Report emission: report/<experiment>/<seed>/metrics.csv plus summary.csv
// and SVG charts under report/<experiment>/. Byte-stable per input.
// ---------------------------------------------------------------------------

void emit_run_report(const std::vector<MetricsRecord>& records, int classes,
                     const std::string& out_dir);
void emit_hypothesis1_report(const Hypothesis1Report& report,
                             const std::string& out_dir);
void emit_region_study_report(const RegionStudyReport& report, int classes,
                              const std::string& out_dir);
void emit_ablation_report(const AblationReport& report, const std::string& out_dir);
void emit_sweep_report(const std::vector<SweepPoint>& points,
                       const std::string& out_dir);

// Pearson correlation; throws if either side has fewer than 2 points or zero
// variance.
double pearson_correlation(const std::vector<double>& xs,
                           const std::vector<double>& ys);

// Teacher pretrained from the scenario's vil domain for a given run seed,
// with the zero-shot floor check against the target set (warning to stderr).
TeacherModel make_run_teacher(const BenchmarkScenario& scenario,
                              const Benchmark& bench, const TrainConfig& cfg,
                              std::uint64_t seed);

}  // namespace tsdrd
