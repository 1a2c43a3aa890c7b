#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tsdrd/matrix.hpp"
#include "tsdrd/rng.hpp"

namespace tsdrd {

enum class RegionStage { warm_up, fused };

// Supervision signal for one batch: teacher logits during warm-up, the
// element-wise sum of teacher and student logits afterwards.
struct RegionBatch {
  Matrix d;
  RegionStage stage = RegionStage::warm_up;
};

// epoch <= warm_up_epochs -> d = teacher_logits (bitwise).
// epoch  > warm_up_epochs -> d = teacher_logits + student_logits, raw
// addition. mean_center subtracts each row's mean from both inputs first;
// default off.
RegionBatch build_region(const Matrix& teacher_logits,
                         const Matrix& student_logits, int epoch,
                         int warm_up_epochs, bool mean_center = false);

// softmax(2*o_star + eps_v + eps_i): probability of the summed two-oracle
// signal under the additive noise decomposition.
std::vector<double> fused_probability(std::span<const double> o_star,
                                      std::span<const double> eps_v,
                                      std::span<const double> eps_i);

// softmax(|logits - onehot(true_label)|): the per-sample noise distribution
// used to measure noise independence between two models.
std::vector<double> noise_distribution(std::span<const double> logits,
                                       int true_label);

// Per-class Gaussian noise for the two oracles with correlation rho between
// eps_v and eps_i (independent across classes).
struct NoiseModel {
  double sigma_v = 0.0;
  double sigma_i = 0.0;
  double rho = 0.0;
};

struct FusionStudyRecord {
  double sigma_v = 0.0;
  double sigma_i = 0.0;
  double rho = 0.0;
  long trials = 0;
  std::uint64_t seed = 0;
  double acc_v = 0.0;
  double acc_i = 0.0;
  double acc_fused = 0.0;
  double mean_noise_jsd = 0.0;
};

using SignalGenerator = std::function<std::vector<double>(Rng&)>;

// True-signal generator used by default: a uniformly random true class gets
// logit `gap`, every other class 0.
SignalGenerator gap_signal_generator(int classes, double gap);

// Monte Carlo accuracy of oracle v, oracle i and their fused sum against the
// clean argmax, plus the mean JSD between the two oracles' noise
// distributions. Deterministic per seed.
FusionStudyRecord fusion_monte_carlo(const NoiseModel& noise,
                                     const SignalGenerator& signal, long trials,
                                     std::uint64_t seed);

std::string fusion_csv_header();
std::string fusion_csv_row(const FusionStudyRecord& rec);

}  // namespace tsdrd
