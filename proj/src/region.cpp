#include "tsdrd/region.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "tsdrd/prob.hpp"

namespace tsdrd {

RegionBatch build_region(const Matrix& teacher_logits,
                         const Matrix& student_logits, int epoch,
                         int warm_up_epochs, bool mean_center) {
  if (!teacher_logits.same_shape(student_logits)) {
    throw std::runtime_error("build_region: logit shape mismatch");
  }
  if (epoch < 1) throw std::runtime_error("build_region: epoch must be >= 1");
  if (warm_up_epochs < 0) {
    throw std::runtime_error("build_region: warm-up epochs must be >= 0");
  }

  RegionBatch out;
  if (epoch <= warm_up_epochs) {
    out.d = teacher_logits;
    out.stage = RegionStage::warm_up;
    return out;
  }

  out.stage = RegionStage::fused;
  out.d = Matrix(teacher_logits.rows, teacher_logits.cols);
  const std::size_t c = teacher_logits.cols;
  for (std::size_t b = 0; b < teacher_logits.rows; ++b) {
    double shift_t = 0.0, shift_s = 0.0;
    if (mean_center) {
      for (std::size_t k = 0; k < c; ++k) {
        shift_t += teacher_logits(b, k);
        shift_s += student_logits(b, k);
      }
      shift_t /= static_cast<double>(c);
      shift_s /= static_cast<double>(c);
    }
    for (std::size_t k = 0; k < c; ++k) {
      out.d(b, k) =
          (teacher_logits(b, k) - shift_t) + (student_logits(b, k) - shift_s);
    }
  }
  return out;
}

std::vector<double> fused_probability(std::span<const double> o_star,
                                      std::span<const double> eps_v,
                                      std::span<const double> eps_i) {
  if (o_star.size() != eps_v.size() || o_star.size() != eps_i.size()) {
    throw std::runtime_error("fused_probability: length mismatch");
  }
  std::vector<double> summed(o_star.size());
  for (std::size_t k = 0; k < o_star.size(); ++k) {
    // noise summed first so swapping the two oracles is bit-exact
    summed[k] = 2.0 * o_star[k] + (eps_v[k] + eps_i[k]);
  }
  return softmax(summed);
}

std::vector<double> noise_distribution(std::span<const double> logits,
                                       int true_label) {
  const int c = static_cast<int>(logits.size());
  if (true_label < 0 || true_label >= c) {
    throw std::runtime_error("noise_distribution: label " +
                             std::to_string(true_label) + " out of range [0, " +
                             std::to_string(c) + ")");
  }
  std::vector<double> diff(logits.size());
  for (int k = 0; k < c; ++k) {
    diff[static_cast<std::size_t>(k)] =
        std::abs(logits[static_cast<std::size_t>(k)] - (k == true_label ? 1.0 : 0.0));
  }
  return softmax(diff);
}

SignalGenerator gap_signal_generator(int classes, double gap) {
  if (classes < 2) {
    throw std::runtime_error("gap_signal_generator: need at least 2 classes");
  }
  return [classes, gap](Rng& rng) {
    std::vector<double> o(static_cast<std::size_t>(classes), 0.0);
    o[rng.uniform_index(static_cast<std::size_t>(classes))] = gap;
    return o;
  };
}

FusionStudyRecord fusion_monte_carlo(const NoiseModel& noise,
                                     const SignalGenerator& signal, long trials,
                                     std::uint64_t seed) {
  if (trials < 1) throw std::runtime_error("fusion_monte_carlo: trials must be >= 1");
  if (noise.sigma_v < 0.0 || noise.sigma_i < 0.0) {
    throw std::runtime_error("fusion_monte_carlo: sigmas must be >= 0");
  }
  if (noise.rho < -1.0 || noise.rho > 1.0) {
    throw std::runtime_error("fusion_monte_carlo: |rho| must be <= 1");
  }

  Rng rng(seed);
  const double mix = std::sqrt(std::max(0.0, 1.0 - noise.rho * noise.rho));

  long hit_v = 0, hit_i = 0, hit_fused = 0;
  double jsd_acc = 0.0;
  std::vector<double> noisy_v, noisy_i, fused;
  for (long t = 0; t < trials; ++t) {
    std::vector<double> o = signal(rng);
    const std::size_t c = o.size();
    const std::size_t truth = argmax_lowest(o);
    noisy_v.assign(c, 0.0);
    noisy_i.assign(c, 0.0);
    fused.assign(c, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      double z1 = rng.normal();
      double z2 = rng.normal();
      double ev = noise.sigma_v * z1;
      double ei = noise.sigma_i * (noise.rho * z1 + mix * z2);
      noisy_v[k] = o[k] + ev;
      noisy_i[k] = o[k] + ei;
      fused[k] = 2.0 * o[k] + (ev + ei);
    }
    if (argmax_lowest(noisy_v) == truth) ++hit_v;
    if (argmax_lowest(noisy_i) == truth) ++hit_i;
    if (argmax_lowest(fused) == truth) ++hit_fused;

    auto nd_v = noise_distribution(noisy_v, static_cast<int>(truth));
    auto nd_i = noise_distribution(noisy_i, static_cast<int>(truth));
    jsd_acc += jsd(nd_v, nd_i);
  }

  FusionStudyRecord rec;
  rec.sigma_v = noise.sigma_v;
  rec.sigma_i = noise.sigma_i;
  rec.rho = noise.rho;
  rec.trials = trials;
  rec.seed = seed;
  rec.acc_v = static_cast<double>(hit_v) / static_cast<double>(trials);
  rec.acc_i = static_cast<double>(hit_i) / static_cast<double>(trials);
  rec.acc_fused = static_cast<double>(hit_fused) / static_cast<double>(trials);
  rec.mean_noise_jsd = jsd_acc / static_cast<double>(trials);
  return rec;
}

std::string fusion_csv_header() {
  return "sigma_v,sigma_i,rho,trials,seed,acc_v,acc_i,acc_fused,mean_noise_jsd";
}

std::string fusion_csv_row(const FusionStudyRecord& rec) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%ld,%llu,%.17g,%.17g,%.17g,%.17g",
                rec.sigma_v, rec.sigma_i, rec.rho, rec.trials,
                static_cast<unsigned long long>(rec.seed), rec.acc_v, rec.acc_i,
                rec.acc_fused, rec.mean_noise_jsd);
  return std::string(buf);
}

}  // namespace tsdrd
