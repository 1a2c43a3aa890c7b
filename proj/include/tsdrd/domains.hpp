#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsdrd/matrix.hpp"

namespace tsdrd {

// Affine domain shift: block-planar rotation by `rotation_deg` applied to
// consecutive coordinate pairs (0,1), (2,3), ..., then uniform scaling, then
// a translation of norm `translation` along the normalized all-ones
// direction.
struct DomainTransform {
  double rotation_deg = 0.0;
  double translation = 0.0;
  double scale = 1.0;
};

struct DomainSpec {
  int classes = 0;
  int dim = 0;
  Matrix base_means;  // [classes x dim]
  double base_cov_scale = 1.0;
  DomainTransform transform;
  double label_noise_rate = 0.0;
  int samples_per_class = 0;
  std::string tag;
};

// Labels are carried for evaluation and pretraining only; adaptation code
// receives the feature matrix alone.
struct LabeledDataset {
  Matrix features;  // [n x dim]
  std::vector<int> labels;
  std::string domain_tag;
  int classes = 0;

  std::size_t size() const { return features.rows; }
};

// Scenario file contents (flat key-value text; see save_scenario for keys).
struct ScenarioConfig {
  int classes = 10;
  int dim = 16;
  std::uint64_t means_seed = 12345;
  double mean_radius = 3.0;
  double base_cov_scale = 0.9;
  int samples_per_class = 100;
  DomainTransform target_transform{0.0, 0.0, 1.0};
  DomainTransform vil_transform{10.0, 0.0, 1.0};
  DomainTransform source_transform{45.0, 2.0, 1.0};
  double vil_label_noise = 0.0;
  double source_label_noise = 0.0;
  double teacher_floor = 0.7;
};

ScenarioConfig default_scenario();
ScenarioConfig load_scenario(const std::string& path);
void save_scenario(const ScenarioConfig& cfg, const std::string& path);

// Concrete three-domain benchmark with declared (exact, transform-level)
// centroid distances. Construction fails if the vil domain is not strictly
// closer to the target than the source domain.
struct BenchmarkScenario {
  DomainSpec target;
  DomainSpec source;
  DomainSpec vil;
  double declared_d_source_target = 0.0;
  double declared_d_vil_target = 0.0;
  double teacher_floor = 0.7;
};

BenchmarkScenario build_scenario(const ScenarioConfig& cfg);

Matrix apply_transform(const DomainTransform& t, const Matrix& points);

LabeledDataset generate_domain(const DomainSpec& spec, std::uint64_t seed);

// Mean over classes of the Euclidean distance between per-class centroids.
double domain_distance(const LabeledDataset& a, const LabeledDataset& b);

struct Benchmark {
  LabeledDataset source;
  LabeledDataset target;
  LabeledDataset vil;
  double d_source_target = 0.0;  // measured on the sampled datasets
  double d_vil_target = 0.0;
};

Benchmark make_benchmark(const BenchmarkScenario& scenario, std::uint64_t seed);

// CSV round-trip, lossless at 17 significant digits. First line is the
// header comment `# dim,<d>,classes,<C>,domain,<tag>`, then rows
// `f1,...,fd,label`.
void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

}  // namespace tsdrd
