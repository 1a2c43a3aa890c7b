#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsdrd/matrix.hpp"

namespace tsdrd {

// Feedforward student network: ReLU hidden layers, identity output layer,
// SGD-with-momentum velocity buffers stored alongside the parameters.
struct MlpModel {
  struct Layer {
    Matrix weights;               // [fan_out x fan_in]
    std::vector<double> bias;     // [fan_out]
    Matrix velocity_w;            // same shape as weights
    std::vector<double> velocity_b;
  };

  std::vector<Layer> layers;
  std::uint64_t seed = 0;  // seed the parameters were drawn from

  int input_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols);
  }
  int output_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows);
  }
  std::vector<int> layer_sizes() const;
};

// Per-batch activations kept for the exact backward pass.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post-activation per layer (ReLU / identity)
};

struct ParamGradients {
  struct Layer {
    Matrix dw;
    std::vector<double> db;
  };
  std::vector<Layer> layers;
};

// Kaiming-normal hidden layers (std sqrt(2/fan_in)), Xavier-uniform output
// layer (+-sqrt(6/(fan_in+fan_out))), zero biases. Deterministic per seed.
MlpModel init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);

// Returns logits [B x C] and fills the cache for backward().
Matrix forward(const MlpModel& model, const Matrix& x, ForwardCache& cache);
Matrix forward(const MlpModel& model, const Matrix& x);

// Exact gradients of an arbitrary scalar loss given dL/dlogits.
ParamGradients backward(const MlpModel& model, const ForwardCache& cache,
                        const Matrix& dloss_dlogits);

// v <- momentum*v + g;  theta <- theta - lr*v
void sgd_momentum_step(MlpModel& model, const ParamGradients& grads, double lr,
                       double momentum);

bool models_bitwise_equal(const MlpModel& a, const MlpModel& b);

// Checkpoint container: versioned text file, layer sizes, row-major parameter
// and velocity arrays at 17 significant digits, seed lineage. Round-trips
// losslessly (see tests).
void save_mlp_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_mlp_checkpoint(const std::string& path);

}  // namespace tsdrd
