#include "tsdrd/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tsdrd/rng.hpp"

namespace tsdrd {

namespace {

void check_shapes_chain(const std::vector<int>& sizes) {
  if (sizes.size() < 2) {
    throw std::runtime_error("init_mlp: need at least input and output sizes");
  }
  for (int s : sizes) {
    if (s < 1) throw std::runtime_error("init_mlp: layer sizes must be >= 1");
  }
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  char buf[40];
  for (double x : v) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out << buf << '\n';
  }
}

std::vector<double> read_doubles(std::istream& in, std::size_t n,
                                 const char* what) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> v[i])) {
      throw std::runtime_error(std::string("checkpoint truncated while reading ") +
                               what);
    }
  }
  return v;
}

}  // namespace

std::vector<int> MlpModel::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(static_cast<int>(layers.front().weights.cols));
  for (const auto& l : layers) {
    sizes.push_back(static_cast<int>(l.weights.rows));
  }
  return sizes;
}

MlpModel init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  check_shapes_chain(layer_sizes);
  MlpModel model;
  model.seed = seed;
  Rng rng(seed);
  const std::size_t last = layer_sizes.size() - 2;
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const auto fan_in = static_cast<std::size_t>(layer_sizes[k]);
    const auto fan_out = static_cast<std::size_t>(layer_sizes[k + 1]);
    MlpModel::Layer layer;
    layer.weights = Matrix(fan_out, fan_in);
    layer.bias.assign(fan_out, 0.0);
    layer.velocity_w = Matrix(fan_out, fan_in);
    layer.velocity_b.assign(fan_out, 0.0);
    if (k == last) {
      double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& w : layer.weights.data) w = rng.uniform(-bound, bound);
    } else {
      double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (double& w : layer.weights.data) w = rng.normal(0.0, stddev);
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

Matrix forward(const MlpModel& model, const Matrix& x, ForwardCache& cache) {
  if (model.layers.empty()) throw std::runtime_error("forward: empty model");
  if (static_cast<int>(x.cols) != model.input_dim()) {
    throw std::runtime_error("forward: feature dim " + std::to_string(x.cols) +
                             " != model input dim " +
                             std::to_string(model.input_dim()));
  }
  cache.input = x;
  cache.pre.clear();
  cache.post.clear();
  const Matrix* cur = &x;
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const auto& layer = model.layers[k];
    Matrix z = affine_forward(*cur, layer.weights, layer.bias);
    cache.pre.push_back(z);
    if (k + 1 < model.layers.size()) {
      Matrix a = z;
      for (double& v : a.data) v = v > 0.0 ? v : 0.0;
      cache.post.push_back(std::move(a));
    } else {
      cache.post.push_back(std::move(z));  // identity output
    }
    cur = &cache.post.back();
  }
  return cache.post.back();
}

Matrix forward(const MlpModel& model, const Matrix& x) {
  ForwardCache cache;
  return forward(model, x, cache);
}

ParamGradients backward(const MlpModel& model, const ForwardCache& cache,
                        const Matrix& dloss_dlogits) {
  const std::size_t n_layers = model.layers.size();
  if (cache.pre.size() != n_layers || cache.post.size() != n_layers) {
    throw std::runtime_error("backward: cache depth does not match model");
  }
  if (dloss_dlogits.rows != cache.input.rows ||
      static_cast<int>(dloss_dlogits.cols) != model.output_dim()) {
    throw std::runtime_error("backward: dL/dlogits shape mismatch");
  }
  const std::size_t batch = cache.input.rows;

  ParamGradients grads;
  grads.layers.resize(n_layers);

  // delta holds dL/d(pre-activation of layer k)
  Matrix delta = dloss_dlogits;
  for (std::size_t ki = n_layers; ki-- > 0;) {
    const auto& layer = model.layers[ki];
    const Matrix& input_act = ki == 0 ? cache.input : cache.post[ki - 1];
    if (input_act.rows != batch || input_act.cols != layer.weights.cols) {
      throw std::runtime_error("backward: stale cache for layer " +
                               std::to_string(ki));
    }

    auto& g = grads.layers[ki];
    g.dw = Matrix(layer.weights.rows, layer.weights.cols);
    g.db.assign(layer.bias.size(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* db_row = delta.data.data() + b * delta.cols;
      const double* in_row = input_act.data.data() + b * input_act.cols;
      for (std::size_t o = 0; o < layer.weights.rows; ++o) {
        const double d = db_row[o];
        if (d == 0.0) continue;
        g.db[o] += d;
        double* w_row = g.dw.data.data() + o * g.dw.cols;
        for (std::size_t i = 0; i < layer.weights.cols; ++i) {
          w_row[i] += d * in_row[i];
        }
      }
    }

    if (ki == 0) break;

    // Propagate: dL/d(post of layer ki-1) = delta * W, then gate by ReLU.
    Matrix next(batch, layer.weights.cols);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* db_row = delta.data.data() + b * delta.cols;
      double* n_row = next.data.data() + b * next.cols;
      for (std::size_t i = 0; i < layer.weights.cols; ++i) n_row[i] = 0.0;
      for (std::size_t o = 0; o < layer.weights.rows; ++o) {
        const double d = db_row[o];
        if (d == 0.0) continue;
        const double* w_row = layer.weights.data.data() + o * layer.weights.cols;
        for (std::size_t i = 0; i < layer.weights.cols; ++i) {
          n_row[i] += d * w_row[i];
        }
      }
    }
    const Matrix& pre_prev = cache.pre[ki - 1];
    for (std::size_t idx = 0; idx < next.data.size(); ++idx) {
      if (pre_prev.data[idx] <= 0.0) next.data[idx] = 0.0;
    }
    delta = std::move(next);
  }
  return grads;
}

void sgd_momentum_step(MlpModel& model, const ParamGradients& grads, double lr,
                       double momentum) {
  // lr == 0 is a valid no-op on the parameters (velocity still accumulates).
  if (!(lr >= 0.0)) throw std::runtime_error("sgd_momentum_step: lr must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::runtime_error("sgd_momentum_step: momentum must be in [0, 1)");
  }
  if (grads.layers.size() != model.layers.size()) {
    throw std::runtime_error("sgd_momentum_step: gradient layer count mismatch");
  }
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const auto& g = grads.layers[k];
    if (!all_finite(g.dw) || !all_finite(g.db)) {
      throw std::runtime_error("sgd_momentum_step: non-finite gradient in layer " +
                               std::to_string(k));
    }
    auto& layer = model.layers[k];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i) {
      layer.velocity_w.data[i] = momentum * layer.velocity_w.data[i] + g.dw.data[i];
      layer.weights.data[i] -= lr * layer.velocity_w.data[i];
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      layer.velocity_b[i] = momentum * layer.velocity_b[i] + g.db[i];
      layer.bias[i] -= lr * layer.velocity_b[i];
    }
  }
}

bool models_bitwise_equal(const MlpModel& a, const MlpModel& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    const auto& la = a.layers[k];
    const auto& lb = b.layers[k];
    if (!la.weights.same_shape(lb.weights)) return false;
    if (la.weights.data != lb.weights.data) return false;
    if (la.bias != lb.bias) return false;
    if (la.velocity_w.data != lb.velocity_w.data) return false;
    if (la.velocity_b != lb.velocity_b) return false;
  }
  return true;
}

namespace {
constexpr const char* kMlpMagic = "tsdrd-mlp";
constexpr int kMlpVersion = 1;
}  // namespace

void save_mlp_checkpoint(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << kMlpMagic << ' ' << kMlpVersion << '\n';
  out << "seed " << model.seed << '\n';
  auto sizes = model.layer_sizes();
  out << "sizes";
  for (int s : sizes) out << ' ' << s;
  out << '\n';
  for (const auto& layer : model.layers) {
    write_doubles(out, layer.weights.data);
    write_doubles(out, layer.bias);
    write_doubles(out, layer.velocity_w.data);
    write_doubles(out, layer.velocity_b);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

MlpModel load_mlp_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMlpMagic) {
    throw std::runtime_error("not a model checkpoint: " + path);
  }
  if (version != kMlpVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + " in " + path);
  }
  std::string key;
  std::uint64_t seed = 0;
  if (!(in >> key >> seed) || key != "seed") {
    throw std::runtime_error("malformed checkpoint header: " + path);
  }
  if (!(in >> key) || key != "sizes") {
    throw std::runtime_error("malformed checkpoint header: " + path);
  }
  std::string rest;
  std::getline(in, rest);
  std::istringstream size_line(rest);
  std::vector<int> sizes;
  int s;
  while (size_line >> s) sizes.push_back(s);
  check_shapes_chain(sizes);

  MlpModel model;
  model.seed = seed;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const auto fan_in = static_cast<std::size_t>(sizes[k]);
    const auto fan_out = static_cast<std::size_t>(sizes[k + 1]);
    MlpModel::Layer layer;
    layer.weights = Matrix(fan_out, fan_in);
    layer.weights.data = read_doubles(in, fan_out * fan_in, "weights");
    layer.bias = read_doubles(in, fan_out, "bias");
    layer.velocity_w = Matrix(fan_out, fan_in);
    layer.velocity_w.data = read_doubles(in, fan_out * fan_in, "velocity");
    layer.velocity_b = read_doubles(in, fan_out, "bias velocity");
    model.layers.push_back(std::move(layer));
  }
  return model;
}

}  // namespace tsdrd
