#pragma once

// The enhancement network: `num_blocks` blocks of conv-ReLU pairs, dense
// concatenation of every pair output with the network input and the previous
// block output, a final 3-channel conv predicting the residual, and an
// optional residual connection back to the input.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uwcnn/error.hpp"
#include "uwcnn/tensor.hpp"

namespace uwcnn {

inline constexpr int kImageChannels = 3;

struct ModelConfig {
  int num_blocks = 3;
  int convs_per_block = 3;
  int feature_maps = 16;
  bool residual_learning = true;
  bool dense_concat = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_blocks < 1) throw ConfigError("num_blocks must be >= 1");
    if (convs_per_block < 1) throw ConfigError("convs_per_block must be >= 1");
    if (feature_maps < 1) throw ConfigError("feature_maps must be >= 1");
  }

  [[nodiscard]] int layer_count() const noexcept { return num_blocks * convs_per_block + 1; }

  // Channels carried by the output of block `block` (0-based).
  [[nodiscard]] int block_output_channels(int block) const noexcept {
    if (!dense_concat) return feature_maps + kImageChannels;
    int channels = 0;
    for (int k = 0; k <= block; ++k) {
      channels = convs_per_block * feature_maps + kImageChannels + (k > 0 ? channels : 0);
    }
    return channels;
  }

  // (in, out) channel pair for every conv layer in execution order.
  [[nodiscard]] std::vector<std::pair<int, int>> layer_shapes() const {
    std::vector<std::pair<int, int>> shapes;
    shapes.reserve(static_cast<std::size_t>(layer_count()));
    for (int k = 0; k < num_blocks; ++k) {
      for (int j = 0; j < convs_per_block; ++j) {
        const int in = j > 0 ? feature_maps : (k == 0 ? kImageChannels : block_output_channels(k - 1));
        shapes.emplace_back(in, feature_maps);
      }
    }
    shapes.emplace_back(block_output_channels(num_blocks - 1), kImageChannels);
    return shapes;
  }

  bool operator==(const ModelConfig&) const = default;
};

class Model {
public:
  Model() = default;
  Model(ModelConfig config, std::vector<ConvParams> layers) : config_(config), layers_(std::move(layers)) {
    config_.validate();
    const auto shapes = config_.layer_shapes();
    if (shapes.size() != layers_.size()) {
      throw DimensionError("model expects " + std::to_string(shapes.size()) + " layers, got " +
                           std::to_string(layers_.size()));
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      if (layers_[i].in_channels != shapes[i].first || layers_[i].out_channels != shapes[i].second) {
        throw DimensionError("layer " + std::to_string(i) + " has shape " + std::to_string(layers_[i].in_channels) +
                             "->" + std::to_string(layers_[i].out_channels) + ", config requires " +
                             std::to_string(shapes[i].first) + "->" + std::to_string(shapes[i].second));
      }
    }
  }

  [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
  [[nodiscard]] const std::vector<ConvParams>& layers() const noexcept { return layers_; }

  // Any mutable access invalidates outstanding forward caches.
  [[nodiscard]] std::vector<ConvParams>& mutable_layers() noexcept {
    ++version_;
    return layers_;
  }

  [[nodiscard]] std::uint64_t version() const noexcept { return version_; }

private:
  ModelConfig config_;
  std::vector<ConvParams> layers_;
  std::uint64_t version_ = 0;
};

// He fan-in normal weights, zero biases.
inline Model build(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::vector<ConvParams> layers;
  for (const auto& [in, out] : config.layer_shapes()) {
    ConvParams p(in, out);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (ConvParams::kSize * ConvParams::kSize * in)));
    for (double& w : p.kernel) w = dist(rng);
    layers.push_back(std::move(p));
  }
  return Model(config, std::move(layers));
}

inline std::size_t parameter_count(const Model& model) {
  std::size_t n = 0;
  for (const auto& layer : model.layers()) n += layer.parameter_count();
  return n;
}

// Activations kept by forward() for one backward() call.
struct ForwardCache {
  const Model* model = nullptr;
  std::uint64_t model_version = 0;
  bool consumed = false;
  Tensor input;
  std::vector<std::vector<Tensor>> activations;  // [block][conv] post-ReLU
  std::vector<Tensor> block_outputs;
  std::vector<int> layer_input_channels;  // observed width entering each conv
};

struct ForwardResult {
  Tensor residual;
  Tensor enhanced;
  ForwardCache cache;
};

struct ModelGrads {
  std::vector<ConvGrads> layers;
  Tensor input;
};

namespace detail {

inline std::vector<const Tensor*> block_parts(const ModelConfig& config, const std::vector<Tensor>& z, const Tensor& input,
                                              const Tensor* previous) {
  std::vector<const Tensor*> parts;
  if (config.dense_concat) {
    for (const auto& t : z) parts.push_back(&t);
    parts.push_back(&input);
    if (previous != nullptr) parts.push_back(previous);
  } else {
    parts.push_back(&z.back());
    parts.push_back(&input);
  }
  return parts;
}

}  // namespace detail

inline ForwardResult forward(const Model& model, const Tensor& input) {
  if (input.channels() != kImageChannels) {
    throw DimensionError("forward: expected a 3-channel image, got " + input.shape());
  }
  const auto& config = model.config();
  const auto& layers = model.layers();
  ForwardResult result;
  auto& cache = result.cache;
  cache.model = &model;
  cache.model_version = model.version();
  cache.input = input;

  const int n = config.convs_per_block;
  for (int k = 0; k < config.num_blocks; ++k) {
    std::vector<Tensor> z;
    z.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const Tensor& x = j > 0 ? z.back() : (k == 0 ? cache.input : cache.block_outputs.back());
      const auto& layer = layers[static_cast<std::size_t>(k * n + j)];
      cache.layer_input_channels.push_back(x.channels());
      z.push_back(relu_forward(conv2d_forward(x, layer)));
    }
    const Tensor* previous = k > 0 ? &cache.block_outputs.back() : nullptr;
    Tensor b = concat_channels(std::span<const Tensor* const>(detail::block_parts(config, z, cache.input, previous)));
    if (b.channels() != config.block_output_channels(k)) {
      throw StateError("forward: block " + std::to_string(k) + " produced " + std::to_string(b.channels()) +
                       " channels, expected " + std::to_string(config.block_output_channels(k)));
    }
    cache.activations.push_back(std::move(z));
    cache.block_outputs.push_back(std::move(b));
  }
  cache.layer_input_channels.push_back(cache.block_outputs.back().channels());
  if (static_cast<int>(cache.layer_input_channels.size()) != config.layer_count()) {
    throw StateError("forward: network depth does not match the configuration");
  }
  result.residual = conv2d_forward(cache.block_outputs.back(), layers.back());
  result.enhanced = config.residual_learning ? add(cache.input, result.residual) : result.residual;
  return result;
}

// Enhanced image only; intermediate activations are discarded.
inline Tensor infer(const Model& model, const Tensor& input) { return forward(model, input).enhanced; }

inline ModelGrads backward(const Model& model, ForwardCache& cache, const Tensor& grad_enhanced) {
  if (cache.model != &model || cache.model_version != model.version()) {
    throw StateError("backward: cache was produced by a different or since-modified model");
  }
  if (cache.consumed) {
    throw StateError("backward: cache already consumed");
  }
  if (!grad_enhanced.same_shape(cache.input)) {
    throw DimensionError("backward: gradient " + grad_enhanced.shape() + " does not match input " +
                         cache.input.shape());
  }
  cache.consumed = true;

  const auto& config = model.config();
  const auto& layers = model.layers();
  const int n = config.convs_per_block;
  const int blocks = config.num_blocks;

  ModelGrads grads;
  grads.layers.resize(layers.size());
  grads.input = config.residual_learning ? grad_enhanced : Tensor(grad_enhanced.height(), grad_enhanced.width(),
                                                                  kImageChannels);

  auto final_step = conv2d_backward(grad_enhanced, cache.block_outputs.back(), layers.back());
  grads.layers.back() = std::move(final_step.grads);
  Tensor grad_block = std::move(final_step.grad_input);

  for (int k = blocks - 1; k >= 0; --k) {
    const auto& z = cache.activations[static_cast<std::size_t>(k)];
    const Tensor* previous = k > 0 ? &cache.block_outputs[static_cast<std::size_t>(k - 1)] : nullptr;
    std::vector<int> part_channels;
    for (const Tensor* p : detail::block_parts(config, z, cache.input, previous)) part_channels.push_back(p->channels());
    auto parts = concat_backward(grad_block, part_channels);

    // Gradient reaching each z directly through the concatenation.
    std::vector<std::optional<Tensor>> grad_z(static_cast<std::size_t>(n));
    std::optional<Tensor> grad_previous;
    if (config.dense_concat) {
      for (int j = 0; j < n; ++j) grad_z[static_cast<std::size_t>(j)] = std::move(parts[static_cast<std::size_t>(j)]);
      add_into(grads.input, parts[static_cast<std::size_t>(n)]);
      if (k > 0) grad_previous = std::move(parts[static_cast<std::size_t>(n + 1)]);
    } else {
      grad_z.back() = std::move(parts[0]);
      add_into(grads.input, parts[1]);
    }

    Tensor g = std::move(*grad_z.back());
    for (int j = n - 1; j >= 0; --j) {
      const auto idx = static_cast<std::size_t>(k * n + j);
      const Tensor& x = j > 0 ? z[static_cast<std::size_t>(j - 1)] : (k == 0 ? cache.input : *previous);
      // z > 0 exactly where the pre-activation is > 0.
      auto step = conv2d_backward(relu_backward(g, z[static_cast<std::size_t>(j)]), x, layers[idx]);
      grads.layers[idx] = std::move(step.grads);
      if (j > 0) {
        g = std::move(step.grad_input);
        if (auto& direct = grad_z[static_cast<std::size_t>(j - 1)]) add_into(g, *direct);
      } else if (k == 0) {
        add_into(grads.input, step.grad_input);
      } else {
        grad_block = std::move(step.grad_input);
        if (grad_previous) add_into(grad_block, *grad_previous);
      }
    }
  }
  return grads;
}

}  // namespace uwcnn
