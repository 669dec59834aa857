#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uwcnn/error.hpp"
#include "uwcnn/model.hpp"

namespace uwcnn {

struct AdamHyper {
  double lr = 0.0002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments mirror the model's layer structure one-to-one.
struct AdamState {
  std::vector<ConvParams> m;
  std::vector<ConvParams> v;
  std::int64_t t = 0;
  AdamHyper hyper;
};

inline AdamState adam_init(const Model& model) {
  AdamState state;
  for (const auto& layer : model.layers()) {
    state.m.emplace_back(layer.in_channels, layer.out_channels);
    state.v.emplace_back(layer.in_channels, layer.out_channels);
  }
  return state;
}

// Bias-corrected update of one parameter array; `t` is the already
// incremented step count.
inline void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                        std::span<double> v, std::int64_t t, const AdamHyper& hyper) {
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    theta[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

// Refuses the whole step (model and state untouched) if any gradient is not finite.
inline void adam_step(AdamState& state, Model& model, const std::vector<ConvGrads>& grads) {
  const auto& layers = model.layers();
  if (grads.size() != layers.size() || state.m.size() != layers.size()) {
    throw DimensionError("adam_step: gradient/state structure does not match the model");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].kernel.size() != layers[i].kernel.size() || grads[i].bias.size() != layers[i].bias.size()) {
      throw DimensionError("adam_step: gradient shape mismatch at layer " + std::to_string(i));
    }
    for (double g : grads[i].kernel) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in layer " + std::to_string(i));
    }
    for (double g : grads[i].bias) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in layer " + std::to_string(i));
    }
  }
  ++state.t;
  auto& params = model.mutable_layers();
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_update(params[i].kernel, grads[i].kernel, state.m[i].kernel, state.v[i].kernel, state.t, state.hyper);
    adam_update(params[i].bias, grads[i].bias, state.m[i].bias, state.v[i].bias, state.t, state.hyper);
  }
}

}  // namespace uwcnn
