#pragma once

// Finite-difference verification of every primitive backward pass and of the
// full network under each ablation variant.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "uwcnn/gradcheck.hpp"
#include "uwcnn/loss.hpp"
#include "uwcnn/model.hpp"

namespace uwcnn {

inline constexpr double kGradCheckEps = 1e-6;
inline constexpr double kGradCheckTolerance = 1e-5;

// One suite line. `max_relative_error` is the largest norm-wise relative error
// over the gradient tensors probed (see GradCheckResult); `worst` names that
// tensor and its worst coordinate.
struct GradCheckEntry {
  std::string name;
  double max_relative_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes that crossed a ReLU kink
  double max_coordinate_error = 0.0;

  [[nodiscard]] bool passed() const noexcept { return max_relative_error < kGradCheckTolerance; }
};

struct Variant {
  std::string name;
  bool residual = true;
  bool dense = true;
  bool ssim = true;
};

// Column order of the ablation table.
inline std::vector<Variant> ablation_variants() {
  return {{"woRL", false, true, true}, {"woDC", true, false, true}, {"woSSIM", true, true, false},
          {"UWCNN", true, true, true}};
}

namespace detail {

inline Tensor random_tensor(int h, int w, int c, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  Tensor t(h, w, c);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// Fixed random projection: L(t) = sum_i r_i t_i.
struct Projection {
  Tensor weights;
  [[nodiscard]] double value(const Tensor& t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += weights[i] * t[i];
    return s;
  }
};

inline std::vector<bool> relu_pattern(const ForwardCache& cache) {
  std::vector<bool> mask;
  for (const auto& block : cache.activations) {
    for (const auto& z : block) {
      for (double v : z.values()) mask.push_back(v > 0.0);
    }
  }
  return mask;
}

}  // namespace detail

// Checks d(loss)/d(params) and d(loss)/d(input) for one network on a sampled
// set of coordinates (every bias, `per_layer` kernel weights per layer and
// `per_layer` input values). Probes whose +/- evaluations change any ReLU
// activation pattern are skipped and counted. `corrupt` scales the first
// layer's analytic kernel gradient to exercise the failure path.
inline GradCheckEntry check_model_gradients(const std::string& name, const ModelConfig& config, const Tensor& input,
                                            const Tensor& target, bool use_ssim, std::uint64_t seed,
                                            int per_layer = 16, bool corrupt = false) {
  Model model = build(config);
  // Non-zero biases so that bias gradients are exercised away from symmetry.
  std::mt19937_64 rng(seed ^ 0xB1A5);
  std::uniform_real_distribution<double> small(-0.05, 0.05);
  for (auto& layer : model.mutable_layers()) {
    for (double& b : layer.bias) b = small(rng);
  }

  auto fwd = forward(model, input);
  const auto base_pattern = detail::relu_pattern(fwd.cache);
  const auto loss = total_loss(fwd.enhanced, target, use_ssim);
  auto grads = backward(model, fwd.cache, loss.grad_wrt_prediction);
  if (corrupt) {
    for (double& g : grads.layers.front().kernel) g *= 1.01;
  }

  GradCheckEntry entry;
  entry.name = name;
  bool crossed = false;
  const auto evaluate = [&](const Model& m, const Tensor& x) {
    auto f = forward(m, x);
    if (detail::relu_pattern(f.cache) != base_pattern) crossed = true;
    return total_loss(f.enhanced, target, use_ssim).total;
  };

  struct TensorProbe {
    NormAccumulator norms;
    double worst = 0.0;
    std::string where;
  };
  const auto probe = [&](TensorProbe& t, double& coordinate, double analytic, const std::string& where,
                         const Model& m, const Tensor& x) {
    const double saved = coordinate;
    crossed = false;
    coordinate = saved + kGradCheckEps;
    const double plus = evaluate(m, x);
    coordinate = saved - kGradCheckEps;
    const double minus = evaluate(m, x);
    coordinate = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) throw NumericError("non-finite loss while probing " + where);
    if (crossed) {
      ++entry.skipped;
      return;
    }
    const double numeric = (plus - minus) / (2.0 * kGradCheckEps);
    t.norms.add(analytic, numeric);
    const double err = relative_error(analytic, numeric);
    if (t.where.empty() || err > t.worst) {
      t.worst = err;
      t.where = where;
    }
    entry.max_coordinate_error = std::max(entry.max_coordinate_error, err);
    ++entry.checked;
  };
  const auto finish = [&](const TensorProbe& t, const std::string& tensor) {
    if (t.where.empty()) return;
    const double rel = t.norms.relative();
    if (entry.worst.empty() || rel > entry.max_relative_error) {
      entry.max_relative_error = rel;
      entry.worst = tensor + " (worst coordinate " + t.where + ")";
    }
  };

  // Forward caches are not used while probing, so direct weight edits are safe.
  auto& layers = model.mutable_layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& layer = layers[l];
    const std::string prefix = "layer " + std::to_string(l);
    std::uniform_int_distribution<std::size_t> pick(0, layer.kernel.size() - 1);
    TensorProbe kernel;
    for (int i = 0; i < per_layer; ++i) {
      const std::size_t k = pick(rng);
      probe(kernel, layer.kernel[k], grads.layers[l].kernel[k], prefix + " kernel[" + std::to_string(k) + "]", model,
            input);
    }
    finish(kernel, prefix + " kernel");
    TensorProbe bias;
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      probe(bias, layer.bias[i], grads.layers[l].bias[i], prefix + " bias[" + std::to_string(i) + "]", model, input);
    }
    finish(bias, prefix + " bias");
  }
  Tensor x = input;
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  TensorProbe in;
  for (int i = 0; i < per_layer; ++i) {
    const std::size_t idx = pick(rng);
    probe(in, x[idx], grads.input[idx], "input[" + std::to_string(idx) + "]", model, x);
  }
  finish(in, "input");
  return entry;
}

inline std::vector<GradCheckEntry> run_primitive_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCheckEntry> out;
  const auto record = [&](const std::string& name, const GradCheckResult& r, const std::string& label) {
    out.push_back({name, r.relative_error, label + " (worst coordinate " + std::to_string(r.worst_index) + ")", r.checked,
                   0, r.max_coordinate_error});
  };

  // conv2d: input, kernel and bias gradients through a random projection.
  {
    Tensor x = detail::random_tensor(6, 5, 2, rng, -1.0, 1.0);
    ConvParams p(2, 3);
    std::normal_distribution<double> n(0.0, 0.5);
    for (double& v : p.kernel) v = n(rng);
    for (double& v : p.bias) v = n(rng);
    detail::Projection proj{detail::random_tensor(6, 5, 3, rng, -1.0, 1.0)};
    const auto back = conv2d_backward(proj.weights, x, p);
    const auto value = [&] { return proj.value(conv2d_forward(x, p)); };
    record("conv2d input", check_coordinates(x.values(), back.grad_input.values(), value, kGradCheckEps), "input");
    record("conv2d kernel", check_coordinates(std::span<double>(p.kernel), back.grads.kernel, value, kGradCheckEps),
           "kernel");
    record("conv2d bias", check_coordinates(std::span<double>(p.bias), back.grads.bias, value, kGradCheckEps), "bias");
  }
  // ReLU away from the kink.
  {
    Tensor x = detail::random_tensor(4, 4, 3, rng, -1.0, 1.0);
    for (double& v : x.values()) {
      if (std::abs(v) <= 1e-3) v = 0.5;
    }
    detail::Projection proj{detail::random_tensor(4, 4, 3, rng, -1.0, 1.0)};
    const Tensor g = relu_backward(proj.weights, x);
    record("relu", check_coordinates(x.values(), g.values(), [&] { return proj.value(relu_forward(x)); }, kGradCheckEps),
           "input");
  }
  // concat: gradient of a projection of the concatenation, routed to each part.
  {
    Tensor a = detail::random_tensor(3, 4, 2, rng);
    Tensor b = detail::random_tensor(3, 4, 3, rng);
    detail::Projection proj{detail::random_tensor(3, 4, 5, rng, -1.0, 1.0)};
    const std::vector<int> counts{2, 3};
    const auto parts = concat_backward(proj.weights, counts);
    const auto value = [&] { return proj.value(concat_channels({&a, &b})); };
    record("concat part 0", check_coordinates(a.values(), parts[0].values(), value, kGradCheckEps), "a");
    record("concat part 1", check_coordinates(b.values(), parts[1].values(), value, kGradCheckEps), "b");
  }
  // add: the cotangent flows unchanged to both addends.
  {
    Tensor a = detail::random_tensor(3, 3, 3, rng);
    Tensor b = detail::random_tensor(3, 3, 3, rng);
    detail::Projection proj{detail::random_tensor(3, 3, 3, rng, -1.0, 1.0)};
    const auto value = [&] { return proj.value(add(a, b)); };
    record("add lhs", check_coordinates(a.values(), proj.weights.values(), value, kGradCheckEps), "a");
    record("add rhs", check_coordinates(b.values(), proj.weights.values(), value, kGradCheckEps), "b");
  }
  // Losses on a 14x14x3 pair.
  {
    Tensor pred = detail::random_tensor(14, 14, 3, rng);
    const Tensor target = detail::random_tensor(14, 14, 3, rng);
    const auto mse = mse_loss(pred, target);
    record("mse loss", check_coordinates(pred.values(), mse.grad.values(), [&] { return mse_loss(pred, target).value; },
                                         kGradCheckEps),
           "pred");
    const auto ssim = ssim_loss(pred, target);
    record("ssim loss",
           check_coordinates(pred.values(), ssim.grad.values(), [&] { return ssim_loss(pred, target).value; },
                             kGradCheckEps),
           "pred");
    const auto total = total_loss(pred, target);
    record("total loss",
           check_coordinates(pred.values(), total.grad_wrt_prediction.values(),
                             [&] { return total_loss(pred, target).total; }, kGradCheckEps),
           "pred");
  }
  return out;
}

// Per-variant network checks on size x size inputs. The SSIM term needs a full
// 13x13 window, so when `size` is smaller the SSIM-bearing variants are
// additionally checked on a 14x14 pair.
inline std::vector<GradCheckEntry> run_model_checks(int size, std::uint64_t seed, bool corrupt = false) {
  std::mt19937_64 rng(seed ^ 0x4D0DE1);
  const Tensor input = detail::random_tensor(size, size, 3, rng);
  const Tensor target = detail::random_tensor(size, size, 3, rng);
  const int window = SsimLossParams{}.window;
  const bool ssim_fits = size >= window;
  const Tensor big_input = detail::random_tensor(window + 1, window + 1, 3, rng);
  const Tensor big_target = detail::random_tensor(window + 1, window + 1, 3, rng);
  std::vector<GradCheckEntry> out;
  for (const auto& v : ablation_variants()) {
    ModelConfig cfg;
    cfg.residual_learning = v.residual;
    cfg.dense_concat = v.dense;
    cfg.seed = seed + 17;
    const std::string name = "model " + v.name;
    out.push_back(check_model_gradients(name, cfg, input, target, v.ssim && ssim_fits, seed, 16, corrupt));
    if (v.ssim && !ssim_fits) {
      out.push_back(check_model_gradients(name + " ssim", cfg, big_input, big_target, true, seed, 16, corrupt));
    }
  }
  return out;
}

}  // namespace uwcnn
