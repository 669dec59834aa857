#pragma once

// Underwater image formation:
//   U_c(x) = I_c(x) * T_c(x) + B_c * (1 - T_c(x)),   T_c(x) = N_c ^ d(x)
// where N_c is the fraction of light of colour c surviving one metre of water
// for a given Jerlov water type, d(x) is scene depth in metres and B_c the
// homogeneous background light.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "uwcnn/error.hpp"
#include "uwcnn/tensor.hpp"

namespace uwcnn {

struct WaterType {
  std::string_view name;
  double n_red;
  double n_green;
  double n_blue;

  [[nodiscard]] std::array<double, 3> ratios() const noexcept { return {n_red, n_green, n_blue}; }
};

// Per-metre residual energy ratios for the ten Jerlov types.
inline constexpr std::array<WaterType, 10> kWaterTypes{{
    {"I", 0.805, 0.961, 0.982},
    {"IA", 0.804, 0.955, 0.975},
    {"IB", 0.83, 0.95, 0.968},
    {"II", 0.8, 0.925, 0.94},
    {"III", 0.75, 0.885, 0.89},
    {"1", 0.75, 0.885, 0.875},
    {"3", 0.71, 0.82, 0.8},
    {"5", 0.67, 0.73, 0.67},
    {"7", 0.62, 0.61, 0.5},
    {"9", 0.55, 0.46, 0.29},
}};

inline std::string water_type_names() {
  std::string names;
  for (const auto& t : kWaterTypes) {
    if (!names.empty()) names += ", ";
    names += t.name;
  }
  return names;
}

inline const WaterType& water_type(std::string_view name) {
  for (const auto& t : kWaterTypes) {
    if (t.name == name) return t;
  }
  throw ConfigError("unknown water type '" + std::string(name) + "'; valid types: " + water_type_names());
}

struct SynthesisParams {
  std::array<double, 3> background{0.9, 0.9, 0.9};
  double depth_max = 15.0;
  double depth_min = 0.5;
  WaterType water = kWaterTypes[5];
  std::uint64_t seed = 0;

  void validate() const {
    for (double b : background) {
      if (!(b > 0.8 && b < 1.0)) throw DomainError("background light must lie in (0.8, 1.0), got " + std::to_string(b));
    }
    if (!(depth_min >= 0.5 && depth_min < depth_max && depth_max <= 15.0)) {
      throw DomainError("depth range must satisfy 0.5 <= min < max <= 15, got [" + std::to_string(depth_min) + ", " +
                        std::to_string(depth_max) + "]");
    }
  }
};

inline Tensor transmission(const WaterType& water, const Tensor& depth) {
  if (depth.channels() != 1) throw DimensionError("transmission: depth must be single-channel, got " + depth.shape());
  Tensor t(depth.height(), depth.width(), 3);
  const auto n = water.ratios();
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double d = depth(y, x, 0);
      if (!(d >= 0.0)) throw DomainError("transmission: negative or invalid depth " + std::to_string(d));
      for (int c = 0; c < 3; ++c) t(y, x, c) = std::pow(n[static_cast<std::size_t>(c)], d);
    }
  }
  return t;
}

inline Tensor synthesize(const Tensor& clean, const Tensor& depth, const SynthesisParams& params) {
  if (clean.channels() != 3 || depth.channels() != 1 || clean.height() != depth.height() ||
      clean.width() != depth.width()) {
    throw DimensionError("synthesize: image " + clean.shape() + " and depth " + depth.shape() + " are incompatible");
  }
  const Tensor t = transmission(params.water, depth);
  Tensor out(clean.height(), clean.width(), 3);
  auto o = out.values();
  auto in = clean.values();
  auto tv = t.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double b = params.background[i % 3];
    o[i] = std::clamp(in[i] * tv[i] + b * (1.0 - tv[i]), 0.0, 1.0);
  }
  return out;
}

// Affine map of a [0,1] depth map onto [depth_min, depth_max] metres.
inline Tensor scale_depth(const Tensor& normalized, const SynthesisParams& params) {
  Tensor out = normalized;
  for (double& v : out.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("scale_depth: normalized depth outside [0,1]: " + std::to_string(v));
    v = params.depth_min + (params.depth_max - params.depth_min) * v;
  }
  return out;
}

inline constexpr double kDepthMaxLow = 3.0;
inline constexpr double kDepthMaxHigh = 15.0;

// B_c ~ U(0.8, 1.0) independently per channel, depth_max ~ U(3, 15).
template <class Rng>
SynthesisParams sample_params(Rng& rng, const WaterType& water) {
  SynthesisParams p;
  p.water = water;
  std::uniform_real_distribution<double> light(0.8, 1.0);
  for (double& b : p.background) {
    do {
      b = light(rng);
    } while (!(b > 0.8 && b < 1.0));
  }
  std::uniform_real_distribution<double> depth(kDepthMaxLow, kDepthMaxHigh);
  p.depth_max = depth(rng);
  return p;
}

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent stream per (image, variant); never depends on scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t image, std::uint64_t variant) noexcept {
  return splitmix64(seed ^ splitmix64(splitmix64(image) ^ (variant + 0x5851F42D4C957F2DULL)));
}

}  // namespace uwcnn
