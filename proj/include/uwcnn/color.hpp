#pragma once

// HSI colour space and the saturation/intensity range stretch applied after
// the network ("UWCNN+").
//
// Forward conversion, for R, G, B in [0,1]:
//   I = (R + G + B) / 3
//   S = 1 - min(R, G, B) / I            (S = 0 when I = 0)
//   theta = acos( ((R-G) + (R-B)) / 2 / sqrt((R-G)^2 + (R-B)(G-B)) )
//   H = theta if B <= G, else 2*pi - theta    (undefined, stored as NaN, when S = 0)
//
// Inverse by 120-degree sectors; in the first sector (0 <= H < 2*pi/3):
//   B = I (1 - S),  R = I (1 + S cos H / cos(pi/3 - H)),  G = 3I - (R + B)
// and the other two sectors rotate the roles of R, G, B.
//
// A reconstruction with a channel above 1 is pulled toward grey along the
// constant-hue, constant-intensity line (only S is reduced), so hue and
// intensity survive the return to RGB.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uwcnn/error.hpp"
#include "uwcnn/tensor.hpp"

namespace uwcnn {

struct HsiImage {
  int height = 0;
  int width = 0;
  std::vector<double> hue;  // radians in [0, 2*pi), NaN when achromatic
  std::vector<double> saturation;
  std::vector<double> intensity;
};

struct Hsi {
  double h;
  double s;
  double i;
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline Hsi rgb_to_hsi_pixel(double r, double g, double b) {
  const double i = (r + g + b) / 3.0;
  const double lo = std::min({r, g, b});
  const double s = i > 0.0 ? 1.0 - lo / i : 0.0;
  if (s <= 0.0) return {std::numeric_limits<double>::quiet_NaN(), 0.0, i};
  const double num = 0.5 * ((r - g) + (r - b));
  const double den = std::sqrt((r - g) * (r - g) + (r - b) * (g - b));
  if (!(den > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), 0.0, i};
  const double theta = std::acos(std::clamp(num / den, -1.0, 1.0));
  double h = b <= g ? theta : kTwoPi - theta;
  if (h >= kTwoPi) h -= kTwoPi;
  return {h, std::clamp(s, 0.0, 1.0), i};
}

inline std::array<double, 3> hsi_to_rgb_pixel(const Hsi& p) {
  if (!(p.s >= 0.0 && p.s <= 1.0) || !(p.i >= 0.0 && p.i <= 1.0)) {
    throw DomainError("hsi_to_rgb: saturation and intensity must lie in [0,1]");
  }
  if (std::isnan(p.h) || p.s == 0.0) return {p.i, p.i, p.i};
  if (!(p.h >= 0.0 && p.h < kTwoPi)) {
    throw DomainError("hsi_to_rgb: hue " + std::to_string(p.h) + " outside [0, 2pi)");
  }
  constexpr double third = kTwoPi / 3.0;
  const int sector = p.h < third ? 0 : (p.h < 2.0 * third ? 1 : 2);
  const double h = p.h - sector * third;
  const double low = p.i * (1.0 - p.s);
  const double high = p.i * (1.0 + p.s * std::cos(h) / std::cos(std::numbers::pi / 3.0 - h));
  const double rest = 3.0 * p.i - (low + high);
  std::array<double, 3> rgb{};
  switch (sector) {
    case 0: rgb = {high, rest, low}; break;
    case 1: rgb = {low, high, rest}; break;
    default: rgb = {rest, low, high}; break;
  }
  const double top = std::max({rgb[0], rgb[1], rgb[2]});
  if (top > 1.0) {
    const double f = p.i < 1.0 ? (1.0 - p.i) / (top - p.i) : 0.0;
    for (double& c : rgb) c = p.i + (c - p.i) * f;
  }
  for (double& c : rgb) c = std::clamp(c, 0.0, 1.0);
  return rgb;
}

inline HsiImage rgb_to_hsi(const Tensor& image) {
  if (image.channels() != 3) throw DimensionError("rgb_to_hsi: expected 3 channels, got " + image.shape());
  HsiImage out{image.height(), image.width(), {}, {}, {}};
  const std::size_t n = static_cast<std::size_t>(image.height()) * image.width();
  out.hue.resize(n);
  out.saturation.resize(n);
  out.intensity.resize(n);
  const auto v = image.values();
  for (std::size_t px = 0; px < n; ++px) {
    const double r = v[px * 3];
    const double g = v[px * 3 + 1];
    const double b = v[px * 3 + 2];
    if (!(r >= 0.0 && r <= 1.0 && g >= 0.0 && g <= 1.0 && b >= 0.0 && b <= 1.0)) {
      throw DomainError("rgb_to_hsi: pixel " + std::to_string(px) + " has a channel outside [0,1]");
    }
    const Hsi p = rgb_to_hsi_pixel(r, g, b);
    out.hue[px] = p.h;
    out.saturation[px] = p.s;
    out.intensity[px] = p.i;
  }
  return out;
}

inline Tensor hsi_to_rgb(const HsiImage& hsi) {
  const std::size_t n = static_cast<std::size_t>(hsi.height) * hsi.width;
  if (hsi.hue.size() != n || hsi.saturation.size() != n || hsi.intensity.size() != n) {
    throw DimensionError("hsi_to_rgb: component sizes do not match the image dimensions");
  }
  Tensor out(hsi.height, hsi.width, 3);
  auto v = out.values();
  for (std::size_t px = 0; px < n; ++px) {
    const auto rgb = hsi_to_rgb_pixel({hsi.hue[px], hsi.saturation[px], hsi.intensity[px]});
    std::copy(rgb.begin(), rgb.end(), v.begin() + static_cast<std::ptrdiff_t>(px * 3));
  }
  return out;
}

inline constexpr int kHistogramBins = 256;
inline constexpr double kFrequencyThreshold = 0.002;

// Range of the values that fall in histogram bins holding at least
// `frequency_threshold` of all pixels. Values in rarer bins are ignored; if no
// bin qualifies the raw range is returned.
inline std::pair<double, double> robust_min_max(std::span<const double> channel,
                                                double frequency_threshold = kFrequencyThreshold) {
  if (channel.empty()) throw DomainError("robust_min_max: empty channel");
  std::array<std::size_t, kHistogramBins> counts{};
  std::array<double, kHistogramBins> lo{};
  std::array<double, kHistogramBins> hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (double v : channel) {
    const int bin = std::clamp(static_cast<int>(std::floor(v * kHistogramBins)), 0, kHistogramBins - 1);
    ++counts[static_cast<std::size_t>(bin)];
    lo[static_cast<std::size_t>(bin)] = std::min(lo[static_cast<std::size_t>(bin)], v);
    hi[static_cast<std::size_t>(bin)] = std::max(hi[static_cast<std::size_t>(bin)], v);
  }
  const double needed = frequency_threshold * static_cast<double>(channel.size());
  int first = -1;
  int last = -1;
  for (int b = 0; b < kHistogramBins; ++b) {
    const auto c = counts[static_cast<std::size_t>(b)];
    if (c > 0 && static_cast<double>(c) >= needed) {
      if (first < 0) first = b;
      last = b;
    }
  }
  if (first < 0) {
    const auto [mn, mx] = std::minmax_element(channel.begin(), channel.end());
    return {*mn, *mx};
  }
  return {lo[static_cast<std::size_t>(first)], hi[static_cast<std::size_t>(last)]};
}

inline std::vector<double> normalize_channel(std::span<const double> channel, double y_min, double y_max) {
  if (y_min > y_max) throw DomainError("normalize_channel: y_min exceeds y_max");
  std::vector<double> out(channel.begin(), channel.end());
  if (y_max - y_min < 1e-6) return out;
  const double range = y_max - y_min;
  for (double& v : out) v = std::clamp((v - y_min) / range, 0.0, 1.0);
  return out;
}

inline Tensor postprocess(const Tensor& image, double frequency_threshold = kFrequencyThreshold) {
  HsiImage hsi = rgb_to_hsi(image);
  const auto [s_lo, s_hi] = robust_min_max(hsi.saturation, frequency_threshold);
  hsi.saturation = normalize_channel(hsi.saturation, s_lo, s_hi);
  const auto [i_lo, i_hi] = robust_min_max(hsi.intensity, frequency_threshold);
  hsi.intensity = normalize_channel(hsi.intensity, i_lo, i_hi);
  return hsi_to_rgb(hsi);
}

}  // namespace uwcnn
