#pragma once

// Builds paired (degraded, ground truth) datasets from clean RGB-D inputs.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uwcnn/imageio.hpp"
#include "uwcnn/parallel.hpp"
#include "uwcnn/watersim.hpp"

namespace uwcnn {

struct ResizeTarget {
  int width = 310;
  int height = 230;
};

// Bilinear resampling with pixel-centre alignment and edge clamping.
inline Tensor resize_bilinear(const Tensor& src, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ConfigError("resize target must be positive");
  Tensor out(out_h, out_w, src.channels());
  const double sy = static_cast<double>(src.height()) / out_h;
  const double sx = static_cast<double>(src.width()) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = src(y0, x0, c) * (1.0 - wx) + src(y0, x1, c) * wx;
        const double bottom = src(y1, x0, c) * (1.0 - wx) + src(y1, x1, c) * wx;
        out(y, x, c) = top * (1.0 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

struct DatasetOptions {
  int variants_per_image = 5;
  std::uint64_t seed = 0;
  std::optional<ResizeTarget> resize;
  int threads = 1;
};

// Writes `variants_per_image` degraded images per clean input under
// out_dir/degraded and the (possibly resized) ground truth under out_dir/gt.
// Returns the output manifest rooted at out_dir; the caller persists it.
inline DatasetManifest build_dataset(const DatasetManifest& inputs, const WaterType& water,
                                     const DatasetOptions& options, const fs::path& out_dir) {
  if (options.variants_per_image < 0) throw ConfigError("variants per image must be >= 0");
  DatasetManifest out;
  out.base_dir = out_dir;
  const auto variants = static_cast<std::size_t>(options.variants_per_image);
  if (variants == 0) return out;

  std::vector<std::vector<ManifestEntry>> per_image(inputs.entries.size());
  parallel_for(inputs.entries.size(), options.threads, [&](std::size_t i) {
    const auto& entry = inputs.entries[i];
    Tensor clean = read_image(inputs.resolve(entry.first));
    auto depth = read_depth(inputs.resolve(entry.second));
    if (depth.constant) {
      std::fprintf(stderr, "warning: %s has constant depth; treating it as the nearest plane\n",
                   inputs.resolve(entry.second).string().c_str());
    }
    Tensor normalized = std::move(depth.depth);
    if (options.resize) {
      clean = resize_bilinear(clean, options.resize->height, options.resize->width);
      normalized = resize_bilinear(normalized, options.resize->height, options.resize->width);
    } else if (normalized.height() != clean.height() || normalized.width() != clean.width()) {
      throw DimensionError(entry.first + " and " + entry.second + " differ in size");
    }

    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%04zu_", i);
    const std::string stem = prefix + fs::path(entry.first).stem().string();
    const std::string gt_rel = "gt/" + stem + ".png";
    write_image(clean, out_dir / gt_rel);

    for (std::size_t v = 0; v < variants; ++v) {
      const std::uint64_t seed = derive_seed(options.seed, i, v);
      std::mt19937_64 rng(seed);
      SynthesisParams params = sample_params(rng, water);
      params.seed = seed;
      const Tensor degraded = synthesize(clean, scale_depth(normalized, params), params);
      const std::string rel = "degraded/" + stem + "_v" + std::to_string(v) + ".png";
      write_image(degraded, out_dir / rel);
      per_image[i].push_back({rel, gt_rel,
                              SynthesisRecord{std::string(water.name), params.background, params.depth_max, seed}});
    }
  });
  for (auto& list : per_image) {
    for (auto& e : list) out.entries.push_back(std::move(e));
  }
  return out;
}

}  // namespace uwcnn
