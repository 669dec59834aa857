// Regenerates data/fixtures: procedural 64x64 clean scenes with matching depth
// maps (train and holdout input manifests) plus a low-contrast test image.
//
//   make_fixtures <out-dir>

#include <cmath>
#include <cstdio>
#include <random>

#include "uwcnn/imageio.hpp"

namespace {

constexpr int kSize = 64;
constexpr int kTrainScenes = 20;
constexpr int kHoldoutScenes = 4;

struct Scene {
  uwcnn::Tensor rgb;
  uwcnn::Tensor depth;
};

Scene make_scene(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scene s{uwcnn::Tensor(kSize, kSize, 3), uwcnn::Tensor(kSize, kSize, 1)};

  double top[3];
  double bottom[3];
  for (int c = 0; c < 3; ++c) {
    top[c] = 0.3 + 0.7 * u(rng);
    bottom[c] = 0.1 + 0.6 * u(rng);
  }
  const double tilt = 0.4 * (u(rng) - 0.5);
  const double freq = 0.1 + 0.4 * u(rng);
  const double phase = 6.28 * u(rng);
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      const double t = static_cast<double>(y) / (kSize - 1);
      const double texture = 0.06 * std::sin(freq * x + phase) * std::cos(0.7 * freq * y);
      for (int c = 0; c < 3; ++c) s.rgb(y, x, c) = (1.0 - t) * top[c] + t * bottom[c] + texture;
      // Floor recedes toward the top of the frame.
      s.depth(y, x, 0) = 0.35 + 0.65 * (1.0 - t) + tilt * (static_cast<double>(x) / (kSize - 1) - 0.5);
    }
  }

  std::uniform_int_distribution<int> shapes(3, 6);
  const int n = shapes(rng);
  for (int k = 0; k < n; ++k) {
    const double cy = kSize * u(rng);
    const double cx = kSize * u(rng);
    const double r = 5.0 + 12.0 * u(rng);
    const bool disc = u(rng) < 0.5;
    double color[3];
    for (double& c : color) c = u(rng);
    color[static_cast<int>(3 * u(rng)) % 3] = 0.8 + 0.2 * u(rng);
    const double near = 0.05 + 0.4 * u(rng);
    for (int y = 0; y < kSize; ++y) {
      for (int x = 0; x < kSize; ++x) {
        const double dy = y - cy;
        const double dx = x - cx;
        const bool inside = disc ? dx * dx + dy * dy <= r * r : std::abs(dx) <= r && std::abs(dy) <= 0.6 * r;
        if (!inside) continue;
        const double shade = disc ? 1.0 - 0.35 * (dx * dx + dy * dy) / (r * r) : 1.0 - 0.2 * (dy / r + 0.5);
        for (int c = 0; c < 3; ++c) s.rgb(y, x, c) = color[c] * shade;
        s.depth(y, x, 0) = std::min(s.depth(y, x, 0), near + 0.1 * std::hypot(dx, dy) / r);
      }
    }
  }

  std::normal_distribution<double> noise(0.0, 0.01);
  for (double& v : s.rgb.values()) v = std::clamp(v + noise(rng), 0.0, 1.0);
  return s;
}

// Greyish-green, low saturation and intensity confined to a narrow band.
uwcnn::Tensor make_low_contrast(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  uwcnn::Tensor t(kSize, kSize, 3);
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      const double level = 0.40 + 0.08 * (static_cast<double>(x) / (kSize - 1)) + 0.01 * u(rng);
      const double tint = 0.03 + 0.05 * (static_cast<double>(y) / (kSize - 1));
      t(y, x, 0) = level - tint;
      t(y, x, 1) = level + tint;
      t(y, x, 2) = level - 0.3 * tint + 0.01 * std::sin(0.3 * x + 0.2 * y);
    }
  }
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <out-dir>\n", argv[0]);
    return 2;
  }
  const uwcnn::fs::path out = argv[1];
  std::mt19937_64 rng(20260101);
  try {
    uwcnn::DatasetManifest train{out, {}};
    uwcnn::DatasetManifest holdout{out, {}};
    for (int i = 0; i < kTrainScenes + kHoldoutScenes; ++i) {
      const Scene scene = make_scene(rng);
      char name[32];
      std::snprintf(name, sizeof name, "scene%02d", i);
      const std::string rgb = std::string("clean/") + name + ".png";
      const std::string depth = std::string("depth/") + name + ".png";
      uwcnn::write_image(scene.rgb, out / rgb);
      uwcnn::Tensor d = scene.depth;
      double lo = d[0];
      double hi = d[0];
      for (double v : d.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      for (double& v : d.values()) v = (v - lo) / (hi - lo);
      uwcnn::write_depth(d, out / depth);
      (i < kTrainScenes ? train : holdout).entries.push_back({rgb, depth, std::nullopt});
    }
    uwcnn::write_manifest(train, out / "train_inputs.tsv");
    uwcnn::write_manifest(holdout, out / "holdout_inputs.tsv");
    uwcnn::write_image(make_low_contrast(rng), out / "low_contrast.png");
  } catch (const uwcnn::Error& e) {
    std::fprintf(stderr, "make_fixtures: %s\n", e.what());
    return 3;
  }
  return 0;
}
